"""Bundle primitives, the clock, and the four-step update protocol."""

import random
import threading

import pytest

from bundleset.core import (
    Bundle,
    BundleEntry,
    GlobalClock,
    PENDING_TS,
    RelaxedClock,
    UpdatePlan,
    linearize_update,
    verify_bundle,
    InvariantViolation,
)

from util import OpThread, run_all


class Box:
    """Stand-in node: anything with a key attribute."""

    def __init__(self, key):
        self.key = key


def test_clock_starts_at_zero_and_counts_updates():
    clock = GlobalClock()
    assert clock.read() == 0
    for expected in (1, 2, 3, 4):
        assert clock.update_ts() == expected
    assert clock.read() == 4


def test_clock_single_threaded_replay_matches_update_count():
    clock = GlobalClock()
    k = 137
    for _ in range(k):
        clock.update_ts()
    assert clock.read() == k


def test_clock_values_unique_under_contention():
    clock = GlobalClock()
    per_thread = 500
    results = [[] for _ in range(8)]

    def bump(out):
        for _ in range(per_thread):
            out.append(clock.update_ts())

    run_all([OpThread(bump, out) for out in results])
    seen = [ts for out in results for ts in out]
    assert len(set(seen)) == len(seen)
    assert max(seen) == 8 * per_thread == clock.read()


def test_prepare_installs_pending_over_existing_head():
    bundle = Bundle()
    node30, node10 = Box(30), Box(10)
    bundle.seed(node30)
    bundle.head.ts = 2  # pretend an update stamped it earlier
    entry = bundle.prepare(node10)
    assert bundle.head is entry
    assert entry.ts == PENDING_TS and entry.target is node10
    assert entry.next.ts == 2 and entry.next.target is node30


def test_prepare_over_seed_keeps_time_zero_history():
    bundle = Bundle()
    tail = Box(2**63)
    bundle.seed(tail)
    node20 = Box(20)
    entry = bundle.prepare(node20)
    assert entry.next is not None and entry.next.ts == 0
    bundle.finalize(1)
    assert [(e.ts, e.target.key) for e in bundle.entries()] == \
        [(1, 20), (0, tail.key)]


def test_concurrent_prepare_waits_for_finalize():
    bundle = Bundle()
    bundle.seed(Box(99))
    first = bundle.prepare(Box(1))
    second = OpThread(bundle.prepare, Box(2))
    second.start()
    second.join(0.2)
    assert second.is_alive(), "second prepare must wait on the pending head"
    bundle.finalize(5)
    entry2 = second.join_checked()
    bundle.finalize(6)
    assert bundle.head is entry2
    assert [e.ts for e in bundle.entries()] == [6, 5, 0]
    assert first.ts == 5


def test_finalize_requires_pending_head():
    bundle = Bundle()
    bundle.seed(Box(1))
    with pytest.raises(AssertionError):
        bundle.finalize(3)


def test_dereference_picks_newest_satisfying_entry():
    # Chain mirroring the removed-node predecessor in the worked example:
    # (4 -> 30) over (3 -> 20).
    node30, node20 = Box(30), Box(20)
    bundle = Bundle()
    bundle.head = BundleEntry(node30, 4, BundleEntry(node20, 3))
    assert bundle.dereference(3) == (node20, True)
    assert bundle.dereference(4) == (node30, True)
    assert bundle.dereference(10) == (node30, True)
    target, found = bundle.dereference(2)
    assert (target, found) == (None, False)


def test_dereference_matches_linear_scan_oracle():
    rng = random.Random(7)
    for _ in range(200):
        stamps = sorted(rng.sample(range(100), rng.randint(1, 12)))
        targets = [Box(ts) for ts in stamps]
        bundle = Bundle()
        for ts, box in zip(stamps, targets):
            entry = bundle.prepare(box)
            entry.ts = ts  # direct stamp: building an arbitrary history
        for query in range(101):
            best = None
            for ts, box in zip(stamps, targets):
                if ts <= query:
                    best = box
            got, found = bundle.dereference(query)
            assert found == (best is not None)
            assert got is best or (got is None and best is None)


def test_dereference_waits_out_pending_head():
    bundle = Bundle()
    bundle.seed(Box(7))
    bundle.head.ts = 1
    bundle.prepare(Box(8))
    reader = OpThread(bundle.dereference, 2)
    reader.start()
    reader.join(0.2)
    assert reader.is_alive(), "reader must wait for finalize"
    bundle.finalize(2)
    target, found = reader.join_checked()
    assert found and target.key == 8


def test_dereference_without_wait_skips_pending_entry():
    bundle = Bundle()
    bundle.seed(Box(7))
    bundle.head.ts = 1
    bundle.prepare(Box(8))
    target, found = bundle.dereference(2, wait=False)
    assert found and target.key == 7


def test_linearize_update_orders_steps_and_returns_ts():
    clock = GlobalClock()
    bundle_a, bundle_b = Bundle(), Bundle()
    bundle_a.seed(Box(1))
    committed = []
    ts = linearize_update(
        UpdatePlan(lambda: committed.append(clock.read()),
                   (bundle_a, bundle_b), (Box(2), Box(3))),
        clock)
    assert ts == 1
    assert committed == [1], "commit runs after the clock bump"
    assert bundle_a.head.ts == 1 and bundle_b.head.ts == 1


def test_concurrent_linearize_timestamps_unique():
    clock = GlobalClock()
    results = [[] for _ in range(6)]

    def work(out):
        for _ in range(200):
            bundle = Bundle()  # disjoint bundles: no waiting involved
            out.append(linearize_update(
                UpdatePlan(lambda: None, (bundle,), (None,)), clock))

    run_all([OpThread(work, out) for out in results])
    seen = [ts for out in results for ts in out]
    assert len(set(seen)) == len(seen)
    assert max(seen) == len(seen) == clock.read()


def test_truncate_keeps_satisfier_and_everything_newer():
    boxes = {ts: Box(ts) for ts in (1, 3, 5, 8)}
    bundle = Bundle()
    head = None
    for ts in (1, 3, 5, 8):
        head = BundleEntry(boxes[ts], ts, head)
    bundle.head = head
    dropped = bundle.truncate(5)
    assert [e.ts for e in bundle.entries()] == [8, 5]
    assert sorted(e.ts for e in dropped) == [1, 3]
    # Dereferences at or above the floor are unaffected.
    assert bundle.dereference(5)[0] is boxes[5]
    assert bundle.dereference(7)[0] is boxes[5]
    assert bundle.dereference(9)[0] is boxes[8]


def test_truncate_without_satisfier_drops_nothing():
    bundle = Bundle()
    bundle.head = BundleEntry(Box(9), 9, BundleEntry(Box(7), 7))
    assert bundle.truncate(3) == []
    assert [e.ts for e in bundle.entries()] == [9, 7]


def test_relaxed_clock_threshold_counts():
    clock = GlobalClock()
    relaxed = RelaxedClock(clock, 5)
    for _ in range(100):
        relaxed.update_ts()
    assert clock.read() == 20


def test_relaxed_clock_threshold_one_is_fully_ordered():
    clock = GlobalClock()
    relaxed = RelaxedClock(clock, 1)
    assert [relaxed.update_ts() for _ in range(4)] == [1, 2, 3, 4]


def test_relaxed_clock_infinite_never_bumps():
    clock = GlobalClock()
    relaxed = RelaxedClock(clock, float("inf"))
    for _ in range(50):
        assert relaxed.update_ts() == 0
    assert clock.read() == 0


def test_verify_bundle_flags_pending_and_misordered_chains():
    live = Box(5)
    bundle = Bundle()
    bundle.head = BundleEntry(live, 4, BundleEntry(Box(2), 6))
    with pytest.raises(InvariantViolation):
        verify_bundle(bundle, live)
    bundle2 = Bundle()
    bundle2.prepare(live)
    with pytest.raises(InvariantViolation):
        verify_bundle(bundle2, live)
    bundle3 = Bundle()
    bundle3.head = BundleEntry(live, 4, BundleEntry(Box(2), 4))
    with pytest.raises(InvariantViolation):
        verify_bundle(bundle3, live)
    verify_bundle(bundle3, live, strict_ts=False)  # relaxed clock allows ties
