"""Epoch reclamation, announced snapshots, and history pruning."""

import threading
import time

import pytest

from bundleset import BundledList, BundlePruner, GlobalClock, ReclaimDomain
from bundleset.core import PENDING_TS

from util import OpThread, chain_of


class Obj:
    def __init__(self):
        self.freed = False

    def reclaim_free(self):
        self.freed = True


def test_guard_nesting_is_rejected():
    domain = ReclaimDomain()
    domain.guard_enter()
    with pytest.raises(AssertionError):
        domain.guard_enter()
    domain.guard_exit()
    with pytest.raises(AssertionError):
        domain.guard_exit()


def test_enter_exit_without_retires_leaves_limbo_empty():
    domain = ReclaimDomain()
    domain.guard_enter()
    domain.guard_exit()
    assert domain.limbo_count() == 0


def test_retired_object_waits_two_epoch_advances():
    domain = ReclaimDomain()
    obj = Obj()
    epoch = domain.epoch
    domain.retire(obj)
    assert not obj.freed
    assert domain.try_advance()
    domain.retire(Obj())  # triggers a reap attempt on this thread
    assert not obj.freed, f"freed after one advance past epoch {epoch}"
    assert domain.try_advance()
    domain.retire(Obj())
    assert obj.freed, "two advances past retirement must free"


def test_drain_frees_everything_when_quiescent():
    domain = ReclaimDomain()
    objs = [Obj() for _ in range(10)]
    for o in objs:
        domain.retire(o)
    freed = domain.drain()
    assert freed == 10 and all(o.freed for o in objs)


def test_thread_stalled_in_guard_blocks_second_advance():
    domain = ReclaimDomain()
    entered = threading.Event()
    release = threading.Event()

    def stall():
        domain.guard_enter()
        entered.set()
        release.wait(10)
        domain.guard_exit()

    t = OpThread(stall)
    t.start()
    entered.wait(5)
    assert domain.try_advance()          # stalled thread announced this epoch
    assert not domain.try_advance()      # but blocks any further advance
    obj = Obj()
    domain.retire(obj)
    assert domain.drain() == 0 and not obj.freed
    release.set()
    t.join_checked()
    domain.drain()
    assert obj.freed


def test_leaky_mode_drops_retired_objects():
    domain = ReclaimDomain(enabled=False)
    obj = Obj()
    domain.retire(obj)
    domain.drain()
    assert not obj.freed and domain.limbo_count() == 0


def test_synchronize_waits_for_active_guards():
    domain = ReclaimDomain()
    entered = threading.Event()
    release = threading.Event()

    def reader():
        domain.guard_enter()
        entered.set()
        release.wait(10)
        domain.guard_exit()

    reader_t = OpThread(reader)
    reader_t.start()
    entered.wait(5)
    sync_t = OpThread(domain.synchronize)
    sync_t.start()
    sync_t.join(0.2)
    assert sync_t.is_alive(), "synchronize must wait for the reader"
    release.set()
    reader_t.join_checked()
    sync_t.join_checked()


def test_rq_announce_publishes_clock_value():
    domain = ReclaimDomain()
    clock = GlobalClock()
    for _ in range(7):
        clock.update_ts()
    assert domain.rq_announce(clock) == 7
    assert domain.min_active_ts(clock) == 7
    domain.rq_finish()
    assert domain.min_active_ts(clock) == 7  # falls back to the clock


def test_min_active_ts_waits_for_pending_announcement():
    domain = ReclaimDomain()
    clock = GlobalClock()
    clock.update_ts()  # -> 1
    slot = domain._slot()
    slot.rq_ts = PENDING_TS  # announcing thread frozen mid-publish

    got = []
    scanner = OpThread(lambda: got.append(domain.min_active_ts(clock)))
    scanner.start()
    scanner.join(0.2)
    assert scanner.is_alive(), "scan must wait out the pending slot"
    slot.rq_ts = 1
    scanner.join_checked()
    assert got == [1]
    domain.rq_finish()


def test_prune_floor_ordering_never_outruns_new_announcements():
    # The floor is read from the clock before the slot scan, so a query
    # announcing afterwards can only observe an equal or newer timestamp.
    domain = ReclaimDomain()
    clock = GlobalClock()
    clock.update_ts()
    floor = domain.min_active_ts(clock)
    clock.update_ts()
    assert domain.rq_announce(clock) >= floor
    domain.rq_finish()


def build_example_list(reclaim=None):
    ds = BundledList(reclaim=reclaim)
    ds.insert(20, 200)
    ds.insert(30, 300)
    ds.insert(10, 100)
    ds.remove(20)
    return ds


def test_prune_at_latest_ts_leaves_single_entries():
    ds = build_example_list()
    recycled = ds.prune_bundles(4)
    # head(3), node10(2), node30(1) chains shrink to one entry each.
    assert recycled == 3
    assert all(sum(1 for _ in b.entries()) == 1 for b in ds._live_bundles())
    assert sorted(ds.range_query(1, 100)) == [(10, 100), (30, 300)]
    ds.check_invariants()


def test_prune_keeps_satisfier_for_older_reader():
    ds = build_example_list()
    node10 = ds.head.newest_next
    assert node10.key == 10
    assert chain_of(node10.next_bundle) == [(4, 30), (3, 20)]
    ds.prune_bundles(3)
    # Entry 3 still satisfies a reader at ts 3; nothing to drop there.
    assert chain_of(node10.next_bundle) == [(4, 30), (3, 20)]
    assert sorted(ds.snapshot_at(1, 100, 3)) == \
        [(10, 100), (20, 200), (30, 300)]


def test_prune_empty_structure_recycles_nothing():
    ds = BundledList()
    assert ds.prune_bundles(0) == 0


def test_prune_preserves_dereference_for_all_active_ts():
    ds = build_example_list()
    floor = 2
    before = {ts: sorted(ds.snapshot_at(1, 100, ts)) for ts in range(floor, 5)}
    ds.prune_bundles(floor)
    for ts, want in before.items():
        assert sorted(ds.snapshot_at(1, 100, ts)) == want


def test_pruner_pass_truncates_and_retires_entries():
    domain = ReclaimDomain()
    ds = build_example_list(reclaim=domain)
    pruner = BundlePruner(domain, ds.clock, [ds], delay_s=0.001)
    recycled = pruner.run_pass()
    assert recycled == 3
    assert ds.stats.entries_recycled == 3
    assert domain.retired_count() >= 3 + 1  # entries plus the removed node
    domain.drain()
    assert domain.freed_count() == domain.retired_count()


def test_background_pruner_reaches_single_entry_steady_state():
    domain = ReclaimDomain()
    ds = build_example_list(reclaim=domain)
    pruner = BundlePruner(domain, ds.clock, [ds], delay_s=0.0).start()
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline:
        if all(sum(1 for _ in b.entries()) == 1 for b in ds._live_bundles()):
            break
        time.sleep(0.01)
    pruner.stop()
    assert all(sum(1 for _ in b.entries()) == 1 for b in ds._live_bundles())
    assert pruner.passes > 0


def test_removed_node_not_freed_while_old_reader_active():
    domain = ReclaimDomain()
    ds = BundledList(reclaim=domain)
    ds.insert(10)
    ds.insert(20)
    ds.insert(30)
    in_guard = threading.Event()
    release = threading.Event()
    seen = []

    def old_reader():
        domain.guard_enter()
        ts = domain.rq_announce(ds.clock)
        in_guard.set()
        release.wait(10)
        seen.append(sorted(ds._collect(1, 100, ts)))
        domain.rq_finish()
        domain.guard_exit()

    reader = OpThread(old_reader)
    reader.start()
    in_guard.wait(5)
    assert ds.remove(20)
    node20_gone = [n for n in ds._live_nodes() if n.key == 20] == []
    assert node20_gone
    for _ in range(6):
        domain.try_advance()
    domain.drain()
    # The reader's guard pins the epoch: the node must still be intact.
    assert domain.freed_count() == 0
    release.set()
    reader.join_checked()
    assert seen == [[(10, None), (20, None), (30, None)]]
    domain.drain()
    assert domain.freed_count() == 1


@pytest.mark.parametrize("enabled", [False, True])
@pytest.mark.parametrize("name", ["list", "skiplist", "bst"])
def test_announced_scans_never_lose_their_path(name, enabled):
    # Once a scan's entry phase succeeds, every later step must resolve
    # (asserted inside the scan) even while a zero-delay pruner truncates
    # histories and retired nodes are being freed.
    from bundleset import STRUCTURES
    domain = ReclaimDomain(enabled=enabled)
    ds = STRUCTURES[name](reclaim=domain)
    for k in range(1, 129):
        ds.insert(k, k)
    pruner = None
    if enabled:
        pruner = BundlePruner(domain, ds.clock, [ds], delay_s=0.0).start()

    import random as _random

    def churn(seed):
        rng = _random.Random(seed)
        for _ in range(600):
            key = rng.randint(1, 128)
            roll = rng.random()
            if roll < 0.3:
                ds.insert(key, key)
            elif roll < 0.6:
                ds.remove(key)
            else:
                low = rng.randint(1, 128)
                result = ds.range_query(low, low + rng.randint(0, 32))
                assert all(v is not None for _, v in result), \
                    "scan returned a poisoned node"

    threads = [OpThread(churn, 100 + s) for s in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join_checked()
    if pruner is not None:
        pruner.stop()
    domain.drain()
    ds.check_invariants()


def test_retire_with_reclaim_disabled_keeps_full_history():
    ds = BundledList()  # leaky default
    states = {0: []}
    model = {}
    for k in range(1, 51):
        ds.insert(k, k)
        model[k] = k
        states[ds.clock.read()] = sorted(model.items())
    for k in range(1, 51, 2):
        ds.remove(k)
        del model[k]
        states[ds.clock.read()] = sorted(model.items())
    # Nothing pruned, nothing freed: every snapshot ever taken remains
    # answerable through the retained history.
    for ts, want in states.items():
        assert sorted(ds.snapshot_at(1, 100, ts)) == want
