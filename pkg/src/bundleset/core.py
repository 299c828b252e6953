"""Timestamped link histories and the update protocol that maintains them.

Every structural link in the ordered sets of this package is backed by a
Bundle: a newest-first chain of (target, timestamp) entries recording the
link's present and past values. Successful updates run a four-step protocol
(install pending entries, bump the shared clock, perform the linearization
write, stamp the entries) so that a reader holding a snapshot timestamp can
rebuild the exact value of every link at that time. A link is resolved at
time ``ts`` by taking the newest entry whose timestamp does not exceed
``ts``, first waiting out an entry that is still pending finalization.

Nothing in this module knows about a particular data structure; per-node
mutual exclusion is the owning structure's job.
"""

from __future__ import annotations

import threading
import time

# Reserved sentinel for entries installed but not yet stamped. Using the
# maximum representable value means a pending entry can never satisfy a
# snapshot test (ts <= query) by accident.
PENDING_TS = 2**64 - 1

# Sentinel keys. User keys must lie strictly between them.
KEY_MIN = 0
KEY_MAX = 2**64 - 1


class InvariantViolation(AssertionError):
    """A structural or history invariant failed a quiescent check."""


def _wait_step(spins: int) -> int:
    """One step of a bounded wait on another thread's imminent progress.

    Pending entries are finalized a few instructions after they appear, so
    spin briefly, then yield so the finalizing thread can run.
    """
    if spins < 4:
        pass
    elif spins < 64:
        time.sleep(0)
    else:
        time.sleep(0.00005)
    return spins + 1


class BundleEntry:
    """One historical value of a link: target node, timestamp, older entry."""

    __slots__ = ("target", "ts", "next", "freed")

    def __init__(self, target, ts, nxt=None):
        self.target = target
        self.ts = ts
        self.next = nxt
        self.freed = False

    def reclaim_free(self):
        self.freed = True

    def __repr__(self):
        ts = "PENDING" if self.ts == PENDING_TS else self.ts
        tgt = getattr(self.target, "key", self.target)
        return f"<entry ts={ts} -> {tgt}>"


class Bundle:
    """Newest-first history of one structural link.

    Installs and truncations are serialized by a short per-bundle mutex
    standing in for a head compare-and-swap; waits always happen outside
    it so the thread being waited on is never blocked by the waiter.
    """

    __slots__ = ("head", "_lock")

    def __init__(self):
        self.head = None
        self._lock = threading.Lock()

    def seed(self, target):
        """Install the initial entry at logical time zero."""
        self.head = BundleEntry(target, 0)

    def prepare(self, target, wait=True):
        """Install a pending entry recording ``target`` as the link's next value.

        Blocks while the current head is itself pending: two in-flight
        updates to the same link must stamp their entries in install order
        or the chain's timestamps would interleave. ``wait=False`` is a
        test-only toggle that installs over a pending head regardless.
        """
        entry = BundleEntry(target, PENDING_TS)
        lock = self._lock
        spins = 0
        while True:
            with lock:
                head = self.head
                if head is None or head.ts != PENDING_TS or not wait:
                    entry.next = head
                    self.head = entry
                    return entry
            spins = _wait_step(spins)

    def finalize(self, ts):
        """Stamp the pending head entry with the update's timestamp."""
        head = self.head
        assert head is not None and head.ts == PENDING_TS, (
            "finalize expects the pending entry installed by this update "
            "to still be at the head"
        )
        head.ts = ts

    def dereference(self, ts, wait=True):
        """Resolve the link at logical time ``ts``.

        Returns ``(target, True)`` for the newest entry with timestamp
        <= ts, or ``(None, False)`` when the entire recorded history is
        newer than ts (the caller's traversal is invalid and must restart).
        A pending head is waited out first; with waiting disabled (test
        toggle) its sentinel timestamp simply fails the <= test.
        """
        entry = self.head
        if wait:
            spins = 0
            while entry is not None and entry.ts == PENDING_TS:
                spins = _wait_step(spins)
        while entry is not None and entry.ts > ts:
            entry = entry.next
        if entry is None:
            return None, False
        assert not entry.freed, "dereferenced a reclaimed history entry"
        return entry.target, True

    def truncate(self, floor):
        """Drop entries no reader announced at time >= ``floor`` can need.

        Keeps the newest entry with timestamp <= floor plus everything
        newer, unlinks the rest, and returns the dropped entries for
        retirement (they must not be freed inline: a reader may still be
        walking them).
        """
        with self._lock:
            entry = self.head
            if entry is None:
                return []
            while entry.ts > floor and entry.next is not None:
                entry = entry.next
            cut = entry.next
            entry.next = None
        dropped = []
        while cut is not None:
            dropped.append(cut)
            cut = cut.next
        return dropped

    def entries(self):
        entry = self.head
        while entry is not None:
            yield entry
            entry = entry.next

    def __repr__(self):
        return "Bundle[" + ", ".join(repr(e) for e in self.entries()) + "]"


class GlobalClock:
    """Shared logical clock; one unique post-increment value per update."""

    __slots__ = ("_now", "_lock")

    def __init__(self):
        self._now = 0
        self._lock = threading.Lock()

    def read(self) -> int:
        return self._now

    def update_ts(self) -> int:
        with self._lock:
            self._now += 1
            return self._now


class RelaxedClock:
    """Clock wrapper that bumps the shared value only on every
    ``threshold``-th successful update per thread; the updates in between
    reuse the current reading.

    threshold=1 is the fully ordered clock; float('inf') never bumps, so
    every snapshot keeps the initial timestamp. Anything above 1 weakens
    range-query freshness: history chains may then carry equal timestamps,
    and the newest matching entry still wins on a dereference.
    """

    def __init__(self, clock, threshold):
        if threshold != float("inf"):
            threshold = int(threshold)
            if threshold < 1:
                raise ValueError("threshold must be >= 1 or inf")
        self._clock = clock
        self._threshold = threshold
        self._local = threading.local()

    def read(self) -> int:
        return self._clock.read()

    def update_ts(self) -> int:
        threshold = self._threshold
        if threshold == 1:
            return self._clock.update_ts()
        count = getattr(self._local, "count", 0) + 1
        if count >= threshold:
            self._local.count = 0
            return self._clock.update_ts()
        self._local.count = count
        return self._clock.read()


class UpdatePlan:
    """One update's linearization recipe.

    ``commit`` performs the write that makes the operation visible (the
    linearization point); ``bundles``/``targets`` are the link histories to
    extend and the new link values they record, in matching order.
    """

    __slots__ = ("commit", "bundles", "targets")

    def __init__(self, commit, bundles, targets):
        assert len(bundles) == len(targets) and len(bundles) >= 1
        self.commit = commit
        self.bundles = bundles
        self.targets = targets


class TestHooks:
    """Pause points and wait toggles for schedule-controlled tests.

    Inert by default; the pause callables fire between protocol steps and
    the wait flags disable the pending-entry waits (negative controls).
    """

    __slots__ = ("after_prepare", "before_commit", "after_commit",
                 "prepare_wait", "deref_wait")

    def __init__(self):
        self.after_prepare = None
        self.before_commit = None
        self.after_commit = None
        self.prepare_wait = True
        self.deref_wait = True


_INERT_HOOKS = TestHooks()


def linearize_update(plan, clock, stats=None, hooks=_INERT_HOOKS):
    """Run the four-step update protocol and return its timestamp.

    1. install a pending entry on every bundle, in plan order;
    2. take the next clock value;
    3. perform the linearization write;
    4. stamp the pending entries with the new time, in plan order.

    The caller must already hold whatever latches protect the written
    locations. A reader that observed step 3 but not step 4 blocks on the
    pending entries; that wait is what keeps snapshots consistent when an
    updater stalls between the two steps.
    """
    wait = hooks.prepare_wait
    for bundle, target in zip(plan.bundles, plan.targets):
        bundle.prepare(target, wait=wait)
    if hooks.after_prepare is not None:
        hooks.after_prepare()
    ts = clock.update_ts()
    if hooks.before_commit is not None:
        hooks.before_commit()
    plan.commit()
    if hooks.after_commit is not None:
        hooks.after_commit()
    for bundle in plan.bundles:
        bundle.finalize(ts)
    if stats is not None:
        stats.add_created(len(plan.bundles))
    return ts


def verify_bundle(bundle, newest_target, strict_ts=True, context=""):
    """Quiescent checks for one bundle; returns the chain length.

    The head must be finalized and mirror the live link; timestamps must
    descend along the chain, strictly unless the clock ran relaxed.
    """
    head = bundle.head
    if head is None:
        raise InvariantViolation(f"{context}: bundle has no entries")
    if head.ts == PENDING_TS:
        raise InvariantViolation(f"{context}: pending head entry in quiescence")
    if head.target is not newest_target:
        raise InvariantViolation(
            f"{context}: head entry {head!r} does not match the live link"
        )
    count = 0
    prev = None
    for entry in bundle.entries():
        if entry.ts == PENDING_TS:
            raise InvariantViolation(f"{context}: pending entry below the head")
        if entry.freed:
            raise InvariantViolation(f"{context}: freed entry still chained")
        if prev is not None:
            if strict_ts and prev.ts <= entry.ts:
                raise InvariantViolation(
                    f"{context}: timestamps not strictly descending "
                    f"({prev.ts} then {entry.ts})"
                )
            if not strict_ts and prev.ts < entry.ts:
                raise InvariantViolation(
                    f"{context}: timestamps ascending ({prev.ts} then {entry.ts})"
                )
        prev = entry
        count += 1
    return count
