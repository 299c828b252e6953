"""Epoch-based deferred reclamation and history pruning.

A ReclaimDomain tracks, per thread, whether the thread is inside a
data-structure operation (a guard), which epoch it last announced, a limbo
list of retired objects, and the announced snapshot timestamp of an
in-flight range query. Retired objects are freed only after the global
epoch has advanced twice past their retirement epoch, which cannot happen
while any guard that could still reach them is active.

Guard tracking is always on: besides gating frees it doubles as the
read-side critical section that tree removals wait out (``synchronize``).
``enabled`` gates only retirement and freeing; disabled is the leaky mode
used as the benchmarking baseline, where retired objects are simply
dropped.
"""

from __future__ import annotations

import threading
from collections import deque

from .core import PENDING_TS, _wait_step

# Slot value when the thread has no announced range query.
IDLE = -1

# How many retirements between opportunistic epoch-advance attempts.
ADVANCE_EVERY = 64


class _ThreadSlot:
    __slots__ = ("quiescent", "announced", "rq_ts", "limbo", "retired", "freed")

    def __init__(self):
        self.quiescent = True
        self.announced = 0
        self.rq_ts = IDLE
        self.limbo = deque()
        self.retired = 0
        self.freed = 0


class ReclaimDomain:
    """Shared reclamation state for one structure (or one benchmark run)."""

    def __init__(self, enabled=True):
        self.enabled = enabled
        self._epoch = 0
        self._advance_lock = threading.Lock()
        self._slots = []
        self._register_lock = threading.Lock()
        self._tls = threading.local()

    @property
    def epoch(self):
        return self._epoch

    def _slot(self):
        slot = getattr(self._tls, "slot", None)
        if slot is None:
            slot = _ThreadSlot()
            with self._register_lock:
                self._slots.append(slot)
            self._tls.slot = slot
        return slot

    # -- guards ---------------------------------------------------------

    def guard_enter(self):
        """Announce the current epoch; brackets every structure operation."""
        slot = self._slot()
        assert slot.quiescent, "operation guards do not nest"
        slot.quiescent = False
        slot.announced = self._epoch

    def guard_exit(self):
        slot = self._slot()
        assert not slot.quiescent, "guard_exit without a matching guard_enter"
        slot.quiescent = True

    # -- retirement -----------------------------------------------------

    def retire(self, obj):
        """Defer freeing ``obj`` (already unlinked) for two epoch advances.

        With reclamation disabled the object is dropped and intentionally
        leaks into whatever history chains still reference it.
        """
        if not self.enabled:
            return
        slot = self._slot()
        slot.limbo.append((self._epoch, obj))
        slot.retired += 1
        if slot.retired % ADVANCE_EVERY == 0:
            self.try_advance()
        self._reap(slot)

    def try_advance(self):
        """Advance the epoch if every non-quiescent thread has announced it."""
        with self._advance_lock:
            epoch = self._epoch
            for slot in tuple(self._slots):
                if not slot.quiescent and slot.announced != epoch:
                    return False
            self._epoch = epoch + 1
            return True

    def _reap(self, slot):
        limit = self._epoch - 2
        limbo = slot.limbo
        while limbo and limbo[0][0] <= limit:
            _, obj = limbo.popleft()
            obj.reclaim_free()
            slot.freed += 1

    def synchronize(self):
        """Block until every guard active at the call has been exited.

        Two epoch advances guarantee that: the first can pass threads that
        already announced the current epoch, the second cannot complete
        until they have left (or re-entered, which is just as good). The
        caller must not hold a guard itself, and must not be awaited by
        any in-guard thread.
        """
        target = self._epoch + 2
        spins = 0
        while self._epoch < target:
            if not self.try_advance():
                spins = _wait_step(spins)

    def drain(self):
        """Advance twice and reap every limbo list; returns objects freed.

        Only sound when all worker threads are quiescent or joined.
        """
        self.try_advance()
        self.try_advance()
        freed = 0
        for slot in tuple(self._slots):
            before = slot.freed
            self._reap(slot)
            freed += slot.freed - before
        return freed

    # -- announced range queries ----------------------------------------

    def rq_announce(self, clock):
        """Publish a range query's snapshot timestamp and return it.

        The slot goes through a pending state around the clock read so a
        concurrent pruning pass can never compute its floor from a scan
        that misses this query.
        """
        slot = self._slot()
        slot.rq_ts = PENDING_TS
        ts = clock.read()
        slot.rq_ts = ts
        return ts

    def rq_finish(self):
        self._slot().rq_ts = IDLE

    def min_active_ts(self, clock):
        """Lower bound on every active range query's snapshot timestamp.

        The clock is read before the scan: a query announcing afterwards
        is guaranteed a timestamp at least this large, so pruning against
        the returned floor can never cut an entry it will need.
        """
        floor = clock.read()
        for slot in tuple(self._slots):
            value = slot.rq_ts
            spins = 0
            while value == PENDING_TS:
                spins = _wait_step(spins)
                value = slot.rq_ts
            if value != IDLE and value < floor:
                floor = value
        return floor

    # -- introspection ---------------------------------------------------

    def freed_count(self):
        return sum(slot.freed for slot in tuple(self._slots))

    def retired_count(self):
        return sum(slot.retired for slot in tuple(self._slots))

    def limbo_count(self):
        return sum(len(slot.limbo) for slot in tuple(self._slots))


class BundlePruner:
    """Background thread that truncates history chains down to what the
    oldest announced snapshot still needs."""

    def __init__(self, domain, clock, structures, delay_s=0.0):
        self.domain = domain
        self.clock = clock
        self.structures = list(structures)
        self.delay_s = delay_s
        self.passes = 0
        self.recycled = 0
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True,
                                        name="bundle-pruner")

    def start(self):
        self._thread.start()
        return self

    def stop(self, timeout=10.0):
        self._stop.set()
        if self._thread.is_alive():
            self._thread.join(timeout)

    def run_pass(self):
        """One pruning sweep over every registered structure."""
        domain = self.domain
        domain.guard_enter()
        try:
            floor = domain.min_active_ts(self.clock)
            recycled = 0
            for structure in self.structures:
                recycled += structure.prune_bundles(floor)
        finally:
            domain.guard_exit()
        domain.try_advance()
        self.passes += 1
        self.recycled += recycled
        return recycled

    def _run(self):
        import time as _time
        while not self._stop.is_set():
            self.run_pass()
            if self.delay_s > 0:
                self._stop.wait(self.delay_s)
            else:
                _time.sleep(0)
