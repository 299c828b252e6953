"""Shared surface of the bundled ordered sets.

Concrete structures provide the primitive operations plus two range hooks:
``get_first_node_in_range`` (enter the range along the snapshot path) and
``get_next`` (advance strictly through history entries). This base supplies
key validation, the guarded announce/retry range-query loop, the unsafe
(newest-links-only) range variant, and the pruning/sweep plumbing.
"""

from __future__ import annotations

import threading

from .core import GlobalClock, KEY_MAX, KEY_MIN, TestHooks
from .reclaim import ReclaimDomain


class Stats:
    """History-entry accounting for space-bound and pruning checks."""

    def __init__(self):
        self._lock = threading.Lock()
        self.entries_created = 0
        self.entries_recycled = 0

    def add_created(self, n):
        with self._lock:
            self.entries_created += n

    def add_recycled(self, n):
        with self._lock:
            self.entries_recycled += n


class OrderedSetBase:
    """Common state and the snapshot range-query driver."""

    def __init__(self, clock=None, reclaim=None, unsafe_ranges=False):
        self.clock = clock if clock is not None else GlobalClock()
        self.reclaim = reclaim if reclaim is not None else ReclaimDomain(enabled=False)
        self.unsafe_ranges = unsafe_ranges
        self.stats = Stats()
        self.hooks = TestHooks()
        # Tests may point this at a one-cell list to count range-scan visits.
        self.visit_counter = None

    @staticmethod
    def _check_key(key):
        if not isinstance(key, int) or isinstance(key, bool) \
                or not KEY_MIN < key < KEY_MAX:
            raise ValueError(
                f"key must be an int strictly between {KEY_MIN} and {KEY_MAX}"
            )

    # -- range queries ----------------------------------------------------

    def range_query(self, low, high):
        """All (key, value) pairs with low <= key <= high, as of the moment
        the clock was read. Retries with a fresh snapshot whenever the
        optimistic entry phase lands on history newer than the snapshot."""
        if low > high:
            raise ValueError("low must be <= high")
        low = max(low, KEY_MIN + 1)
        high = min(high, KEY_MAX - 1)
        guard = self.reclaim
        guard.guard_enter()
        try:
            if self.unsafe_ranges:
                return self._range_newest(low, high)
            while True:
                ts = guard.rq_announce(self.clock)
                try:
                    out = self._collect(low, high, ts)
                finally:
                    guard.rq_finish()
                if out is not None:
                    return out
        finally:
            guard.guard_exit()

    def snapshot_at(self, low, high, ts):
        """Collect [low, high] as of logical time ``ts``.

        Testing aid: callers must pick a reachable timestamp and rule out
        pruning of the needed history; unlike ``range_query`` there is no
        fresh-snapshot retry to fall back on.
        """
        low = max(low, KEY_MIN + 1)
        high = min(high, KEY_MAX - 1)
        guard = self.reclaim
        guard.guard_enter()
        try:
            out = self._collect(low, high, ts)
        finally:
            guard.guard_exit()
        if out is None:
            raise ValueError(f"history at ts={ts} is not reachable from the "
                             f"current entry path")
        return out

    def _collect(self, low, high, ts):
        """One snapshot scan attempt; None means restart with a fresh ts."""
        node, valid = self.get_first_node_in_range(low, high, ts)
        if not valid:
            return None
        out = []
        counter = self.visit_counter
        while node is not None:
            assert not node.freed, "range scan reached a reclaimed node"
            out.append((node.key, node.val))
            node = self.get_next(node, low, high, ts)
            if counter is not None:
                counter[0] += 1
        return out

    # -- maintenance -------------------------------------------------------

    def prune_bundles(self, floor):
        """Truncate every live bundle past the newest entry with ts <= floor.

        Dropped entries are retired through the reclamation domain, never
        freed inline. Returns the number of entries recycled.
        """
        recycled = 0
        retire = self.reclaim.retire
        for bundle in self._live_bundles():
            dropped = bundle.truncate(floor)
            for entry in dropped:
                retire(entry)
            recycled += len(dropped)
        if recycled:
            self.stats.add_recycled(recycled)
        return recycled

    def count_entries(self):
        """Total history entries currently chained in live bundles."""
        return sum(sum(1 for _ in b.entries()) for b in self._live_bundles())

    def count_keys(self):
        return len(self.live_keys())

    # -- to be provided by the concrete structures -------------------------

    def get_first_node_in_range(self, low, high, ts):
        raise NotImplementedError

    def get_next(self, node, low, high, ts):
        raise NotImplementedError

    def _range_newest(self, low, high):
        raise NotImplementedError

    def _live_bundles(self):
        raise NotImplementedError

    def live_keys(self):
        raise NotImplementedError

    def check_invariants(self, strict_ts=True):
        raise NotImplementedError
