"""Sorted concurrent linked list with snapshot range queries.

Lazy-list discipline: wait-free traversals over the plain ``newest_next``
links, logical deletion before physical unlink, fine-grained per-node
latches for updates (inserts latch only the predecessor). Every next-link
is backed by a Bundle so range queries can walk the list as it was at
their snapshot time.
"""

from __future__ import annotations

import threading

from .base import OrderedSetBase
from .core import Bundle, KEY_MAX, KEY_MIN, UpdatePlan, InvariantViolation, \
    linearize_update, verify_bundle


class ListNode:
    __slots__ = ("key", "val", "lock", "deleted", "newest_next",
                 "next_bundle", "freed")

    def __init__(self, key, val):
        self.key = key
        self.val = val
        self.lock = threading.Lock()
        self.deleted = False
        self.newest_next = None
        self.next_bundle = Bundle()
        self.freed = False

    def reclaim_free(self):
        self.freed = True
        self.val = None

    def __repr__(self):
        return f"<node {self.key}{' deleted' if self.deleted else ''}>"


class BundledList(OrderedSetBase):

    def __init__(self, clock=None, reclaim=None, unsafe_ranges=False):
        super().__init__(clock, reclaim, unsafe_ranges)
        self.tail = ListNode(KEY_MAX, None)
        self.head = ListNode(KEY_MIN, None)
        self.head.newest_next = self.tail
        self.head.next_bundle.seed(self.tail)
        self.stats.add_created(1)
        # The tail has no successor; its bundle stays empty and is never
        # dereferenced (every scan stops at a key below it).

    # -- traversal ---------------------------------------------------------

    def _traverse(self, key):
        """Walk newest links to (pred, curr) with pred.key < key <= curr.key."""
        pred = self.head
        curr = pred.newest_next
        while curr.key < key:
            pred = curr
            curr = curr.newest_next
        return pred, curr

    def contains(self, key) -> bool:
        self._check_key(key)
        guard = self.reclaim
        guard.guard_enter()
        try:
            _, curr = self._traverse(key)
            return curr.key == key and not curr.deleted
        finally:
            guard.guard_exit()

    # -- updates -----------------------------------------------------------

    def insert(self, key, val=None) -> bool:
        self._check_key(key)
        guard = self.reclaim
        guard.guard_enter()
        try:
            while True:
                pred, curr = self._traverse(key)
                pred.lock.acquire()
                if pred.deleted or curr.deleted or pred.newest_next is not curr:
                    pred.lock.release()
                    continue
                try:
                    if curr.key == key:
                        return False
                    node = ListNode(key, val)
                    node.newest_next = curr

                    def commit():
                        pred.newest_next = node

                    plan = UpdatePlan(commit,
                                      (node.next_bundle, pred.next_bundle),
                                      (curr, node))
                    linearize_update(plan, self.clock, self.stats, self.hooks)
                    return True
                finally:
                    pred.lock.release()
        finally:
            guard.guard_exit()

    def remove(self, key) -> bool:
        self._check_key(key)
        guard = self.reclaim
        guard.guard_enter()
        try:
            while True:
                pred, curr = self._traverse(key)
                pred.lock.acquire()
                curr.lock.acquire()
                if pred.deleted or curr.deleted or pred.newest_next is not curr:
                    curr.lock.release()
                    pred.lock.release()
                    continue
                try:
                    if curr.key != key:
                        return False
                    succ = curr.newest_next

                    def commit():
                        curr.deleted = True

                    plan = UpdatePlan(commit, (pred.next_bundle,), (succ,))
                    linearize_update(plan, self.clock, self.stats, self.hooks)
                    # Physical unlink shares the critical section with the
                    # logical delete; the bundle entry already records it.
                    pred.newest_next = succ
                    self.reclaim.retire(curr)
                    return True
                finally:
                    curr.lock.release()
                    pred.lock.release()
        finally:
            guard.guard_exit()

    # -- range hooks ---------------------------------------------------------

    def get_first_node_in_range(self, low, high, ts):
        """Two phases: newest links up to the last node below the range,
        then history entries until the first node at or past ``low``."""
        pred = self.head
        curr = pred.newest_next
        while curr.key < low:
            pred = curr
            curr = curr.newest_next
        node = pred
        wait = self.hooks.deref_wait
        while node.key < low:
            target, found = node.next_bundle.dereference(ts, wait)
            if not found:
                return None, False
            node = target
        if node.key > high:
            return None, True
        return node, True

    def get_next(self, node, low, high, ts):
        target, found = node.next_bundle.dereference(ts, self.hooks.deref_wait)
        assert found, "snapshot path broke mid-range"
        if target.key > high:
            return None
        return target

    def _range_newest(self, low, high):
        out = []
        curr = self.head.newest_next
        while curr.key < low:
            curr = curr.newest_next
        while curr.key <= high:
            if not curr.deleted:
                out.append((curr.key, curr.val))
            curr = curr.newest_next
        return out

    # -- maintenance ---------------------------------------------------------

    def _live_nodes(self):
        node = self.head
        while node is not None:
            yield node
            node = node.newest_next

    def _live_bundles(self):
        node = self.head
        tail = self.tail
        while node is not tail:
            yield node.next_bundle
            node = node.newest_next

    def live_keys(self):
        out = []
        node = self.head.newest_next
        tail = self.tail
        while node is not tail:
            if not node.deleted:
                out.append(node.key)
            node = node.newest_next
        return out

    def check_invariants(self, strict_ts=True):
        """Quiescent sweep: sortedness, no deleted nodes still linked, and
        every bundle finalized, descending, and mirroring its live link."""
        node = self.head
        entries = 0
        while node is not self.tail:
            succ = node.newest_next
            if succ is None or succ.key <= node.key:
                raise InvariantViolation(f"list order broken after {node!r}")
            if node.deleted:
                raise InvariantViolation(f"{node!r} deleted but still linked")
            if node.freed:
                raise InvariantViolation(f"{node!r} freed but still linked")
            entries += verify_bundle(node.next_bundle, succ, strict_ts,
                                     context=f"list node {node.key}")
            node = succ
        return entries
