"""Concurrent skip list with snapshot range queries.

Lazy skip-list discipline: wait-free traversals, per-node latches, inserts
linearized by the full-linked flag and removals by the logical delete.
Only the bottom (data) layer carries history bundles; the probabilistic
index layers are plain accelerators and never affect what a snapshot scan
returns.
"""

from __future__ import annotations

import random
import threading

from .base import OrderedSetBase
from .core import Bundle, KEY_MAX, KEY_MIN, UpdatePlan, InvariantViolation, \
    _wait_step, linearize_update, verify_bundle

MAX_LEVEL = 20  # geometric levels, p = 1/2


class SkipNode:
    __slots__ = ("key", "val", "lock", "deleted", "fully_linked",
                 "top_level", "nexts", "data_bundle", "freed")

    def __init__(self, key, val, top_level):
        self.key = key
        self.val = val
        self.lock = threading.Lock()
        self.deleted = False
        self.fully_linked = False
        self.top_level = top_level
        self.nexts = [None] * (top_level + 1)
        self.data_bundle = Bundle()
        self.freed = False

    def reclaim_free(self):
        self.freed = True
        self.val = None

    def __repr__(self):
        return f"<skipnode {self.key} lvl={self.top_level}>"


class BundledSkipList(OrderedSetBase):

    def __init__(self, clock=None, reclaim=None, unsafe_ranges=False,
                 level_seed=0):
        super().__init__(clock, reclaim, unsafe_ranges)
        self.tail = SkipNode(KEY_MAX, None, MAX_LEVEL - 1)
        self.head = SkipNode(KEY_MIN, None, MAX_LEVEL - 1)
        for lv in range(MAX_LEVEL):
            self.head.nexts[lv] = self.tail
        self.head.fully_linked = True
        self.tail.fully_linked = True
        self.head.data_bundle.seed(self.tail)
        self.stats.add_created(1)
        self._level_rng = random.Random(level_seed)

    def _random_level(self):
        bits = self._level_rng.getrandbits(MAX_LEVEL - 1)
        level = 0
        while bits & 1:
            level += 1
            bits >>= 1
        return level

    # -- traversal ---------------------------------------------------------

    def _find(self, key):
        """Predecessors and successors of ``key`` at every level, plus the
        highest level where the key itself was found (-1 if absent)."""
        preds = [None] * MAX_LEVEL
        succs = [None] * MAX_LEVEL
        found = -1
        pred = self.head
        for lv in range(MAX_LEVEL - 1, -1, -1):
            curr = pred.nexts[lv]
            while curr.key < key:
                pred = curr
                curr = pred.nexts[lv]
            if found == -1 and curr.key == key:
                found = lv
            preds[lv] = pred
            succs[lv] = curr
        return preds, succs, found

    def contains(self, key) -> bool:
        self._check_key(key)
        guard = self.reclaim
        guard.guard_enter()
        try:
            pred = self.head
            curr = None
            for lv in range(MAX_LEVEL - 1, -1, -1):
                curr = pred.nexts[lv]
                while curr.key < key:
                    pred = curr
                    curr = pred.nexts[lv]
                if curr.key == key:
                    return curr.fully_linked and not curr.deleted
            return False
        finally:
            guard.guard_exit()

    # -- updates -----------------------------------------------------------

    def insert(self, key, val=None) -> bool:
        self._check_key(key)
        top = self._random_level()
        guard = self.reclaim
        guard.guard_enter()
        try:
            while True:
                preds, succs, found = self._find(key)
                if found != -1:
                    node = succs[found]
                    if not node.deleted:
                        # An in-flight insert of the same key wins; report
                        # the duplicate only once it is visible.
                        spins = 0
                        while not node.fully_linked:
                            spins = _wait_step(spins)
                        return False
                    continue  # being removed; retry until unlinked
                locked = []
                valid = True
                prev = None
                try:
                    for lv in range(top + 1):
                        pred = preds[lv]
                        succ = succs[lv]
                        if pred is not prev:
                            pred.lock.acquire()
                            locked.append(pred)
                            prev = pred
                        if pred.deleted or succ.deleted \
                                or pred.nexts[lv] is not succ:
                            valid = False
                            break
                    if not valid:
                        continue
                    node = SkipNode(key, val, top)
                    for lv in range(top + 1):
                        node.nexts[lv] = succs[lv]

                    def commit():
                        # Linking is deferred to the linearization step so
                        # the node only becomes reachable with its pending
                        # entry already installed; anyone latching it then
                        # waits out the finalize instead of extending an
                        # empty history out of order.
                        for lv in range(top + 1):
                            preds[lv].nexts[lv] = node
                        node.fully_linked = True

                    plan = UpdatePlan(commit,
                                      (node.data_bundle, preds[0].data_bundle),
                                      (succs[0], node))
                    linearize_update(plan, self.clock, self.stats, self.hooks)
                    return True
                finally:
                    for n in reversed(locked):
                        n.lock.release()
        finally:
            guard.guard_exit()

    def remove(self, key) -> bool:
        self._check_key(key)
        guard = self.reclaim
        guard.guard_enter()
        try:
            while True:
                preds, succs, found = self._find(key)
                if found == -1:
                    return False
                victim = succs[found]
                if not victim.fully_linked or victim.top_level != found \
                        or victim.deleted:
                    return False
                victim.lock.acquire()
                if victim.deleted:
                    victim.lock.release()
                    return False
                top = victim.top_level
                locked = []
                valid = True
                prev = None
                for lv in range(top + 1):
                    pred = preds[lv]
                    if pred is not prev:
                        pred.lock.acquire()
                        locked.append(pred)
                        prev = pred
                    if pred.deleted or pred.nexts[lv] is not victim:
                        valid = False
                        break
                if not valid:
                    for n in reversed(locked):
                        n.lock.release()
                    victim.lock.release()
                    continue
                try:
                    def commit():
                        victim.deleted = True

                    plan = UpdatePlan(commit, (preds[0].data_bundle,),
                                      (victim.nexts[0],))
                    linearize_update(plan, self.clock, self.stats, self.hooks)
                    for lv in range(top, -1, -1):
                        preds[lv].nexts[lv] = victim.nexts[lv]
                    self.reclaim.retire(victim)
                    return True
                finally:
                    for n in reversed(locked):
                        n.lock.release()
                    victim.lock.release()
        finally:
            guard.guard_exit()

    # -- range hooks ---------------------------------------------------------

    def get_first_node_in_range(self, low, high, ts):
        """Index layers take us to the data-layer predecessor of ``low``;
        from there the entry walk matches the linked list's."""
        pred = self.head
        for lv in range(MAX_LEVEL - 1, -1, -1):
            curr = pred.nexts[lv]
            while curr.key < low:
                pred = curr
                curr = pred.nexts[lv]
        node = pred
        wait = self.hooks.deref_wait
        while node.key < low:
            target, found = node.data_bundle.dereference(ts, wait)
            if not found:
                return None, False
            node = target
        if node.key > high:
            return None, True
        return node, True

    def get_next(self, node, low, high, ts):
        target, found = node.data_bundle.dereference(ts, self.hooks.deref_wait)
        assert found, "snapshot path broke mid-range"
        if target.key > high:
            return None
        return target

    def _range_newest(self, low, high):
        pred = self.head
        for lv in range(MAX_LEVEL - 1, -1, -1):
            curr = pred.nexts[lv]
            while curr.key < low:
                pred = curr
                curr = pred.nexts[lv]
        out = []
        curr = pred.nexts[0]
        while curr.key <= high:
            if not curr.deleted and curr.fully_linked:
                out.append((curr.key, curr.val))
            curr = curr.nexts[0]
        return out

    # -- maintenance ---------------------------------------------------------

    def _live_bundles(self):
        node = self.head
        tail = self.tail
        while node is not tail:
            yield node.data_bundle
            node = node.nexts[0]

    def live_keys(self):
        out = []
        node = self.head.nexts[0]
        tail = self.tail
        while node is not tail:
            if not node.deleted:
                out.append(node.key)
            node = node.nexts[0]
        return out

    def check_invariants(self, strict_ts=True):
        """Quiescent sweep: data-layer order and bundle coherence, index
        layers sorted and a sub-path of the data layer."""
        node = self.head
        entries = 0
        data_nodes = set()
        while node is not self.tail:
            succ = node.nexts[0]
            if succ is None or succ.key <= node.key:
                raise InvariantViolation(f"data layer order broken at {node!r}")
            if node.deleted or not node.fully_linked:
                raise InvariantViolation(f"{node!r} not cleanly linked")
            if node.freed:
                raise InvariantViolation(f"{node!r} freed but still linked")
            entries += verify_bundle(node.data_bundle, succ, strict_ts,
                                     context=f"skiplist node {node.key}")
            data_nodes.add(id(node))
            node = succ
        data_nodes.add(id(self.tail))
        for lv in range(1, MAX_LEVEL):
            node = self.head
            while node is not self.tail:
                if lv > node.top_level:
                    raise InvariantViolation(f"{node!r} linked above its level")
                succ = node.nexts[lv]
                if succ.key <= node.key:
                    raise InvariantViolation(f"index order broken at level {lv}")
                if id(succ) not in data_nodes:
                    raise InvariantViolation(
                        f"index level {lv} points at an unlinked node")
                node = succ
        return entries
