"""Concurrent unbalanced binary search tree with snapshot range queries.

Internal tree, fine-grained latches, always-leaf inserts, and
successor-replacement removal: a node with two children is replaced by a
fresh copy of its successor, so no reachable node ever moves. Both child
links of every node are backed by a Bundle. Traversals run inside epoch
guards (the read-side critical section); the removal that relocates a
successor waits out those guards before hiding the original, so a reader
already descending toward it cannot miss the key.

Per-child version tags guard the validate-after-latch pattern against a
link changing and changing back between the optimistic read and the latch.
"""

from __future__ import annotations

import threading

from .base import OrderedSetBase
from .core import Bundle, KEY_MAX, UpdatePlan, InvariantViolation, \
    linearize_update, verify_bundle

LEFT = 0
RIGHT = 1


class TreeNode:
    __slots__ = ("key", "val", "lock", "deleted", "tags", "children",
                 "bundles", "freed")

    def __init__(self, key, val):
        self.key = key
        self.val = val
        self.lock = threading.Lock()
        self.deleted = False
        self.tags = [0, 0]
        self.children = [None, None]
        self.bundles = (Bundle(), Bundle())
        self.freed = False

    def reclaim_free(self):
        self.freed = True
        self.val = None

    def __repr__(self):
        return f"<treenode {self.key}{' deleted' if self.deleted else ''}>"


class BundledTree(OrderedSetBase):

    def __init__(self, clock=None, reclaim=None, unsafe_ranges=False):
        super().__init__(clock, reclaim, unsafe_ranges)
        # Sentinel root at the maximum key; the real tree hangs off its
        # left child, which removes every root special case.
        self.root = TreeNode(KEY_MAX, None)
        self.root.bundles[LEFT].seed(None)
        self.root.bundles[RIGHT].seed(None)
        self.stats.add_created(2)

    # -- traversal ---------------------------------------------------------

    def _locate(self, key):
        """Descend newest links; returns (pred, direction, tag, curr) where
        curr is the matching node or None. The tag is sampled just before
        the child read it guards."""
        pred = self.root
        direction = LEFT
        tag = pred.tags[LEFT]
        curr = pred.children[LEFT]
        while curr is not None and curr.key != key:
            pred = curr
            direction = RIGHT if key > curr.key else LEFT
            tag = pred.tags[direction]
            curr = pred.children[direction]
        return pred, direction, tag, curr

    def contains(self, key) -> bool:
        self._check_key(key)
        guard = self.reclaim
        guard.guard_enter()
        try:
            return self._locate(key)[3] is not None
        finally:
            guard.guard_exit()

    # -- updates -----------------------------------------------------------

    def insert(self, key, val=None) -> bool:
        self._check_key(key)
        guard = self.reclaim
        while True:
            guard.guard_enter()
            pred, direction, tag, curr = self._locate(key)
            guard.guard_exit()
            if curr is not None:
                return False
            pred.lock.acquire()
            try:
                if pred.deleted or pred.children[direction] is not None \
                        or pred.tags[direction] != tag:
                    continue
                node = TreeNode(key, val)

                def commit():
                    pred.children[direction] = node
                    pred.tags[direction] += 1

                # The new node's own (empty) child links join the plan so
                # they gain their time-of-birth entries under the same
                # timestamp as the link that publishes the node.
                plan = UpdatePlan(
                    commit,
                    (pred.bundles[direction], node.bundles[LEFT],
                     node.bundles[RIGHT]),
                    (node, None, None))
                linearize_update(plan, self.clock, self.stats, self.hooks)
                return True
            finally:
                pred.lock.release()

    def remove(self, key) -> bool:
        self._check_key(key)
        guard = self.reclaim
        while True:
            guard.guard_enter()
            pred, direction, tag, curr = self._locate(key)
            guard.guard_exit()
            if curr is None:
                return False
            pred.lock.acquire()
            if pred.deleted or pred.children[direction] is not curr \
                    or pred.tags[direction] != tag:
                pred.lock.release()
                continue
            curr.lock.acquire()
            if curr.deleted:
                curr.lock.release()
                pred.lock.release()
                continue
            left = curr.children[LEFT]
            right = curr.children[RIGHT]
            if left is None or right is None:
                self._remove_simple(pred, direction, curr, left, right)
            else:
                self._remove_two_children(pred, direction, curr, left, right)
            return True

    def _remove_simple(self, pred, direction, curr, left, right):
        """Zero or one child: swing the parent link past the node."""
        try:
            only = left if right is None else right

            def commit():
                pred.children[direction] = only
                pred.tags[direction] += 1

            plan = UpdatePlan(commit, (pred.bundles[direction],), (only,))
            linearize_update(plan, self.clock, self.stats, self.hooks)
            curr.deleted = True
            self.reclaim.retire(curr)
        finally:
            curr.lock.release()
            pred.lock.release()

    def _remove_two_children(self, pred, direction, curr, left, right):
        """Replace the node with a fresh copy of its successor.

        The successor's original node is unlinked afterwards; when it does
        not sit directly under the removed node that unlink re-routes its
        parent's left link, so it only happens after every traversal that
        might already be descending toward it has drained.
        """
        guard = self.reclaim
        try:
            while True:
                # Locate the successor: leftmost node of the right subtree.
                # The re-walk runs under an epoch guard (no latch waits
                # inside) and is validated after latching.
                guard.guard_enter()
                s_parent = curr
                succ = right
                child = succ.children[LEFT]
                while child is not None:
                    s_parent = succ
                    succ = child
                    child = succ.children[LEFT]
                guard.guard_exit()
                if s_parent is not curr:
                    s_parent.lock.acquire()
                succ.lock.acquire()
                ok = not succ.deleted and succ.children[LEFT] is None
                if s_parent is not curr:
                    ok = ok and not s_parent.deleted \
                        and s_parent.children[LEFT] is succ
                if ok:
                    break
                succ.lock.release()
                if s_parent is not curr:
                    s_parent.lock.release()

            copy = TreeNode(succ.key, succ.val)
            copy.lock.acquire()  # born latched; released with the rest
            succ_right = succ.children[RIGHT]
            copy.children[LEFT] = left
            copy.children[RIGHT] = right if s_parent is not curr else succ_right

            def commit():
                pred.children[direction] = copy
                pred.tags[direction] += 1

            if s_parent is not curr:
                plan = UpdatePlan(
                    commit,
                    (pred.bundles[direction], copy.bundles[LEFT],
                     copy.bundles[RIGHT], s_parent.bundles[LEFT]),
                    (copy, left, right, succ_right))
            else:
                plan = UpdatePlan(
                    commit,
                    (pred.bundles[direction], copy.bundles[LEFT],
                     copy.bundles[RIGHT]),
                    (copy, left, succ_right))
            linearize_update(plan, self.clock, self.stats, self.hooks)
            curr.deleted = True
            if s_parent is not curr:
                # Readers that entered before the copy became visible may
                # still be walking toward the original successor; they must
                # finish before its parent's link stops leading there.
                self.reclaim.synchronize()
                s_parent.children[LEFT] = succ_right
                s_parent.tags[LEFT] += 1
            succ.deleted = True
            self.reclaim.retire(curr)
            self.reclaim.retire(succ)
            copy.lock.release()
            succ.lock.release()
            if s_parent is not curr:
                s_parent.lock.release()
        finally:
            curr.lock.release()
            pred.lock.release()

    # -- range hooks ---------------------------------------------------------

    def _step(self, key, low, high):
        if key > high:
            return LEFT
        if key < low:
            return RIGHT
        return None  # in range

    def get_first_node_in_range(self, low, high, ts):
        """Descend newest links to the link whose subtree covers the range,
        then re-approach through history entries at the snapshot time. The
        returned node roots the snapshot subtree holding every result."""
        pred = self.root
        direction = LEFT
        node = pred.children[LEFT]
        while node is not None:
            step = self._step(node.key, low, high)
            if step is None:
                break
            pred = node
            direction = step
            node = pred.children[direction]
        wait = self.hooks.deref_wait
        node, found = pred.bundles[direction].dereference(ts, wait)
        if not found:
            return None, False
        while node is not None:
            step = self._step(node.key, low, high)
            if step is None:
                return node, True
            node, found = node.bundles[step].dereference(ts, wait)
            if not found:
                return None, False
        return None, True  # snapshot range empty

    def get_next(self, stack, low, high, ts):
        """Depth-first over the snapshot subtree; ``stack`` was seeded with
        the node from get_first_node_in_range. Pops a node, pushes whichever
        children can still hold range keys, and yields in-range pops."""
        while stack:
            node = stack.pop()
            key = node.key
            if key < low:
                self._push_child(stack, node, RIGHT, ts)
            elif key > high:
                self._push_child(stack, node, LEFT, ts)
            else:
                self._push_child(stack, node, LEFT, ts)
                self._push_child(stack, node, RIGHT, ts)
                return node
        return None

    def _push_child(self, stack, node, direction, ts):
        target, found = node.bundles[direction].dereference(
            ts, self.hooks.deref_wait)
        assert found, "snapshot path broke mid-range"
        if target is not None:
            stack.append(target)

    def _collect(self, low, high, ts):
        first, valid = self.get_first_node_in_range(low, high, ts)
        if not valid:
            return None
        out = []
        if first is None:
            return out
        stack = [first]
        counter = self.visit_counter
        while True:
            node = self.get_next(stack, low, high, ts)
            if node is None:
                return out
            assert not node.freed, "range scan reached a reclaimed node"
            out.append((node.key, node.val))
            if counter is not None:
                counter[0] += 1

    def _range_newest(self, low, high):
        out = []
        stack = [self.root.children[LEFT]]
        while stack:
            node = stack.pop()
            if node is None:
                continue
            key = node.key
            if key < low:
                stack.append(node.children[RIGHT])
            elif key > high:
                stack.append(node.children[LEFT])
            else:
                stack.append(node.children[LEFT])
                stack.append(node.children[RIGHT])
                out.append((key, node.val))
        return out

    # -- maintenance ---------------------------------------------------------

    def _live_nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            for child in node.children:
                if child is not None:
                    stack.append(child)

    def _live_bundles(self):
        for node in self._live_nodes():
            yield node.bundles[LEFT]
            yield node.bundles[RIGHT]

    def live_keys(self):
        out = []
        stack = [self.root.children[LEFT]]
        while stack:
            node = stack.pop()
            if node is None:
                continue
            out.append(node.key)
            stack.append(node.children[LEFT])
            stack.append(node.children[RIGHT])
        out.sort()
        return out

    def check_invariants(self, strict_ts=True):
        """Quiescent sweep: search order within inherited key bounds plus
        per-direction bundle coherence on every live node."""
        entries = 0
        stack = [(self.root, 0, KEY_MAX)]
        while stack:
            node, lo, hi = stack.pop()
            if node.deleted and node is not self.root:
                raise InvariantViolation(f"{node!r} deleted but reachable")
            if node.freed:
                raise InvariantViolation(f"{node!r} freed but reachable")
            if not lo <= node.key <= hi:
                raise InvariantViolation(
                    f"{node!r} violates search order ({lo}..{hi})")
            for direction, bundle in enumerate(node.bundles):
                child = node.children[direction]
                entries += verify_bundle(bundle, child, strict_ts,
                                         context=f"tree node {node.key}/"
                                                 f"{'LR'[direction]}")
                if child is not None:
                    if direction == LEFT:
                        stack.append((child, lo, node.key - 1))
                    else:
                        stack.append((child, node.key + 1, hi))
        return entries
