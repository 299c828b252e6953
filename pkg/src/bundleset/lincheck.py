"""Correctness harness: concurrent history recording and checking.

Records per-thread logs of set operations (insert, remove, contains, range
query) with invoke/response order markers, then searches for a sequential
order of the same operations that respects real time and the ordered-set
semantics. Also hosts the deterministic replays of the two races the
pending-entry waits exist to close, each with a negative control that
disables the wait and must fail.
"""

from __future__ import annotations

import argparse
import itertools
import random
import sys
import threading
from dataclasses import dataclass

from . import STRUCTURES
from .reclaim import ReclaimDomain

# Global order markers; one counter read per event boundary and no other
# synchronization in the recording path.
_tick = itertools.count()


@dataclass
class Event:
    tid: int
    op: str                # insert | remove | contains | rq
    args: tuple
    result: object         # bool, or frozenset of (key, value) for rq
    inv: int = 0
    res: int = 0


@dataclass
class Verdict:
    ok: bool
    explored: int
    exhausted: bool = False
    counterexample: str = ""

    def __bool__(self):
        return self.ok


class SequentialOracle:
    """Reference ordered set: exact semantics, inclusive range bounds."""

    def __init__(self):
        self.data = {}

    def insert(self, key, val):
        if key in self.data:
            return False
        self.data[key] = val
        return True

    def remove(self, key):
        return self.data.pop(key, _MISSING) is not _MISSING

    def contains(self, key):
        return key in self.data

    def rq(self, low, high):
        return frozenset((k, v) for k, v in self.data.items()
                         if low <= k <= high)

    def apply(self, op, args):
        return getattr(self, op)(*args)


_MISSING = object()


def record_op(log, tid, structure, op, args):
    """Run one operation against the structure and log it with markers."""
    inv = next(_tick)
    if op == "insert":
        result = structure.insert(*args)
    elif op == "remove":
        result = structure.remove(*args)
    elif op == "contains":
        result = structure.contains(*args)
    else:
        result = frozenset(structure.range_query(*args))
    res = next(_tick)
    log.append(Event(tid, op, args, result, inv, res))


def check_linearizable(per_thread_logs, budget=5_000_000):
    """Search for a legal sequential order consistent with real time.

    Each log must already be in that thread's program order. Applies the
    classic rule: an operation may be linearized next only if it was
    invoked before every other still-pending operation responded. States
    are memoized on (per-thread progress, set contents) so equivalent
    interleavings are explored once.
    """
    seqs = [list(log) for log in per_thread_logs if log]
    total = sum(len(s) for s in seqs)
    if total == 0:
        return Verdict(True, 0)
    state = {}
    pos = [0] * len(seqs)
    seen = set()
    explored = 0
    path = []
    best = []

    def apply_op(op, args):
        if op == "insert":
            key, val = args
            if key in state:
                return False, None
            state[key] = val
            return True, ("pop", key)
        if op == "remove":
            key = args[0]
            if key in state:
                val = state.pop(key)
                return True, ("put", key, val)
            return False, None
        if op == "contains":
            return args[0] in state, None
        low, high = args
        return frozenset((k, v) for k, v in state.items()
                         if low <= k <= high), None

    def undo(token):
        if token is None:
            return
        if token[0] == "pop":
            del state[token[1]]
        else:
            state[token[1]] = token[2]

    def dfs(done):
        nonlocal explored
        if done == total:
            return True
        explored += 1
        if explored > budget:
            raise _BudgetExceeded
        key = (tuple(pos), frozenset(state.items()))
        if key in seen:
            return False
        seen.add(key)
        min_res = min(seqs[i][pos[i]].res
                      for i in range(len(seqs)) if pos[i] < len(seqs[i]))
        for i in range(len(seqs)):
            if pos[i] >= len(seqs[i]):
                continue
            event = seqs[i][pos[i]]
            if event.inv > min_res:
                continue  # would reorder against completed operations
            result, token = apply_op(event.op, event.args)
            if result == event.result:
                pos[i] += 1
                path.append(event)
                if dfs(done + 1):
                    return True
                path.pop()
                pos[i] -= 1
            undo(token)
        if len(path) > len(best):
            best[:] = path
        return False

    sys.setrecursionlimit(max(10000, total * 4))
    try:
        if dfs(0):
            return Verdict(True, explored)
    except _BudgetExceeded:
        return Verdict(False, explored, exhausted=True,
                       counterexample="search budget exhausted")
    prefix = ", ".join(f"T{e.tid}:{e.op}{e.args}->{_fmt(e.result)}"
                       for e in best[-6:])
    stuck = []
    for seq in seqs:
        tid = seq[0].tid
        done = sum(1 for e in best if e.tid == tid)
        if done < len(seq):
            nxt = seq[done]
            stuck.append(f"T{tid}:{nxt.op}{nxt.args}->{_fmt(nxt.result)}")
    return Verdict(False, explored, counterexample=(
        f"no legal order after {len(best)}/{total} events; "
        f"...{prefix}; pending: {', '.join(stuck)}"))


class _BudgetExceeded(Exception):
    pass


def _fmt(result):
    if isinstance(result, frozenset):
        return "{" + ",".join(str(k) for k, _ in sorted(result)) + "}"
    return str(result)


# -- random concurrent histories ------------------------------------------


def run_random_history(make_structure, seed, threads=4, ops=30, keyspace=16):
    """Execute one seeded concurrent workload and return per-thread logs.

    The interpreter switch interval is dropped for the duration so the
    operations genuinely overlap instead of running back to back.
    """
    structure = make_structure()
    logs = [[] for _ in range(threads)]
    barrier = threading.Barrier(threads)

    def worker(tid):
        rng = random.Random((seed << 8) + tid)
        log = logs[tid]
        barrier.wait()
        for i in range(ops):
            roll = rng.random()
            key = rng.randint(1, keyspace)
            if roll < 0.35:
                record_op(log, tid, structure, "insert",
                          (key, (tid << 16) | i))
            elif roll < 0.65:
                record_op(log, tid, structure, "remove", (key,))
            elif roll < 0.85:
                record_op(log, tid, structure, "contains", (key,))
            else:
                high = key + rng.randint(0, keyspace // 2)
                record_op(log, tid, structure, "rq", (key, high))

    workers = [threading.Thread(target=worker, args=(tid,), daemon=True)
               for tid in range(threads)]
    interval = sys.getswitchinterval()
    sys.setswitchinterval(1e-4)
    try:
        for w in workers:
            w.start()
        for w in workers:
            w.join()
    finally:
        sys.setswitchinterval(interval)
    return logs, structure


def run_random_suite(name, seeds, threads=4, ops=30, keyspace=16,
                     reclaim=False, verbose=False):
    """Check `seeds` random histories on one structure; returns counters."""
    factory = STRUCTURES[name]
    failures = []
    exhausted = 0
    checked = 0
    for seed in seeds:
        def make():
            domain = ReclaimDomain(enabled=reclaim)
            return factory(reclaim=domain)

        logs, structure = run_random_history(make, seed, threads, ops,
                                             keyspace)
        verdict = check_linearizable(logs)
        if verdict.exhausted:
            exhausted += 1
        elif not verdict.ok:
            failures.append((seed, verdict.counterexample))
        structure.check_invariants()
        checked += 1
        if verbose and (checked % 100 == 0):
            print(f"  {name}: {checked} histories checked", flush=True)
    return {"checked": checked, "violations": failures,
            "exhausted": exhausted}


# -- sequential replays -----------------------------------------------------


def run_sequential_suite(name, trace_count=10, ops=200, keyspace=64):
    """Single-threaded random traces; after every operation the structure
    must agree with the oracle on membership, and at the end on every
    inclusive range."""
    factory = STRUCTURES[name]
    for trace in range(trace_count):
        rng = random.Random(trace * 7919 + 13)
        structure = factory()
        oracle = SequentialOracle()
        for i in range(ops):
            key = rng.randint(1, keyspace)
            roll = rng.random()
            if roll < 0.4:
                assert structure.insert(key, i) == oracle.insert(key, i)
            elif roll < 0.75:
                assert structure.remove(key) == oracle.remove(key)
            else:
                assert structure.contains(key) == oracle.contains(key)
        for low in range(1, keyspace + 1):
            for high in range(low, keyspace + 1):
                got = frozenset(structure.range_query(low, high))
                assert got == oracle.rq(low, high), (name, trace, low, high)
        structure.check_invariants()
    return True


# -- deterministic race replays ---------------------------------------------


class _Pause:
    """Gate used as a pause point: the paused thread parks at wait() until
    the orchestrating test releases it."""

    def __init__(self):
        self.reached = threading.Event()
        self.release = threading.Event()

    def __call__(self):
        self.reached.set()
        self.release.wait(30)


def _spawn(fn, *args):
    out = {}

    def run():
        try:
            out["result"] = fn(*args)
        except BaseException as exc:  # surfaced by the scenario driver
            out["error"] = exc

    thread = threading.Thread(target=run, daemon=True)
    thread.start()
    return thread, out


def replay_pending_stall_scenario(protected=True, make_structure=None):
    """An updater stalls between its linearization write and the history
    finalize; a reader that already saw the update through a point lookup
    then issues a range query. Verdict: the query must include the new key.

    With `protected=False` the query skips pending entries instead of
    waiting (negative control) and misses the key.
    """
    make_structure = make_structure or STRUCTURES["list"]
    ds = make_structure()
    ds.insert(10, 1)
    ds.insert(30, 3)
    ds.hooks.deref_wait = protected
    pause = _Pause()
    ds.hooks.after_commit = pause
    inserter, insert_out = _spawn(ds.insert, 20, 2)
    assert pause.reached.wait(10), "inserter never reached its pause point"
    ds.hooks.after_commit = None

    contains_saw_it = ds.contains(20)
    rq_thread, rq_out = _spawn(ds.range_query, 10, 30)
    if protected:
        rq_thread.join(0.2)
        blocked = rq_thread.is_alive()
    else:
        blocked = False
    pause.release.set()
    inserter.join(10)
    rq_thread.join(10)
    assert insert_out.get("result") is True
    result = rq_out["result"]
    included = any(k == 20 for k, _ in result)
    ok = contains_saw_it and included and (blocked or not protected)
    detail = (f"contains(20)={contains_saw_it} rq={sorted(result)} "
              f"blocked={blocked}")
    return ok, detail


def replay_pending_stall_before_linearization(make_structure=None):
    """Control: the updater stalls before its clock bump, so a fresh query
    legitimately predates it — the lookup misses and, once the updater is
    released, the query's older snapshot excludes the key."""
    make_structure = make_structure or STRUCTURES["list"]
    ds = make_structure()
    ds.insert(10, 1)
    ds.insert(30, 3)
    pause = _Pause()
    ds.hooks.after_prepare = pause
    inserter, insert_out = _spawn(ds.insert, 20, 2)
    assert pause.reached.wait(10)
    ds.hooks.after_prepare = None

    contains_saw_it = ds.contains(20)
    rq_thread, rq_out = _spawn(ds.range_query, 10, 30)
    rq_thread.join(0.2)
    blocked = rq_thread.is_alive()  # parked on the pending entry
    pause.release.set()
    inserter.join(10)
    rq_thread.join(10)
    assert insert_out.get("result") is True
    result = rq_out["result"]
    ok = (not contains_saw_it) and blocked \
        and all(k != 20 for k, _ in result)
    return ok, f"contains={contains_saw_it} rq={sorted(result)}"


def replay_unlocked_successor_scenario(protected=True):
    """An updater latches a just-linked node before the linking insert has
    finalized that node's history, then tries to extend it. Verdict: the
    second update must wait, leaving the chain ordered.

    With `protected=False` it installs over the pending entry (negative
    control): the first updater's finalize then lands on the wrong entry,
    which trips the finalize precondition or the chain checker.
    """
    ds = STRUCTURES["list"]()
    ds.hooks.prepare_wait = protected
    pause = _Pause()
    ds.hooks.after_commit = pause
    first, first_out = _spawn(ds.insert, 20, 2)  # node 20 reachable, pending
    assert pause.reached.wait(10)
    ds.hooks.after_commit = None

    # Second insert picks node 20 as its predecessor and latches it.
    second, second_out = _spawn(ds.insert, 30, 3)
    second.join(0.3)
    second_blocked = second.is_alive()
    pause.release.set()
    first.join(10)
    second.join(10)
    failure = first_out.get("error") or second_out.get("error")
    if failure is not None:
        return False, f"updater died: {failure!r}"
    try:
        ds.check_invariants()
    except AssertionError as exc:
        return False, f"invariant violation: {exc}"
    chain = [e.ts for e in _node(ds, 20).next_bundle.entries()]
    ordered = chain == sorted(chain, reverse=True)
    ok = ordered and (second_blocked or not protected) \
        and first_out.get("result") is True and second_out.get("result") is True
    return ok, f"chain={chain} blocked={second_blocked}"


def _node(ds, key):
    node = ds.head.newest_next
    while node.key < key:
        node = node.newest_next
    assert node.key == key
    return node


def run_scenarios():
    """All deterministic replays incl. negative controls; returns failures."""
    failures = []
    checks = [
        ("pending-stall protected", lambda: replay_pending_stall_scenario(True), True),
        ("pending-stall unprotected", lambda: replay_pending_stall_scenario(False), False),
        ("pending-stall before-linearization", replay_pending_stall_before_linearization, True),
        ("unlocked-successor protected", lambda: replay_unlocked_successor_scenario(True), True),
        ("unlocked-successor unprotected", lambda: replay_unlocked_successor_scenario(False), False),
    ]
    for name, fn, want_ok in checks:
        ok, detail = fn()
        if ok != want_ok:
            failures.append(f"{name}: expected ok={want_ok}, got {ok} ({detail})")
    return failures


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bundleset-lincheck",
        description="history-based correctness checks for the bundled sets")
    parser.add_argument("--suite", choices=("random", "scenarios", "sequential"),
                        default="random")
    parser.add_argument("--ds", choices=tuple(STRUCTURES) + ("all",),
                        default="all")
    parser.add_argument("--seeds", type=int, default=100)
    parser.add_argument("--threads", type=int, default=4)
    parser.add_argument("--ops", type=int, default=30)
    parser.add_argument("--keyspace", type=int, default=16)
    parser.add_argument("--reclaim", choices=("on", "off"), default="off")
    args = parser.parse_args(argv)

    names = tuple(STRUCTURES) if args.ds == "all" else (args.ds,)
    failed = False
    if args.suite == "scenarios":
        failures = run_scenarios()
        for line in failures:
            print("FAIL", line)
        failed = bool(failures)
        print("scenarios:", "FAIL" if failed else "ok")
    elif args.suite == "sequential":
        for name in names:
            run_sequential_suite(name)
            print(f"sequential {name}: ok")
    else:
        for name in names:
            outcome = run_random_suite(
                name, range(args.seeds), threads=args.threads, ops=args.ops,
                keyspace=args.keyspace, reclaim=args.reclaim == "on")
            bad = outcome["violations"]
            print(f"random {name}: {outcome['checked']} histories, "
                  f"{len(bad)} violations, {outcome['exhausted']} exhausted")
            for seed, why in bad[:5]:
                print(f"  seed {seed}: {why}")
            failed = failed or bad or outcome["exhausted"]
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
