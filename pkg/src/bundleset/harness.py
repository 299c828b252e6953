"""Workload benchmark CLI.

Prefills a structure with half its key range, runs a U-C-RQ operation mix
across worker threads (updates split evenly between inserts and removes,
keys drawn uniformly), and reports throughput plus a quiescent invariant
sweep. The ``unsafe`` variant answers range queries straight off the newest
links — no snapshot, no announcement — and serves as the performance
ceiling. ``--relax`` trades range-query freshness for fewer clock bumps.

Runs are time-bounded by default; ``--ops`` switches to a fixed number of
operations per thread, which makes single-threaded runs bit-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import os
import random
import sys
import threading
import time
from dataclasses import dataclass

from . import STRUCTURES
from .core import GlobalClock, RelaxedClock
from .reclaim import BundlePruner, ReclaimDomain

OP_NAMES = ("insert", "remove", "contains", "rq")


@dataclass
class WorkloadSpec:
    structure: str = "list"
    variant: str = "bundle"            # bundle | unsafe
    key_range: int = 10_000
    mix: tuple = (10, 80, 10)          # update%, contains%, range-query%
    rq_size: int = 50
    threads: int = 4
    seconds: float = 3.0
    ops_per_thread: int = 0            # 0: run for `seconds` instead
    seed: int = 1
    relax: float = 1                   # clock bump threshold; inf allowed
    reclaim: bool = False
    cleanup_delay_ms: float = 0.0

    def validate(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"structure must be one of {tuple(STRUCTURES)}")
        if self.variant not in ("bundle", "unsafe"):
            raise ValueError("variant must be 'bundle' or 'unsafe'")
        if self.key_range < 2:
            raise ValueError("key_range must be at least 2")
        if len(self.mix) != 3 or any(p < 0 for p in self.mix) \
                or sum(self.mix) != 100:
            raise ValueError("mix percentages must be >= 0 and sum to 100")
        if self.rq_size < 0:
            raise ValueError("rq_size must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.seconds <= 0 and self.ops_per_thread <= 0:
            raise ValueError("seconds must be > 0 (or set ops_per_thread)")
        if self.relax != float("inf") and int(self.relax) < 1:
            raise ValueError("relax must be >= 1 or inf")
        if self.cleanup_delay_ms < 0:
            raise ValueError("cleanup_delay_ms must be >= 0")
        return self

    @property
    def mix_label(self):
        return "-".join(str(p) for p in self.mix)


@dataclass
class RunResult:
    spec: WorkloadSpec
    duration_s: float
    per_thread_ops: list
    counts: dict                  # op -> attempts
    succeeded: dict               # op -> successful attempts
    rq_items: int
    clock_end: int
    size_end: int
    entries_created: int
    entries_recycled: int
    sweep_ok: bool
    sweep_error: str = ""

    @property
    def total_ops(self):
        return sum(self.per_thread_ops)

    @property
    def throughput(self):
        return self.total_ops / self.duration_s if self.duration_s else 0.0


def make_clock(relax):
    clock = GlobalClock()
    if relax == 1:
        return clock
    return RelaxedClock(clock, relax)


def build_structure(spec):
    clock = make_clock(spec.relax)
    domain = ReclaimDomain(enabled=spec.reclaim)
    structure = STRUCTURES[spec.structure](
        clock=clock, reclaim=domain, unsafe_ranges=spec.variant == "unsafe")
    return structure, domain


def prefill(structure, spec):
    rng = random.Random(spec.seed)
    target = spec.key_range // 2
    filled = 0
    while filled < target:
        key = rng.randint(1, spec.key_range)
        if structure.insert(key, key):
            filled += 1


def _worker(structure, spec, tid, stop, started, counts, succeeded, totals,
            rq_items):
    rng = random.Random(spec.seed * 1_000_003 + tid)
    update_pct, contains_pct, _ = spec.mix
    contains_cut = update_pct + contains_pct
    key_range = spec.key_range
    rq_size = spec.rq_size
    budget = spec.ops_per_thread
    randint = rng.randint
    random_ = rng.random
    local_counts = dict.fromkeys(OP_NAMES, 0)
    local_ok = dict.fromkeys(OP_NAMES, 0)
    items = 0
    done = 0

    started.wait()
    while True:
        if budget:
            if done >= budget:
                break
        elif stop.is_set():
            break
        roll = random_() * 100.0
        key = randint(1, key_range)
        if roll < update_pct:
            if roll < update_pct / 2.0:
                local_counts["insert"] += 1
                if structure.insert(key, key):
                    local_ok["insert"] += 1
            else:
                local_counts["remove"] += 1
                if structure.remove(key):
                    local_ok["remove"] += 1
        elif roll < contains_cut:
            local_counts["contains"] += 1
            if structure.contains(key):
                local_ok["contains"] += 1
        else:
            local_counts["rq"] += 1
            high = min(key + rq_size, key_range)
            result = structure.range_query(key, high)
            items += len(result)
            local_ok["rq"] += 1
        done += 1

    totals[tid] = done
    rq_items[tid] = items
    for op in OP_NAMES:
        counts[tid][op] = local_counts[op]
        succeeded[tid][op] = local_ok[op]


def run_benchmark(spec: WorkloadSpec) -> RunResult:
    spec.validate()
    structure, domain = build_structure(spec)
    prefill(structure, spec)

    pruner = None
    if spec.reclaim:
        pruner = BundlePruner(domain, structure.clock, [structure],
                              delay_s=spec.cleanup_delay_ms / 1000.0).start()

    stop = threading.Event()
    started = threading.Event()
    n = spec.threads
    counts = [dict.fromkeys(OP_NAMES, 0) for _ in range(n)]
    succeeded = [dict.fromkeys(OP_NAMES, 0) for _ in range(n)]
    totals = [0] * n
    rq_items = [0] * n
    workers = [threading.Thread(
        target=_worker,
        args=(structure, spec, tid, stop, started, counts, succeeded,
              totals, rq_items),
        daemon=True) for tid in range(n)]
    for w in workers:
        w.start()

    begin = time.monotonic()
    started.set()
    if spec.ops_per_thread:
        for w in workers:
            w.join()
    else:
        time.sleep(spec.seconds)
        stop.set()
        for w in workers:
            w.join()
    duration = time.monotonic() - begin

    if pruner is not None:
        pruner.stop()
    domain.drain()

    sweep_ok, sweep_error = True, ""
    try:
        structure.check_invariants(strict_ts=spec.relax == 1)
    except AssertionError as exc:
        sweep_ok, sweep_error = False, str(exc)

    return RunResult(
        spec=spec,
        duration_s=duration,
        per_thread_ops=totals,
        counts={op: sum(c[op] for c in counts) for op in OP_NAMES},
        succeeded={op: sum(s[op] for s in succeeded) for op in OP_NAMES},
        rq_items=sum(rq_items),
        clock_end=structure.clock.read(),
        size_end=structure.count_keys(),
        entries_created=structure.stats.entries_created,
        entries_recycled=structure.stats.entries_recycled,
        sweep_ok=sweep_ok,
        sweep_error=sweep_error,
    )


CSV_COLUMNS = (
    "ds", "variant", "keys", "mix", "rqsize", "threads", "seconds",
    "ops_per_thread", "seed", "relax", "reclaim", "cleanup_delay_ms",
    "duration_s", "total_ops", "throughput_ops_s",
    "inserts", "inserts_ok", "removes", "removes_ok",
    "contains", "contains_ok", "rqs", "rq_items",
    "clock_end", "size_end", "entries_created", "entries_recycled",
    "per_thread", "sweep_ok",
)


def result_row(result: RunResult) -> dict:
    spec = result.spec
    return {
        "ds": spec.structure,
        "variant": spec.variant,
        "keys": spec.key_range,
        "mix": spec.mix_label,
        "rqsize": spec.rq_size,
        "threads": spec.threads,
        "seconds": spec.seconds,
        "ops_per_thread": spec.ops_per_thread,
        "seed": spec.seed,
        "relax": "inf" if spec.relax == float("inf") else int(spec.relax),
        "reclaim": "on" if spec.reclaim else "off",
        "cleanup_delay_ms": spec.cleanup_delay_ms,
        "duration_s": f"{result.duration_s:.6f}",
        "total_ops": result.total_ops,
        "throughput_ops_s": f"{result.throughput:.3f}",
        "inserts": result.counts["insert"],
        "inserts_ok": result.succeeded["insert"],
        "removes": result.counts["remove"],
        "removes_ok": result.succeeded["remove"],
        "contains": result.counts["contains"],
        "contains_ok": result.succeeded["contains"],
        "rqs": result.counts["rq"],
        "rq_items": result.rq_items,
        "clock_end": result.clock_end,
        "size_end": result.size_end,
        "entries_created": result.entries_created,
        "entries_recycled": result.entries_recycled,
        "per_thread": "|".join(str(c) for c in result.per_thread_ops),
        "sweep_ok": int(result.sweep_ok),
    }


def emit_csv(results, path):
    """Append one row per run; writes the header when the file is new."""
    try:
        new_file = not os.path.exists(path) or os.path.getsize(path) == 0
        with open(path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            if new_file:
                writer.writeheader()
            for result in results:
                writer.writerow(result_row(result))
    except OSError as exc:
        raise SystemExit(f"cannot write results to {path}: {exc}")


def parse_mix(text):
    parts = text.replace("-", ":").split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("mix must look like U:C:RQ")
    return tuple(int(p) for p in parts)


def parse_relax(text):
    if text.lower() in ("inf", "infinite"):
        return float("inf")
    return int(text)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bundleset-bench",
        description="benchmark the bundled ordered sets")
    parser.add_argument("--ds", choices=tuple(STRUCTURES), default="list")
    parser.add_argument("--variant", choices=("bundle", "unsafe"),
                        default="bundle")
    parser.add_argument("--keys", type=int, default=10_000)
    parser.add_argument("--mix", type=parse_mix, default=(10, 80, 10),
                        metavar="U:C:RQ")
    parser.add_argument("--rqsize", type=int, default=50)
    parser.add_argument("--threads", type=int, default=4)
    parser.add_argument("--seconds", type=float, default=3.0)
    parser.add_argument("--ops", type=int, default=0,
                        help="fixed operations per thread (0: run --seconds)")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--relax", type=parse_relax, default=1,
                        help="bump the clock every T-th update (or 'inf')")
    parser.add_argument("--reclaim", choices=("on", "off"), default="off")
    parser.add_argument("--cleanup-delay-ms", type=float, default=0.0)
    parser.add_argument("--out", default="", help="append results to this CSV")
    args = parser.parse_args(argv)

    spec = WorkloadSpec(
        structure=args.ds, variant=args.variant, key_range=args.keys,
        mix=args.mix, rq_size=args.rqsize, threads=args.threads,
        seconds=args.seconds, ops_per_thread=args.ops, seed=args.seed,
        relax=args.relax, reclaim=args.reclaim == "on",
        cleanup_delay_ms=args.cleanup_delay_ms)
    try:
        spec.validate()
    except ValueError as exc:
        parser.error(str(exc))

    result = run_benchmark(spec)
    print(f"{spec.structure}/{spec.variant} mix={spec.mix_label} "
          f"keys={spec.key_range} rq={spec.rq_size} threads={spec.threads} "
          f"relax={args.relax} reclaim={'on' if spec.reclaim else 'off'}")
    print(f"  ops={result.total_ops} in {result.duration_s:.2f}s "
          f"-> {result.throughput:,.0f} ops/s")
    print(f"  counts={result.counts} ok={result.succeeded}")
    print(f"  clock={result.clock_end} size={result.size_end} "
          f"entries={result.entries_created}/recycled={result.entries_recycled}")
    print(f"  invariant sweep: {'ok' if result.sweep_ok else 'FAILED'}"
          + (f" ({result.sweep_error})" if result.sweep_error else ""))
    if args.out:
        emit_csv([result], args.out)
    return 0 if result.sweep_ok else 1


if __name__ == "__main__":
    sys.exit(main())
