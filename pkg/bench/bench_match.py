"""Benchmark: native match kernel vs the pure-Python fallback.

Runs the same compiled behaviour pattern over the same synthetic log with
both implementations and reports throughput. Usage:

    python bench/bench_match.py --cases 100000 --mean-events 10
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from signalql import _kernels_py
from signalql.parser import parse_pattern
from signalql.pattern import ClassLit, build_match_masks, class_bitmap, compile_pattern
from signalql.store import Level
from signalql.synth import synth_log

try:
    from signalql import _native
except ImportError:
    _native = None

PATTERN = "'Open ticket' ~> 'Reopen' ~> 'Close ticket'"


def best_of(fn, repeat: int) -> tuple[float, np.ndarray]:
    out = None
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--cases", type=int, default=100_000)
    ap.add_argument("--mean-events", type=float, default=10.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--pattern", default=PATTERN)
    args = ap.parse_args()

    log = synth_log(args.cases, args.mean_events, seed=7)
    snap = log.snapshot(None)
    col = snap.column(Level.EVENT, "event_name")
    codes = col.data
    index = {s: i for i, s in enumerate(col.dictionary)}

    compiled = compile_pattern(parse_pattern(args.pattern))
    branch = compiled.branches[0]

    def base(cls):
        if isinstance(cls, ClassLit):
            return codes == index.get(cls.text, -2)
        return np.ones(len(codes), dtype=np.bool_)

    masks = build_match_masks([class_bitmap(c, base) for c in branch.classes])
    offsets = snap.case_offsets
    call = lambda impl: impl(
        masks,
        offsets,
        branch.follow,
        int(branch.accept_mask),
        branch.anchored_start,
        branch.anchored_end,
    )

    n_ev = snap.n_events
    print(f"log: {snap.n_cases} cases, {n_ev} events; pattern: {args.pattern}")

    t_py, out_py = best_of(lambda: call(_kernels_py.match_cases), args.repeat)
    print(f"pure-python: {t_py * 1e3:9.2f} ms   {n_ev / t_py / 1e6:7.1f} M events/s")

    if _native is None:
        print("native:      not built")
        return 0
    t_nat, out_nat = best_of(lambda: call(_native.match_cases), args.repeat)
    print(f"native:      {t_nat * 1e3:9.2f} ms   {n_ev / t_nat / 1e6:7.1f} M events/s")
    print(f"speedup:     {t_py / t_nat:9.1f}x")
    if not np.array_equal(out_py, out_nat):
        print("MISMATCH between implementations")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
