"""Columnar compute primitives and native/pure kernel selection.

The automaton match loop is the one genuinely sequential hot path, so it has
a compiled implementation (signalql._native) with a pure-Python fallback.
The fallback is picked automatically when the extension is missing and can
be forced with SIGNALQL_PURE=1. Everything else is plain numpy.

`counters` instruments the query path: FIRST/LAST must resolve by positional
gather against the per-case order fixed at ingestion, never by sorting.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

counters = {
    "event_sorts": 0,
    "positional_first_last": 0,
    "match_calls": 0,
}


def reset_counters() -> None:
    for key in counters:
        counters[key] = 0


pure_match_cases = _kernels_py.match_cases
native_match_cases = None
if os.environ.get("SIGNALQL_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _native  # type: ignore[attr-defined]

        native_match_cases = _native.match_cases
    except ImportError:
        pass

_match_impl = native_match_cases or pure_match_cases


def backend_name() -> str:
    return "native" if _match_impl is not pure_match_cases else "pure"


def match_cases(match_masks, offsets, follow, accept, anchored_start, anchored_end):
    """Per-case match flags for one compiled branch."""
    counters["match_calls"] += 1
    return _match_impl(
        np.ascontiguousarray(match_masks, dtype=np.uint64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(follow, dtype=np.uint64),
        int(accept),
        bool(anchored_start),
        bool(anchored_end),
    )


# --- segment (per-case) aggregation ------------------------------------------


def _first_last_indices(offsets, cond):
    """(first_idx, last_idx, has_any) per case, restricted to cond rows."""
    if cond is None:
        return offsets[:-1], offsets[1:] - 1, np.ones(len(offsets) - 1, dtype=np.bool_)
    true_idx = np.flatnonzero(cond)
    lo = np.searchsorted(true_idx, offsets[:-1], side="left")
    hi = np.searchsorted(true_idx, offsets[1:], side="left")
    has_any = hi > lo
    if len(true_idx) == 0:
        zero = np.zeros(len(offsets) - 1, dtype=np.int64)
        return zero, zero, has_any
    # rows without a hit get a clamped dummy index; has_any masks them out
    first = true_idx[np.minimum(lo, len(true_idx) - 1)]
    last = true_idx[np.maximum(hi - 1, 0)]
    return first, last, has_any


def gather_first(values, valid, offsets, cond=None):
    """FIRST: value at the earliest event (of those passing cond) per case."""
    counters["positional_first_last"] += 1
    idx, _, has_any = _first_last_indices(offsets, cond)
    out = values[idx]
    out_valid = has_any if valid is None else has_any & valid[idx]
    return out, out_valid


def gather_last(values, valid, offsets, cond=None):
    counters["positional_first_last"] += 1
    _, idx, has_any = _first_last_indices(offsets, cond)
    out = values[idx]
    out_valid = has_any if valid is None else has_any & valid[idx]
    return out, out_valid


def first_last_by_sort(values, valid, offsets, order_key, want_last):
    """Sort-based FIRST/LAST used as an independent check of the positional
    kernels. Counts as an event sort; the query path must never call it."""
    counters["event_sorts"] += 1
    n_cases = len(offsets) - 1
    out = np.empty(n_cases, dtype=values.dtype)
    out_valid = np.zeros(n_cases, dtype=np.bool_)
    for c in range(n_cases):
        s, e = int(offsets[c]), int(offsets[c + 1])
        order = np.argsort(order_key[s:e], kind="stable")
        pick = order[-1] if want_last else order[0]
        out[c] = values[s + pick]
        out_valid[c] = True if valid is None else bool(valid[s + pick])
    return out, out_valid


def seg_counts(offsets, cond=None, valid=None):
    """Row count per case, optionally restricted to cond and non-NULL rows."""
    if cond is None and valid is None:
        return (offsets[1:] - offsets[:-1]).astype(np.int64)
    keep = np.ones(offsets[-1], dtype=np.bool_) if cond is None else cond.copy()
    if valid is not None:
        keep &= valid
    if len(offsets) <= 1:
        return np.zeros(0, dtype=np.int64)
    return np.add.reduceat(keep.astype(np.int64), offsets[:-1])


def _masked(values, valid, cond, identity):
    keep = None
    if valid is not None:
        keep = valid.copy()
    if cond is not None:
        keep = cond.copy() if keep is None else keep & cond
    if keep is None:
        return values, None
    return np.where(keep, values, identity), keep


def seg_sum(values, valid, offsets, cond=None):
    """(sums, non-null counts) per case; caller decides NULL on zero count."""
    if len(offsets) <= 1:
        return np.zeros(0, dtype=values.dtype), np.zeros(0, dtype=np.int64)
    masked, keep = _masked(values, valid, cond, values.dtype.type(0))
    sums = np.add.reduceat(masked, offsets[:-1])
    counts = seg_counts(offsets, cond, valid)
    return sums, counts


def _extreme_identity(dtype, want_max):
    if dtype.kind == "f":
        return dtype.type(-np.inf if want_max else np.inf)
    info = np.iinfo(dtype)
    return dtype.type(info.min if want_max else info.max)


def seg_min(values, valid, offsets, cond=None):
    if len(offsets) <= 1:
        return np.zeros(0, dtype=values.dtype), np.zeros(0, dtype=np.int64)
    masked, _ = _masked(values, valid, cond, _extreme_identity(values.dtype, False))
    mins = np.minimum.reduceat(masked, offsets[:-1])
    return mins, seg_counts(offsets, cond, valid)


def seg_max(values, valid, offsets, cond=None):
    if len(offsets) <= 1:
        return np.zeros(0, dtype=values.dtype), np.zeros(0, dtype=np.int64)
    masked, _ = _masked(values, valid, cond, _extreme_identity(values.dtype, True))
    maxs = np.maximum.reduceat(masked, offsets[:-1])
    return maxs, seg_counts(offsets, cond, valid)
