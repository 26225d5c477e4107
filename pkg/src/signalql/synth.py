"""Synthetic ticket-log builder for tests and benchmarks.

Traces open with 'Open ticket', close with 'Close ticket' (most of the time)
and carry random middle activities, so behaviour patterns have something to
bite on. Deterministic for a given seed.
"""

from __future__ import annotations

import numpy as np

from .store import EventLog, ScalarType, Schema

ACTIVITIES = ("Triage", "Escalate", "Wait", "Reply", "Reopen")
REGIONS = ("EMEA", "AMER", "APAC")

_HOUR = 3_600_000
_BASE_TS = 1_577_836_800_000  # 2020-01-01T00:00:00Z


def synth_schema() -> Schema:
    S, N, T = ScalarType.STRING, ScalarType.NUMBER, ScalarType.TIMESTAMP
    return Schema.make(
        [("case_id", S), ("region", S), ("priority", N)],
        [("event_name", S), ("end_time", T), ("amount", N)],
    )


def synth_log(
    n_cases: int,
    mean_events: float = 10.0,
    seed: int = 0,
    log_id: str = "synth",
    null_rate: float = 0.05,
) -> EventLog:
    rng = np.random.default_rng(seed)
    lengths = 2 + rng.poisson(max(mean_events - 2.0, 0.0), n_cases)
    offsets = np.zeros(n_cases + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    n_events = int(offsets[-1])

    pos = np.arange(n_events, dtype=np.int64) - np.repeat(offsets[:-1], lengths)
    is_first = pos == 0
    is_last = np.zeros(n_events, dtype=bool)
    is_last[offsets[1:] - 1] = True

    name_idx = rng.integers(0, len(ACTIVITIES), n_events)
    names = np.array(ACTIVITIES, dtype=object)[name_idx]
    names[is_first] = "Open ticket"
    # a slice of cases never closes, so universal properties are not vacuous
    closes = rng.random(n_cases) < 0.9
    names[is_last & np.repeat(closes, lengths)] = "Close ticket"

    steps = rng.integers(_HOUR // 4, 48 * _HOUR, n_events)
    case_start = _BASE_TS + rng.integers(0, 365 * 24, n_cases) * _HOUR
    end_time = np.repeat(case_start, lengths) + np.cumsum(steps) - np.repeat(
        np.cumsum(steps)[offsets[:-1]] - steps[offsets[:-1]], lengths
    )

    amount = np.round(rng.gamma(2.0, 40.0, n_events), 2)
    amount_null = rng.random(n_events) < null_rate

    amount_cells = amount.tolist()
    for i in np.flatnonzero(amount_null):
        amount_cells[i] = None

    case_cols = {
        "case_id": [f"c{i:07d}" for i in range(n_cases)],
        "region": np.array(REGIONS, dtype=object)[
            rng.integers(0, len(REGIONS), n_cases)
        ].tolist(),
        "priority": rng.integers(1, 5, n_cases).astype(np.float64).tolist(),
    }
    event_cols = {
        "event_name": names.tolist(),
        "end_time": end_time.tolist(),
        "amount": amount_cells,
    }
    return EventLog.from_arrays(log_id, synth_schema(), case_cols, event_cols, offsets)
