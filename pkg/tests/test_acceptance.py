"""Acceptance suite.

One test per shipping criterion; each prints a single `[ACCEPTANCE] n ...
PASS/FAIL` line straight to the terminal (bypassing capture). Every oracle
here is independent of the code path it checks: golden values are fixed
integers, pattern semantics are checked against the window-enumeration
reference matcher or a direct scan, and round trips compare full column
contents.
"""

import io
import json
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import CYCLE_1001, CYCLE_1002, build_support_log
from signalql import kernels
from signalql import parser as P
from signalql.analyzer import analyze_query, explain
from signalql.engine import Engine
from signalql.errors import SignalError
from signalql.executor import execute, optimize, scan_columns
from signalql.http_api import create_app
from signalql.ingest import CsvIngestConfig, ingest_csv
from signalql.parser import parse_pattern, parse_query
from signalql.pattern import (
    ClassAny,
    ClassBehaviour,
    ClassLit,
    build_match_masks,
    class_bitmap,
    compile_pattern,
    reference_match_pattern,
)
from signalql.store import Level
from signalql.synth import synth_log


@contextmanager
def criterion(num: int, label: str):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {num:2d} {label}: FAIL", file=sys.__stdout__)
        raise
    print(f"[ACCEPTANCE] {num:2d} {label}: PASS", file=sys.__stdout__)


# --- pattern harness (same kernel entry point the executor uses) ---------------


def _masks_for(pattern, names, behaviours):
    arr = np.array(names, dtype=object)

    def base(cls):
        if isinstance(cls, ClassLit):
            return arr == cls.text
        if isinstance(cls, ClassBehaviour):
            hits = behaviours[cls.name]
            return np.array([n in hits for n in names], dtype=bool)
        assert isinstance(cls, ClassAny)
        return np.ones(len(names), dtype=bool)

    return [
        build_match_masks([class_bitmap(c, base) for c in b.classes])
        for b in pattern.branches
    ]


def match_traces(text_or_ast, traces, behaviours=None):
    behaviours = behaviours or {}
    ast = text_or_ast
    if isinstance(ast, str):
        ast = parse_pattern(ast)
    pattern = compile_pattern(ast, behaviours.keys())
    names = [n for t in traces for n in t]
    offs = np.cumsum([0] + [len(t) for t in traces]).astype(np.int64)
    masks = _masks_for(pattern, names, behaviours)
    got = np.zeros(len(traces), dtype=bool)
    for branch, mm in zip(pattern.branches, masks):
        got |= kernels.match_cases(
            mm, offs, branch.follow, branch.accept_mask,
            branch.anchored_start, branch.anchored_end,
        )
    return pattern, masks, offs, got


GOLDEN_QUERIES = [
    "SELECT case_id FROM THIS_PROCESS "
    "WHERE event_name MATCHES ('Close ticket' ~> 'Open ticket')",
    "SELECT case_id FROM THIS_PROCESS "
    "WHERE (event_name = 'Close ticket' AND \"status\" = 'blocked')",
    "SELECT case_id FROM THIS_PROCESS "
    "WHERE BEHAVIOUR (event_name = 'Close ticket' AND \"status\" = 'blocked') "
    "AS closed_while_blocked "
    "MATCHES(closed_while_blocked ~> 'Open ticket')",
    "SELECT AVG((SELECT LAST(end_time) - FIRST(end_time))) AS avg_cycle "
    "FROM THIS_PROCESS",
]


def test_01_support_log_query_goldens():
    with criterion(1, "support-log golden query suite"):
        eng = Engine()
        eng.add_log(build_support_log())
        t0 = time.perf_counter()
        for text in GOLDEN_QUERIES[:3]:
            got = eng.run(text)
            assert got.column_values("case_id") == ["1002"]
        cycles = eng.run(
            "SELECT case_id, (SELECT LAST(end_time) - FIRST(end_time)) AS c "
            "FROM THIS_PROCESS"
        )
        assert dict(cycles.rows()) == {"1001": 133451244, "1002": 266966516}
        assert (CYCLE_1001, CYCLE_1002) == (133451244, 266966516)
        avg = eng.run(GOLDEN_QUERIES[3])
        assert avg.column_values("avg_cycle") == [200208880]
        assert time.perf_counter() - t0 < 1.0


def _random_pattern(rng, depth, ops_seen):
    alphabet = ["a", "b", "c", "d"]
    if depth == 0:
        kind = rng.integers(0, 4)
        if kind == 0:
            return P.PLiteral(alphabet[rng.integers(0, 4)])
        if kind == 1:
            return P.PIdent(["p", "q", "r"][rng.integers(0, 3)])
        if kind == 2:
            ops_seen.add("ANY")
            return P.PAny()
        ops_seen.add("NOT")
        inner = (
            P.PAny() if rng.random() < 0.3 else P.PLiteral(alphabet[rng.integers(0, 4)])
        )
        return P.PNot(inner)
    kind = rng.integers(0, 3)
    child_depth = depth - 1
    if kind == 0:
        n = 2 if depth >= 2 else int(rng.integers(2, 4))
        items = tuple(_random_pattern(rng, child_depth, ops_seen) for _ in range(n))
        seps = tuple(str(rng.choice(["", "->", "~>"])) for _ in range(n - 1))
        for s in seps:
            ops_seen.add(s or "->")
            if s:
                ops_seen.add(s)
        return P.PSeq(items, seps)
    if kind == 1:
        ops_seen.add("|")
        items = tuple(_random_pattern(rng, child_depth, ops_seen) for _ in range(2))
        return P.PAlt(items)
    ops_seen.add("*")
    return P.PStar(_random_pattern(rng, child_depth, ops_seen))


def test_02_pattern_oracle_equivalence():
    with criterion(2, "pattern oracle equivalence (10,000 random instances)"):
        rng = np.random.default_rng(2024)
        alphabet = ["a", "b", "c", "d"]
        ops_seen: set = set()
        instances = 0
        mismatches = 0
        t0 = time.perf_counter()
        for _ in range(2000):
            behaviours = {
                name: {a for a in alphabet if rng.random() < 0.4}
                for name in ("p", "q", "r")
            }
            ast = _random_pattern(rng, int(rng.integers(1, 5)), ops_seen)
            start, end = rng.random() < 0.3, rng.random() < 0.3
            if start or end:
                ast = P.PAnchored(bool(start), bool(end), ast)
                ops_seen.update({"^"} if start else set())
                ops_seen.update({"$"} if end else set())
            traces = [
                [alphabet[i] for i in rng.integers(0, 4, rng.integers(0, 11))]
                for _ in range(5)
            ]
            pattern, masks, offs, got = match_traces(ast, traces, behaviours)
            want = reference_match_pattern(pattern, masks, offs)
            mismatches += int((got != want).sum())
            instances += len(traces)
        elapsed = time.perf_counter() - t0
        assert instances >= 10_000
        assert mismatches == 0
        assert {"->", "~>", "^", "$", "ANY", "NOT", "|", "*"} <= ops_seen
        assert elapsed < 60.0


TABLE_ROWS = [
    ("a -> b", ["x", "a", "b", "y"], ["x", "a", "c", "b", "y"]),
    ("a ~> b", ["x", "a", "c", "b", "y"], ["b", "x", "a"]),
    ("^ a", ["a", "x"], ["x", "a"]),
    ("a $", ["x", "a"], ["a", "x"]),
    ("a ANY b", ["x", "a", "c", "b", "y"], ["x", "a", "b", "y"]),
    ("a NOT b", ["x", "a", "c"], ["a", "b"]),
    ("^ (a | b)", ["b", "x"], ["c", "a"]),
    ("a ANY* b", ["a", "c", "c", "b"], ["b", "a"]),
]


def test_03_operator_table_conformance():
    with criterion(3, "operator table conformance (8 positive, 8 negative)"):
        behaviours = {"a": {"a"}, "b": {"b"}}
        for text, good, bad in TABLE_ROWS:
            *_, got = match_traces(text, [good, bad], behaviours)
            assert bool(got[0]), f"{text} should match {good}"
            assert not bool(got[1]), f"{text} should not match {bad}"


def test_04_universal_via_negation():
    with criterion(4, "universal quantification via negation (1,000 traces)"):
        rng = np.random.default_rng(7)
        letters = ["a", "b", "x", "y"]
        traces = [
            [letters[i] for i in rng.integers(0, 4, rng.integers(0, 13))]
            for _ in range(1000)
        ]
        behaviours = {"a": {"a"}, "b": {"b"}}
        *_, got = match_traces("^ (NOT a | (a b))* $", traces, behaviours)
        for trace, flag in zip(traces, got):
            always = all(
                i + 1 < len(trace) and trace[i + 1] == "b"
                for i, n in enumerate(trace)
                if n == "a"
            )
            assert bool(flag) == always, trace


def test_05_desugaring_identities():
    with criterion(5, "desugaring identities (1,000 random instances each)"):
        rng = np.random.default_rng(11)
        alphabet = ["a", "b", "c", "d"]
        for left, right in (("p ~> q", "p ANY* q"), ("p -> q", "p q")):
            remaining = 1000
            while remaining > 0:
                behaviours = {
                    name: {a for a in alphabet if rng.random() < 0.5}
                    for name in ("p", "q")
                }
                traces = [
                    [alphabet[i] for i in rng.integers(0, 4, rng.integers(0, 11))]
                    for _ in range(min(remaining, 50))
                ]
                *_, got_l = match_traces(left, traces, behaviours)
                *_, got_r = match_traces(right, traces, behaviours)
                assert np.array_equal(got_l, got_r)
                remaining -= len(traces)


def test_06_type_system_rejections():
    with criterion(6, "stable type-system error codes"):
        eng = Engine()
        eng.add_log(build_support_log())
        cases = [
            ("SELECT end_time FROM support", "LevelError"),
            ("SELECT (SELECT end_time) FROM support", "NonAggregatedSubquery"),
            ("SELECT 'a' + 1 FROM support", "TypeError"),
        ]
        for text, code in cases:
            with pytest.raises(SignalError) as exc:
                eng.run(text)
            assert exc.value.code == code, text


def test_07_optimizer_soundness():
    with criterion(7, "optimizer soundness and plan snapshots"):
        log = build_support_log()
        for text in GOLDEN_QUERIES + [
            "SELECT case_id FROM THIS_PROCESS ORDER BY case_id DESC LIMIT 1"
        ]:
            aq = analyze_query(parse_query(text), log.schema)
            plain = execute(aq, log.snapshot(None))
            opt = optimize(aq)
            fast = execute(opt, log.snapshot(scan_columns(opt.plan)))
            assert fast == plain, text
        # LIMIT slides below the projection
        lines = [
            ln.strip().split()[0]
            for ln in explain(
                optimize(
                    analyze_query(
                        parse_query("SELECT case_id FROM THIS_PROCESS LIMIT 1"),
                        log.schema,
                    )
                ).plan
            ).splitlines()
        ]
        assert lines == ["Project", "Limit", "Scan"]
        # FIRST/LAST resolve positionally, never by sorting events
        eng = Engine()
        eng.add_log(log)
        kernels.reset_counters()
        eng.run(GOLDEN_QUERIES[3])
        assert kernels.counters["positional_first_last"] > 0
        assert kernels.counters["event_sorts"] == 0


ROUND_TRIP_CONFIG = {
    "columnRoles": {
        "case_id": "case_id",
        "event_name": "event_name",
        "end_time": "end_time",
    },
    "timestampFormat": "epoch_millis",
    "levelOverrides": {"region": "case", "priority": "case", "amount": "event"},
}


def _assert_logs_equal(a, b):
    assert a.schema.case_attributes == b.schema.case_attributes
    assert a.schema.event_attributes == b.schema.event_attributes
    sa, sb = a.snapshot(None), b.snapshot(None)
    assert np.array_equal(sa.case_offsets, sb.case_offsets)
    for level in (Level.CASE, Level.EVENT):
        for name, _ in a.schema.attributes(level):
            got = sb.column(level, name).to_pylist()
            assert sa.column(level, name).to_pylist() == got, name


def test_08_flatten_ingest_round_trip():
    with criterion(8, "flatten/ingest round trip (100 random logs)"):
        rng = np.random.default_rng(5)
        cfg = CsvIngestConfig.from_dict(ROUND_TRIP_CONFIG)
        for i in range(100):
            log = synth_log(
                n_cases=int(rng.integers(3, 26)),
                mean_events=float(rng.uniform(2.5, 9.0)),
                seed=1000 + i,
                log_id=f"rt{i}",
                null_rate=float(rng.uniform(0.0, 0.25)),
            )
            csv_text = log.flatten().to_csv()
            back = ingest_csv(io.BytesIO(csv_text.encode()), cfg, log.log_id)
            _assert_logs_equal(log, back)


def test_09_performance_smoke():
    with criterion(9, "desk-scale performance smoke (100k cases / 1M events)"):
        log = synth_log(100_000, mean_events=10.5, seed=1, log_id="big")
        assert log.n_events >= 1_000_000
        eng = Engine()
        eng.add_log(log)
        kernels.reset_counters()
        t0 = time.perf_counter()
        avg = eng.run(GOLDEN_QUERIES[3])
        avg_elapsed = time.perf_counter() - t0
        assert avg.n_rows == 1 and avg.column_values("avg_cycle")[0] > 0
        t0 = time.perf_counter()
        eng.run(GOLDEN_QUERIES[0])
        pattern_elapsed = time.perf_counter() - t0
        assert avg_elapsed < 5.0, f"AVG cycle query took {avg_elapsed:.2f}s"
        assert pattern_elapsed < 10.0, f"pattern query took {pattern_elapsed:.2f}s"
        assert kernels.counters["event_sorts"] == 0
        assert kernels.counters["positional_first_last"] > 0


def test_10_http_contract():
    with criterion(10, "HTTP contract (byte-stable results, 400 diagnostics)"):
        eng = Engine()
        eng.add_log(build_support_log())
        client = TestClient(create_app(eng), raise_server_exceptions=False)
        for text in GOLDEN_QUERIES:
            expected = eng.run(text, current="support").to_json_bytes()
            for _ in range(2):
                res = client.post(
                    "/signal/queries", json={"query": text, "logId": "support"}
                )
                assert res.status_code == 200
                assert res.content == expected
        res = client.post(
            "/signal/queries", json={"query": "SELECT case_id FROM", "logId": "support"}
        )
        assert res.status_code == 400
        err = res.json()["error"]
        assert err["code"] == "SyntaxError"
        assert isinstance(err["span"], list) and len(err["span"]) == 2
