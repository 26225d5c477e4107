"""End-to-end queries over the documented support-ticket log, plus session
semantics: THIS_PROCESS binding, catalog errors, and snapshot isolation."""

import pytest

from conftest import CYCLE_1001, CYCLE_1002, T1002, build_support_log
from signalql.engine import Engine
from signalql.errors import NoCurrentProcess, UnknownLog


def id_set(result) -> set:
    return set(result.column_values("case_id"))


class TestTutorialQueries:
    def test_reopened_after_close(self, engine):
        got = engine.run(
            "SELECT case_id FROM THIS_PROCESS "
            "WHERE event_name MATCHES ('Close ticket' ~> 'Open ticket')"
        )
        assert id_set(got) == {"1002"}

    def test_literal_matching_is_case_sensitive(self, engine):
        # 'Open Ticket' (capital T) names no event in the log
        got = engine.run(
            "SELECT case_id FROM THIS_PROCESS "
            "WHERE event_name MATCHES ('Close ticket' ~> 'Open Ticket')"
        )
        assert id_set(got) == set()

    def test_closed_while_blocked(self, engine):
        got = engine.run(
            "SELECT case_id FROM THIS_PROCESS "
            "WHERE (event_name = 'Close ticket' AND \"status\" = 'blocked')"
        )
        assert id_set(got) == {"1002"}

    def test_closed_while_blocked_then_reopened(self, engine):
        got = engine.run(
            "SELECT case_id\n"
            "FROM THIS_PROCESS\n"
            "WHERE BEHAVIOUR\n"
            "(event_name = 'Close ticket' AND \"status\" = 'blocked')\n"
            "AS closed_while_blocked\n"
            "MATCHES(closed_while_blocked ~> 'Open ticket')"
        )
        assert id_set(got) == {"1002"}

    def test_cycle_times(self, engine):
        got = engine.run(
            "SELECT case_id, (SELECT LAST(end_time) - FIRST(end_time)) AS cycle "
            "FROM support"
        )
        assert dict(got.rows()) == {"1001": CYCLE_1001, "1002": CYCLE_1002}

    def test_average_cycle_time(self, engine):
        got = engine.run(
            "SELECT AVG((SELECT LAST(end_time) - FIRST(end_time))) AS avg_cycle "
            "FROM support"
        )
        assert got.column_values("avg_cycle") == [200208880]

    def test_last_open_is_reopen(self, engine):
        got = engine.run(
            "SELECT case_id, (SELECT LAST(end_time) WHERE event_name = 'Open ticket') "
            "AS last_open FROM support WHERE case_id = '1002'"
        )
        assert got.rows() == [["1002", T1002[3]]]


class TestSession:
    def test_this_process_needs_a_binding(self, support_log):
        eng = Engine()
        eng.add_log(support_log, make_current=False)
        with pytest.raises(NoCurrentProcess):
            eng.run("SELECT case_id FROM THIS_PROCESS")
        eng.use("support")
        assert eng.run("SELECT case_id FROM THIS_PROCESS").n_rows == 2

    def test_per_call_override(self, engine):
        engine.add_log(build_support_log("mirror"), make_current=False)
        got = engine.run("SELECT case_id FROM THIS_PROCESS", current="mirror")
        assert got.n_rows == 2
        assert engine.current == "support"

    def test_named_log_ignores_binding(self, support_log):
        eng = Engine()
        eng.add_log(support_log, make_current=False)
        assert eng.run("SELECT case_id FROM support").n_rows == 2

    def test_unknown_log(self, engine):
        with pytest.raises(UnknownLog):
            engine.run("SELECT case_id FROM nope")
        with pytest.raises(UnknownLog):
            engine.use("nope")

    def test_drop_clears_binding(self, engine):
        engine.drop("support")
        with pytest.raises(NoCurrentProcess):
            engine.run("SELECT case_id FROM THIS_PROCESS")

    def test_later_appends_are_visible_to_later_queries(self, engine, support_log):
        assert engine.run("SELECT case_id FROM support").n_rows == 2
        support_log.append_case(
            {"case_id": "1003", "customer_id": "C9", "final_status": "done"},
            [{"event_name": "Open ticket", "end_time": 1, "status": "none"}],
        )
        assert engine.run("SELECT case_id FROM support").n_rows == 3

    def test_flatten_through_engine(self, engine):
        got = engine.run("SELECT * FROM FLATTEN(support)")
        assert got.n_rows == 7
        assert got.names[:3] == ["case_id", "customer_id", "final_status"]

    def test_explain_is_textual(self, engine):
        text = engine.explain("SELECT case_id FROM support LIMIT 1")
        assert "Scan support" in text and text.startswith("Project")
