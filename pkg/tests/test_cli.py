"""Statement splitting, diagnostics rendering, data-dir loading, and the
repl/run/ingest subcommands driven through main()."""

import json

import pytest

from conftest import build_support_log
from signalql.cli import (
    _meta_command,
    load_data_dir,
    main,
    render,
    render_diagnostic,
    split_statements,
)
from signalql.engine import Engine
from signalql.errors import SignalError

MINI_XES = """<?xml version="1.0" encoding="UTF-8"?>
<log xmlns="http://www.xes-standard.org/">
  <trace>
    <string key="concept:name" value="t1"/>
    <event>
      <string key="concept:name" value="Open"/>
      <date key="time:timestamp" value="2020-01-01T10:00:00.000Z"/>
    </event>
    <event>
      <string key="concept:name" value="Close"/>
      <date key="time:timestamp" value="2020-01-01T11:00:00.000Z"/>
    </event>
  </trace>
  <trace>
    <string key="concept:name" value="t2"/>
    <event>
      <string key="concept:name" value="Open"/>
      <date key="time:timestamp" value="2020-01-02T10:00:00.000Z"/>
    </event>
  </trace>
</log>
"""

CSV = "case,activity,ts\np1,Open,2020-03-01T08:00:00Z\np1,Close,2020-03-01T09:00:00Z\n"
CSV_CONFIG = {
    "columnRoles": {"case": "case_id", "activity": "event_name", "ts": "end_time"},
    "timestampFormat": "iso8601",
}


class TestSplitStatements:
    def test_basic(self):
        assert split_statements("SELECT 1; SELECT 2;") == ["SELECT 1", "SELECT 2"]

    def test_trailing_statement_without_semicolon(self):
        assert split_statements("SELECT 1; SELECT 2") == ["SELECT 1", "SELECT 2"]

    def test_semicolon_in_string(self):
        assert split_statements("SELECT 'a;b'; SELECT 2") == ["SELECT 'a;b'", "SELECT 2"]

    def test_semicolon_in_quoted_identifier(self):
        assert split_statements('SELECT "x;y" FROM t') == ['SELECT "x;y" FROM t']

    def test_doubled_quote_escape(self):
        assert split_statements("SELECT 'it''s;fine'; SELECT 2") == [
            "SELECT 'it''s;fine'", "SELECT 2",
        ]

    def test_semicolon_in_comment(self):
        text = "SELECT 1 -- not here;\n; SELECT 2"
        assert split_statements(text) == ["SELECT 1 -- not here;", "SELECT 2"]

    def test_empty_pieces_dropped(self):
        assert split_statements(";;  ;") == []


class TestRenderDiagnostic:
    def run_err(self, text):
        eng = Engine()
        eng.add_log(build_support_log())
        with pytest.raises(SignalError) as exc:
            eng.run(text)
        return exc.value

    def test_caret_underlines_span(self):
        text = "SELECT wat FROM support"
        out = render_diagnostic(text, self.run_err(text)).splitlines()
        assert out[0] == "UnknownColumn: unknown column 'wat'"
        assert out[1] == text
        assert out[2] == "       ^^^"

    def test_caret_on_later_line(self):
        text = "SELECT case_id\nFROM support\nWHERE wat > 1"
        out = render_diagnostic(text, self.run_err(text)).splitlines()
        assert out[1] == "WHERE wat > 1"
        assert out[2] == "      ^^^"

    def test_spanless_errors_are_one_line(self):
        err = self.run_err("SELECT case_id FROM ghost")
        assert render_diagnostic("SELECT case_id FROM ghost", err).splitlines() == [
            "UnknownLog: no log named 'ghost'"
        ]


class TestRender:
    @pytest.fixture
    def result(self):
        eng = Engine()
        eng.add_log(build_support_log())
        return eng.run("SELECT case_id, final_status FROM support ORDER BY case_id")

    def test_table(self, result):
        out = render(result, "table")
        assert "case_id" in out and out.endswith("(2 rows)")

    def test_csv(self, result):
        assert render(result, "csv") == (
            "case_id,final_status\n1001,done\n1002,blocked\n"
        )

    def test_json(self, result):
        body = json.loads(render(result, "json"))
        assert body["rows"] == [["1001", "done"], ["1002", "blocked"]]


class TestDataDir:
    def test_loads_xes_and_csv_sidecar(self, tmp_path, capsys):
        (tmp_path / "mini.xes").write_text(MINI_XES)
        (tmp_path / "piped.csv").write_text(CSV)
        (tmp_path / "piped.json").write_text(json.dumps(CSV_CONFIG))
        (tmp_path / "orphan.csv").write_text(CSV)
        eng = Engine()
        assert load_data_dir(eng, tmp_path) == ["mini", "piped"]
        assert {l.log_id for l in eng.catalog.list_logs()} == {"mini", "piped"}
        assert "orphan.csv" in capsys.readouterr().err

    def test_env_var_fallback(self, tmp_path, monkeypatch, capsys):
        (tmp_path / "mini.xes").write_text(MINI_XES)
        sql = tmp_path / "q.sql"
        sql.write_text("SELECT case_id FROM mini;")
        monkeypatch.setenv("SIGNAL_DATA_DIR", str(tmp_path))
        assert main(["run", str(sql)]) == 0
        assert "t1" in capsys.readouterr().out


class TestRunCommand:
    def write_data(self, tmp_path):
        (tmp_path / "mini.xes").write_text(MINI_XES)
        return tmp_path

    def test_runs_statements(self, tmp_path, capsys):
        data = self.write_data(tmp_path)
        sql = tmp_path / "q.sql"
        sql.write_text(
            "SELECT case_id FROM THIS_PROCESS;\n"
            "SELECT COUNT(*) AS n FROM THIS_PROCESS;\n"
        )
        code = main(["run", str(sql), "--data", str(data), "--log", "mini"])
        out = capsys.readouterr().out
        assert code == 0
        assert "(2 rows)" in out and "(1 row)" in out

    def test_json_format(self, tmp_path, capsys):
        data = self.write_data(tmp_path)
        sql = tmp_path / "q.sql"
        sql.write_text("SELECT case_id FROM mini ORDER BY case_id;")
        assert main(["run", str(sql), "--data", str(data), "--format", "json"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["rows"] == [["t1"], ["t2"]]

    def test_failure_prints_caret_and_exits_nonzero(self, tmp_path, capsys):
        data = self.write_data(tmp_path)
        sql = tmp_path / "q.sql"
        sql.write_text("SELECT wat FROM mini;")
        assert main(["run", str(sql), "--data", str(data)]) == 1
        err = capsys.readouterr().err
        assert "UnknownColumn" in err and "^^^" in err

    def test_unknown_binding_exits_two(self, tmp_path, capsys):
        data = self.write_data(tmp_path)
        sql = tmp_path / "q.sql"
        sql.write_text("SELECT 1 FROM mini;")
        with pytest.raises(SystemExit) as exc:
            main(["run", str(sql), "--data", str(data), "--log", "ghost"])
        assert exc.value.code == 2
        assert "UnknownLog" in capsys.readouterr().err


class TestIngestCommand:
    def test_csv_summary(self, tmp_path, capsys):
        src = tmp_path / "piped.csv"
        src.write_text(CSV)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(CSV_CONFIG))
        code = main(["ingest", str(src), "--config", str(cfg), "--log", "piped"])
        out = capsys.readouterr().out
        assert code == 0
        assert "piped: 1 cases, 2 events" in out
        assert "event_name" in out

    def test_store_into_data_dir(self, tmp_path, capsys):
        src = tmp_path / "in.csv"
        src.write_text(CSV)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(CSV_CONFIG))
        data = tmp_path / "store"
        code = main(
            ["ingest", str(src), "--config", str(cfg), "--log", "piped", "--data", str(data)]
        )
        assert code == 0
        assert (data / "piped.csv").exists() and (data / "piped.json").exists()
        # the stored pair is loadable as-is
        eng = Engine()
        assert load_data_dir(eng, data) == ["piped"]

    def test_bad_timestamp_reports_row(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("case,activity,ts\np1,Open,whenever\n")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(CSV_CONFIG))
        assert main(["ingest", str(src), "--config", str(cfg), "--log", "bad"]) == 1
        err = capsys.readouterr().err
        assert "UnparseableTimestamp" in err and "(row 1)" in err

    def test_csv_requires_config(self, tmp_path, capsys):
        src = tmp_path / "x.csv"
        src.write_text(CSV)
        with pytest.raises(SystemExit) as exc:
            main(["ingest", str(src), "--log", "x"])
        assert exc.value.code == 2


class TestRepl:
    def run_repl(self, tmp_path, monkeypatch, lines):
        (tmp_path / "mini.xes").write_text(MINI_XES)
        feed = iter(lines)

        def fake_input(prompt=""):
            try:
                return next(feed)
            except StopIteration:
                raise EOFError

        monkeypatch.setattr("builtins.input", fake_input)
        return main(["repl", "--data", str(tmp_path), "--log", "mini"])

    def test_session(self, tmp_path, monkeypatch, capsys):
        code = self.run_repl(
            tmp_path,
            monkeypatch,
            [
                "\\logs",
                "SELECT case_id",
                "FROM THIS_PROCESS;",
                "\\format csv",
                "SELECT COUNT(*) AS n FROM THIS_PROCESS;",
                "\\quit",
            ],
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "* mini" in out            # current log is starred
        assert "(2 rows)" in out          # multi-line statement ran
        assert "n\n2\n" in out            # csv format took effect

    def test_query_error_keeps_session_alive(self, tmp_path, monkeypatch, capsys):
        code = self.run_repl(
            tmp_path,
            monkeypatch,
            ["SELECT wat FROM mini;", "SELECT case_id FROM mini;"],
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "UnknownColumn" in out and "(2 rows)" in out

    def test_meta_commands_direct(self, capsys):
        eng = Engine()
        eng.add_log(build_support_log())
        box = ["table"]
        assert _meta_command(eng, "\\quit", box) is True
        assert _meta_command(eng, "\\format json", box) is False
        assert box[0] == "json"
        _meta_command(eng, "\\format yaml", box)
        assert box[0] == "json"
        _meta_command(eng, "\\open ghost", box)
        _meta_command(eng, "\\schema", box)
        _meta_command(eng, "\\wat", box)
        out = capsys.readouterr().out
        assert "usage: \\format" in out
        assert "UnknownLog" in out
        assert "support: 2 cases, 7 events" in out
        assert "unknown command" in out
