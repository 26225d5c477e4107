"""Command line front end: REPL, batch runner, ingest check, HTTP server.

Logs live in a data directory (--data or SIGNAL_DATA_DIR): `<id>.xes` files
load as-is, `<id>.csv` / `<id>.tsv` files need an `<id>.json` sidecar holding
the ingest config. All matching files are loaded at startup.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from pathlib import Path

from .engine import Engine
from .errors import QueryError, SignalError
from .ingest import CsvIngestConfig, ingest_csv, ingest_xes
from .result import ResultTable
from .store import EventLog, Level

PROMPT = "signal> "
CONT_PROMPT = "   ...> "


def split_statements(text: str) -> list[str]:
    """Split on ';' outside quotes and comments; quoting matches the lexer."""
    out: list[str] = []
    buf: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in ("'", '"'):
            buf.append(ch)
            i += 1
            while i < n:
                buf.append(text[i])
                if text[i] == ch:
                    if i + 1 < n and text[i + 1] == ch:
                        buf.append(ch)
                        i += 2
                        continue
                    i += 1
                    break
                i += 1
            continue
        if text.startswith("--", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            buf.append(text[i:j])
            i = j
            continue
        if ch == ";":
            out.append("".join(buf))
            buf = []
            i += 1
            continue
        buf.append(ch)
        i += 1
    out.append("".join(buf))
    return [s for s in (s.strip() for s in out) if s]


def render_diagnostic(text: str, err: SignalError) -> str:
    lines = [f"{err.code}: {err.message}"]
    if isinstance(err, QueryError) and err.span is not None:
        start = err.span.start
        line_start = text.rfind("\n", 0, start) + 1
        line_end = text.find("\n", start)
        if line_end < 0:
            line_end = len(text)
        source_line = text[line_start:line_end]
        col = start - line_start
        width = max(1, min(err.span.end, line_end) - start)
        lines.append(source_line)
        lines.append(" " * col + "^" * width)
    return "\n".join(lines)


def render(result: ResultTable, fmt: str) -> str:
    if fmt == "json":
        return result.to_json_bytes().decode("utf-8")
    if fmt == "csv":
        return result.to_csv()
    return result.pretty()


def load_data_dir(engine: Engine, data_dir: str | os.PathLike) -> list[str]:
    loaded: list[str] = []
    root = Path(data_dir)
    for path in sorted(root.iterdir()):
        suffix = path.suffix.lower()
        if suffix == ".xes":
            ingest_xes(path, path.stem, engine.catalog)
            loaded.append(path.stem)
        elif suffix in (".csv", ".tsv"):
            sidecar = path.with_suffix(".json")
            if not sidecar.exists():
                print(f"skipping {path.name}: no {sidecar.name} ingest config", file=sys.stderr)
                continue
            cfg = CsvIngestConfig.from_dict(json.loads(sidecar.read_text()))
            ingest_csv(path, cfg, path.stem, engine.catalog)
            loaded.append(path.stem)
    return loaded


def _schema_text(log: EventLog) -> str:
    lines = [f"{log.log_id}: {log.n_cases} cases, {log.n_events} events"]
    for level, title in ((Level.CASE, "case"), (Level.EVENT, "event")):
        lines.append(f"{title}:")
        for name, stype in log.schema.attributes(level):
            lines.append(f"  {name}  {stype}")
    return "\n".join(lines)


def _build_engine(args) -> Engine:
    engine = Engine()
    data = getattr(args, "data", None) or os.environ.get("SIGNAL_DATA_DIR")
    if data:
        try:
            load_data_dir(engine, data)
        except SignalError as err:
            print(f"while loading {data}: {err.code}: {err.message}", file=sys.stderr)
            raise SystemExit(2)
    engine.current = None
    log_id = getattr(args, "log", None)
    if log_id:
        try:
            engine.use(log_id)
        except SignalError as err:
            print(f"{err.code}: {err.message}", file=sys.stderr)
            raise SystemExit(2)
    return engine


# --- subcommands ----------------------------------------------------------


def cmd_repl(args) -> int:
    engine = _build_engine(args)
    fmt = "table"
    logs = engine.catalog.list_logs()
    if logs:
        print("loaded: " + ", ".join(l.log_id for l in logs))
    pending = ""
    while True:
        try:
            line = input(CONT_PROMPT if pending else PROMPT)
        except EOFError:
            print()
            return 0
        except KeyboardInterrupt:
            print()
            pending = ""
            continue
        if not pending and line.strip().startswith("\\"):
            if _meta_command(engine, line.strip(), fmt_box := [fmt]):
                return 0
            fmt = fmt_box[0]
            continue
        pending = (pending + "\n" + line) if pending else line
        if ";" not in line:
            if pending.strip():
                continue
            pending = ""
            continue
        text = pending
        pending = ""
        for stmt in split_statements(text):
            try:
                print(render(engine.run(stmt), fmt))
            except SignalError as err:
                print(render_diagnostic(stmt, err))
    return 0


def _meta_command(engine: Engine, line: str, fmt_box: list[str]) -> bool:
    """Returns True when the REPL should exit."""
    parts = line.rstrip(";").split()
    cmd, args = parts[0], parts[1:]
    if cmd in ("\\quit", "\\q"):
        return True
    if cmd == "\\logs":
        for log in engine.catalog.list_logs():
            marker = "*" if log.log_id == engine.current else " "
            print(f"{marker} {log.log_id}  {log.n_cases} cases, {log.n_events} events")
        return False
    if cmd == "\\open":
        if len(args) != 1:
            print("usage: \\open <log_id>")
            return False
        try:
            engine.use(args[0])
            print(f"current log: {args[0]}")
        except SignalError as err:
            print(f"{err.code}: {err.message}")
        return False
    if cmd == "\\schema":
        target = args[0] if args else engine.current
        if target is None:
            print("no current log; \\open one first")
            return False
        try:
            print(_schema_text(engine.catalog.get(target)))
        except SignalError as err:
            print(f"{err.code}: {err.message}")
        return False
    if cmd == "\\format":
        if len(args) != 1 or args[0] not in ("table", "csv", "json"):
            print("usage: \\format table|csv|json")
            return False
        fmt_box[0] = args[0]
        return False
    print(f"unknown command {cmd}; try \\open \\logs \\schema \\format \\quit")
    return False


def cmd_run(args) -> int:
    engine = _build_engine(args)
    text = Path(args.file).read_text(encoding="utf-8")
    for stmt in split_statements(text):
        try:
            result = engine.run(stmt)
        except SignalError as err:
            print(render_diagnostic(stmt, err), file=sys.stderr)
            return 1
        print(render(result, args.format))
    return 0


def cmd_ingest(args) -> int:
    path = Path(args.file)
    is_xes = path.suffix.lower() == ".xes"
    try:
        if is_xes:
            log = ingest_xes(path, args.log)
        else:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
            log = ingest_csv(path, CsvIngestConfig.from_dict(raw), args.log)
    except SignalError as err:
        row = getattr(err, "row", None)
        where = f" (row {row})" if row is not None else ""
        print(f"{err.code}: {err.message}{where}", file=sys.stderr)
        return 1
    print(_schema_text(log))
    data = args.data or os.environ.get("SIGNAL_DATA_DIR")
    if data:
        root = Path(data)
        root.mkdir(parents=True, exist_ok=True)
        shutil.copy(path, root / f"{args.log}{path.suffix.lower()}")
        if not is_xes:
            shutil.copy(args.config, root / f"{args.log}.json")
        print(f"stored as {args.log} in {root}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .http_api import create_app

    engine = _build_engine(args)
    uvicorn.run(create_app(engine), host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="signal", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("repl", help="interactive session")
    p.add_argument("--log", help="log id to bind THIS_PROCESS to")
    p.add_argument("--data", help="data directory (default: $SIGNAL_DATA_DIR)")
    p.set_defaults(fn=cmd_repl)

    p = sub.add_parser("run", help="execute ';'-terminated queries from a file")
    p.add_argument("file")
    p.add_argument("--log", help="log id to bind THIS_PROCESS to")
    p.add_argument("--data", help="data directory (default: $SIGNAL_DATA_DIR)")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("ingest", help="validate a log file, optionally store it")
    p.add_argument("file")
    p.add_argument("--config", help="ingest config JSON (required for csv/tsv)")
    p.add_argument("--log", required=True, help="log id to assign")
    p.add_argument("--data", help="data directory to store into")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--log", help="log id to bind THIS_PROCESS to")
    p.add_argument("--data", help="data directory (default: $SIGNAL_DATA_DIR)")
    p.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    if args.cmd == "ingest" and args.config is None and not args.file.lower().endswith(".xes"):
        parser.error("--config is required for csv/tsv input")
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
