"""Event-log ingestion from CSV/TSV files and a minimal XES subset.

CSV columns are mapped to roles (case_id / event_name / end_time /
start_time / attribute). Attribute columns without an explicit level override
are classified case-level iff their value is constant within every case.
Timestamps are either integer epoch milliseconds or a configured date-time
pattern; mixing formats in one column is an error.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, IO, Iterable, Mapping
from xml.etree import ElementTree

from .errors import (
    EmptyCase,
    InconsistentCaseAttribute,
    InvalidIngestConfig,
    MalformedXml,
    MissingConceptName,
    MissingHeader,
    MissingRequiredValue,
    MissingTimestamp,
    TypeMismatch,
    UnparseableTimestamp,
)
from .store import (
    CASE_ID,
    END_TIME,
    EVENT_NAME,
    START_TIME,
    Catalog,
    EventLog,
    Level,
    ScalarType,
    Schema,
)

ROLES = ("case_id", "event_name", "end_time", "start_time", "attribute")
EPOCH_MILLIS = "epoch_millis"
ISO8601 = "iso8601"


@dataclass
class CsvIngestConfig:
    delimiter: str = ","
    column_roles: dict[str, str] = field(default_factory=dict)
    timestamp_format: str = EPOCH_MILLIS
    level_overrides: dict[str, Level] = field(default_factory=dict)
    type_overrides: dict[str, ScalarType] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "CsvIngestConfig":
        """Build from the flat key-value wire form used by the CLI and API."""
        known = {"delimiter", "columnRoles", "timestampFormat", "levelOverrides", "typeOverrides"}
        unknown = set(doc) - known
        if unknown:
            raise InvalidIngestConfig(f"unknown config keys: {sorted(unknown)}")
        try:
            levels = {k: Level(v) for k, v in doc.get("levelOverrides", {}).items()}
            types = {k: ScalarType(v) for k, v in doc.get("typeOverrides", {}).items()}
        except ValueError as exc:
            raise InvalidIngestConfig(str(exc)) from None
        return cls(
            delimiter=doc.get("delimiter", ","),
            column_roles={k: v for k, v in doc.get("columnRoles", {}).items()},
            timestamp_format=doc.get("timestampFormat", EPOCH_MILLIS),
            level_overrides=levels,
            type_overrides=types,
        )


def _open_text(source: str | os.PathLike | IO) -> IO:
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data)
    return open(source, "r", encoding="utf-8", newline="")


def _parse_timestamp(cell: str, fmt: str, row: int) -> int:
    try:
        if fmt == EPOCH_MILLIS:
            return int(cell)
        if fmt == ISO8601:
            dt = datetime.fromisoformat(cell.replace("Z", "+00:00"))
        else:
            dt = datetime.strptime(cell, fmt)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return round(dt.timestamp() * 1000)
    except ValueError:
        err = UnparseableTimestamp(f"row {row}: cannot parse timestamp {cell!r} with format {fmt!r}")
        err.row = row
        raise err from None


def _try_number(cell: str) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        return None
    if math.isnan(value) or math.isinf(value):
        return None
    return value


def _infer_type(cells: Iterable[str]) -> ScalarType:
    """Boolean if everything is true/false, else Number, else String."""
    non_empty = [c for c in cells if c != ""]
    if not non_empty:
        return ScalarType.STRING
    if all(c.lower() in ("true", "false") for c in non_empty):
        return ScalarType.BOOLEAN
    if all(_try_number(c) is not None for c in non_empty):
        return ScalarType.NUMBER
    return ScalarType.STRING


def _parse_cell(cell: str, stype: ScalarType, fmt: str, row: int, column: str) -> Any:
    if cell == "":
        return None
    if stype is ScalarType.STRING:
        return cell
    if stype is ScalarType.BOOLEAN:
        low = cell.lower()
        if low not in ("true", "false"):
            raise TypeMismatch(f"row {row}: column {column!r} expects Boolean, got {cell!r}")
        return low == "true"
    if stype is ScalarType.NUMBER:
        value = _try_number(cell)
        if value is None:
            raise TypeMismatch(f"row {row}: column {column!r} expects Number, got {cell!r}")
        return value
    if stype is ScalarType.TIMESTAMP:
        return _parse_timestamp(cell, fmt, row)
    try:
        return int(cell)  # Duration millis
    except ValueError:
        raise TypeMismatch(f"row {row}: column {column!r} expects Duration millis, got {cell!r}") from None


def infer_attribute_levels(
    grouped_rows: Mapping[str, list[dict[str, Any]]],
    columns: Iterable[str],
    overrides: Mapping[str, Level] | None = None,
) -> dict[str, Level]:
    """Case-level iff the value is constant within every case; else event-level.

    Cases with a single event are vacuously constant, so single-event logs
    classify everything as case-level unless overridden.
    """
    overrides = overrides or {}
    levels: dict[str, Level] = {}
    for col in columns:
        if col in overrides:
            levels[col] = overrides[col]
            continue
        constant = all(
            len({repr(r.get(col)) for r in rows}) <= 1 for rows in grouped_rows.values()
        )
        levels[col] = Level.CASE if constant else Level.EVENT
    return levels


def ingest_csv(
    source: str | os.PathLike | IO,
    config: CsvIngestConfig,
    log_id: str,
    catalog: Catalog | None = None,
) -> EventLog:
    roles = dict(config.column_roles)
    for col, role in roles.items():
        if role not in ROLES:
            raise InvalidIngestConfig(f"unknown role {role!r} for column {col!r}")
    for role in ("case_id", "event_name", "end_time"):
        n = sum(1 for r in roles.values() if r == role)
        if n != 1:
            raise InvalidIngestConfig(f"exactly one column must be mapped to {role}, found {n}")
    if sum(1 for r in roles.values() if r == "start_time") > 1:
        raise InvalidIngestConfig("at most one column may be mapped to start_time")

    with _open_text(source) as fh:
        reader = csv.reader(fh, delimiter=config.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeader("input has no header row") from None
        if len(set(header)) != len(header):
            raise InvalidIngestConfig("duplicate column names in header")
        missing = [c for c in roles if c not in header]
        if missing:
            raise InvalidIngestConfig(f"role mapping references unknown columns: {missing}")
        rows = [row + [""] * (len(header) - len(row)) for row in reader]

    col_idx = {name: i for i, name in enumerate(header)}
    role_of = {name: roles.get(name, "attribute") for name in header}
    id_col = next(c for c, r in roles.items() if r == "case_id")
    name_col = next(c for c, r in roles.items() if r == "event_name")
    end_col = next(c for c, r in roles.items() if r == "end_time")
    start_col = next((c for c, r in roles.items() if r == "start_time"), None)
    attr_cols = [c for c in header if role_of[c] == "attribute"]

    # Attribute column types: overrides win, otherwise infer from all cells.
    attr_types: dict[str, ScalarType] = {}
    for col in attr_cols:
        attr_types[col] = config.type_overrides.get(col) or _infer_type(
            row[col_idx[col]] for row in rows
        )

    # Group rows by case id, keeping first-appearance case order.
    grouped: dict[str, list[tuple[int, list[str]]]] = {}
    for i, row in enumerate(rows):
        rowno = i + 1
        cid = row[col_idx[id_col]]
        if cid == "":
            raise MissingRequiredValue(f"row {rowno}: empty case_id")
        if row[col_idx[name_col]] == "":
            raise MissingRequiredValue(f"row {rowno}: empty event_name")
        if row[col_idx[end_col]] == "":
            raise MissingRequiredValue(f"row {rowno}: empty end_time")
        grouped.setdefault(cid, []).append((rowno, row))

    grouped_dicts = {
        cid: [{c: row[col_idx[c]] for c in attr_cols} for _, row in case_rows]
        for cid, case_rows in grouped.items()
    }
    levels = infer_attribute_levels(grouped_dicts, attr_cols, config.level_overrides)

    case_attrs = [(CASE_ID, ScalarType.STRING)] + [
        (c, attr_types[c]) for c in attr_cols if levels[c] is Level.CASE
    ]
    event_attrs = [(EVENT_NAME, ScalarType.STRING), (END_TIME, ScalarType.TIMESTAMP)]
    if start_col is not None:
        event_attrs.append((START_TIME, ScalarType.TIMESTAMP))
    event_attrs += [(c, attr_types[c]) for c in attr_cols if levels[c] is Level.EVENT]
    schema = Schema.make(case_attrs, event_attrs)

    fmt = config.timestamp_format
    case_cols: dict[str, list] = {name: [] for name, _ in case_attrs}
    event_cols: dict[str, list] = {name: [] for name, _ in event_attrs}
    offsets = [0]
    for cid, case_rows in grouped.items():
        case_cols[CASE_ID].append(cid)
        for col in attr_cols:
            if levels[col] is not Level.CASE:
                continue
            cells = {row[col_idx[col]] for _, row in case_rows}
            if len(cells) > 1:
                raise InconsistentCaseAttribute(
                    f"case {cid!r}: case-level column {col!r} has multiple values {sorted(cells)!r}"
                )
            rowno = case_rows[0][0]
            case_cols[col].append(_parse_cell(cells.pop(), attr_types[col], fmt, rowno, col))
        for rowno, row in case_rows:
            event_cols[EVENT_NAME].append(row[col_idx[name_col]])
            event_cols[END_TIME].append(_parse_timestamp(row[col_idx[end_col]], fmt, rowno))
            if start_col is not None:
                cell = row[col_idx[start_col]]
                event_cols[START_TIME].append(
                    None if cell == "" else _parse_timestamp(cell, fmt, rowno)
                )
            for col in attr_cols:
                if levels[col] is Level.EVENT:
                    event_cols[col].append(_parse_cell(row[col_idx[col]], attr_types[col], fmt, rowno, col))
        offsets.append(offsets[-1] + len(case_rows))

    log = EventLog.from_arrays(log_id, schema, case_cols, event_cols, offsets)
    if catalog is not None:
        catalog.add(log)
    return log


# --- XES -------------------------------------------------------------------

_XES_TYPE = {
    "string": ScalarType.STRING,
    "int": ScalarType.NUMBER,
    "float": ScalarType.NUMBER,
    "boolean": ScalarType.BOOLEAN,
    "date": ScalarType.TIMESTAMP,
}

_CONCEPT_NAME = "concept:name"
_TIME_TIMESTAMP = "time:timestamp"


def _tag(elem) -> str:
    return elem.tag.rsplit("}", 1)[-1]


def _xes_value(kind: str, raw: str):
    if kind == "string":
        return raw
    if kind == "int":
        return float(int(raw))
    if kind == "float":
        return float(raw)
    if kind == "boolean":
        return raw.lower() == "true"
    dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return round(dt.timestamp() * 1000)


def _xes_attributes(elem) -> dict[str, tuple[str, Any]]:
    """Direct typed children of a trace/event as {key: (xes_kind, value)}."""
    out: dict[str, tuple[str, Any]] = {}
    for child in elem:
        kind = _tag(child)
        if kind not in _XES_TYPE:
            continue  # nested containers and extensions are ignored
        key = child.get("key")
        raw = child.get("value")
        if key is None or raw is None:
            continue
        try:
            out[key] = (kind, _xes_value(kind, raw))
        except ValueError:
            raise MalformedXml(f"cannot parse {kind} attribute {key!r} value {raw!r}") from None
    return out


def ingest_xes(
    source: str | os.PathLike | IO,
    log_id: str,
    catalog: Catalog | None = None,
) -> EventLog:
    """Minimal XES import: concept and time extensions, one case per trace."""
    try:
        with _open_text(source) as fh:
            root = ElementTree.parse(fh).getroot()
    except ElementTree.ParseError as exc:
        raise MalformedXml(str(exc)) from None

    traces = [el for el in root if _tag(el) == "trace"]
    case_attr_types: dict[str, ScalarType] = {}
    event_attr_types: dict[str, ScalarType] = {}
    parsed: list[tuple[str, dict, list[dict]]] = []
    for t_i, trace in enumerate(traces):
        t_attrs = _xes_attributes(trace)
        if _CONCEPT_NAME not in t_attrs:
            raise MissingConceptName(f"trace #{t_i} has no concept:name")
        cid = str(t_attrs.pop(_CONCEPT_NAME)[1])
        case_values: dict[str, Any] = {}
        for key, (kind, value) in t_attrs.items():
            _note_type(case_attr_types, key, _XES_TYPE[kind])
            case_values[key] = value
        events = []
        for e_i, event in enumerate(el for el in trace if _tag(el) == "event"):
            e_attrs = _xes_attributes(event)
            if _CONCEPT_NAME not in e_attrs:
                raise MissingConceptName(f"trace {cid!r} event #{e_i} has no concept:name")
            if _TIME_TIMESTAMP not in e_attrs:
                raise MissingTimestamp(f"trace {cid!r} event #{e_i} has no time:timestamp")
            ev: dict[str, Any] = {
                EVENT_NAME: str(e_attrs.pop(_CONCEPT_NAME)[1]),
                END_TIME: e_attrs.pop(_TIME_TIMESTAMP)[1],
            }
            for key, (kind, value) in e_attrs.items():
                _note_type(event_attr_types, key, _XES_TYPE[kind])
                ev[key] = value
            events.append(ev)
        parsed.append((cid, case_values, events))

    # Trace attributes that collide with event attribute names get a prefix so
    # the schema stays unambiguous.
    renames = {}
    for key in list(case_attr_types):
        if key.lower() in {k.lower() for k in event_attr_types} or key.lower() in (
            EVENT_NAME,
            END_TIME,
            CASE_ID,
        ):
            renames[key] = f"case_{key}"
    schema = Schema.make(
        [(CASE_ID, ScalarType.STRING)]
        + [(renames.get(k, k), t) for k, t in case_attr_types.items()],
        [(EVENT_NAME, ScalarType.STRING), (END_TIME, ScalarType.TIMESTAMP)]
        + list(event_attr_types.items()),
    )

    log = EventLog(log_id, schema)
    for cid, case_values, events in parsed:
        if not events:
            raise EmptyCase(f"trace {cid!r} has no events")
        values = {renames.get(k, k): v for k, v in case_values.items()}
        values[CASE_ID] = cid
        log.append_case(values, events)
    if catalog is not None:
        catalog.add(log)
    return log


def _note_type(types: dict[str, ScalarType], key: str, stype: ScalarType) -> None:
    prev = types.setdefault(key, stype)
    if prev is not stype:
        raise TypeMismatch(f"attribute {key!r} appears with conflicting types {prev} and {stype}")
