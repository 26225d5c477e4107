"""Columnar event-log store.

An event log is a table of cases; each case carries a nested table of events
kept in end-time order (ties keep ingestion order, so the stored sequence is a
total order and queries never re-sort). Case and event attributes live in
separate columns; string columns are dictionary-encoded.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateCaseId,
    DuplicateLogId,
    EmptyCase,
    InvalidSchema,
    MissingRequiredField,
    TypeMismatch,
    UnknownColumn,
    UnknownLog,
)

CASE_ID = "case_id"
EVENT_NAME = "event_name"
END_TIME = "end_time"
START_TIME = "start_time"

REQUIRED_CASE = (CASE_ID,)
REQUIRED_EVENT = (EVENT_NAME, END_TIME)


class ScalarType(Enum):
    BOOLEAN = "Boolean"
    NUMBER = "Number"
    STRING = "String"
    TIMESTAMP = "Timestamp"  # integer milliseconds since the Unix epoch
    DURATION = "Duration"    # signed integer milliseconds

    def __str__(self) -> str:
        return self.value


class Level(Enum):
    CASE = "case"
    EVENT = "event"

    def __str__(self) -> str:
        return self.value


_NUMPY_DTYPE = {
    ScalarType.BOOLEAN: np.bool_,
    ScalarType.NUMBER: np.float64,
    ScalarType.STRING: np.int32,   # dictionary codes
    ScalarType.TIMESTAMP: np.int64,
    ScalarType.DURATION: np.int64,
}

_NULL_SENTINEL = {
    ScalarType.BOOLEAN: False,
    ScalarType.NUMBER: np.nan,
    ScalarType.STRING: -1,
    ScalarType.TIMESTAMP: 0,
    ScalarType.DURATION: 0,
}


def check_value(stype: ScalarType, value: Any, column: str) -> Any:
    """Validate and normalize one cell; None passes through as NULL."""
    if value is None:
        return None
    if stype is ScalarType.BOOLEAN:
        if not isinstance(value, bool):
            raise TypeMismatch(f"column {column!r} expects Boolean, got {value!r}")
        return value
    if stype is ScalarType.NUMBER:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(f"column {column!r} expects Number, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise TypeMismatch(f"column {column!r}: NaN is not storable")
        return value
    if stype is ScalarType.STRING:
        if not isinstance(value, str):
            raise TypeMismatch(f"column {column!r} expects String, got {value!r}")
        return value
    # Timestamp / Duration: integer milliseconds.
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeMismatch(f"column {column!r} expects {stype} millis, got {value!r}")
    return value


@dataclass(frozen=True)
class Schema:
    """Case- and event-level attribute declarations.

    Attribute names keep their original spelling but are matched
    case-insensitively; names must be unique across the whole schema so
    column references in queries are never ambiguous.
    """

    case_attributes: tuple[tuple[str, ScalarType], ...]
    event_attributes: tuple[tuple[str, ScalarType], ...]

    def __post_init__(self):
        seen: set[str] = set()
        for name, stype in self.case_attributes + self.event_attributes:
            if not name:
                raise InvalidSchema("empty attribute name")
            if not isinstance(stype, ScalarType):
                raise InvalidSchema(f"attribute {name!r} has no scalar type")
            low = name.lower()
            if low in seen:
                raise InvalidSchema(f"duplicate attribute name {name!r}")
            seen.add(low)
        self._require(Level.CASE, CASE_ID, ScalarType.STRING)
        self._require(Level.EVENT, EVENT_NAME, ScalarType.STRING)
        self._require(Level.EVENT, END_TIME, ScalarType.TIMESTAMP)
        st = self.find(Level.EVENT, START_TIME)
        if st is not None and st[1] is not ScalarType.TIMESTAMP:
            raise InvalidSchema("start_time must be a Timestamp")

    def _require(self, level: Level, name: str, stype: ScalarType) -> None:
        found = self.find(level, name)
        if found is None:
            raise InvalidSchema(f"schema is missing required {level} column {name!r}")
        if found[1] is not stype:
            raise InvalidSchema(f"required column {name!r} must have type {stype}")

    @classmethod
    def make(
        cls,
        case_attributes: Iterable[tuple[str, ScalarType]],
        event_attributes: Iterable[tuple[str, ScalarType]],
    ) -> "Schema":
        return cls(tuple(case_attributes), tuple(event_attributes))

    def attributes(self, level: Level) -> tuple[tuple[str, ScalarType], ...]:
        return self.case_attributes if level is Level.CASE else self.event_attributes

    def find(self, level: Level, name: str) -> tuple[str, ScalarType] | None:
        """Resolve a name at one level; returns (canonical spelling, type)."""
        low = name.lower()
        for attr, stype in self.attributes(level):
            if attr.lower() == low:
                return attr, stype
        return None

    def resolve(self, name: str) -> tuple[Level, str, ScalarType] | None:
        """Resolve a name at either level (names are globally unique)."""
        for level in (Level.CASE, Level.EVENT):
            found = self.find(level, name)
            if found is not None:
                return level, found[0], found[1]
        return None

    def to_dict(self) -> dict:
        return {
            "caseAttributes": [{"name": n, "type": str(t)} for n, t in self.case_attributes],
            "eventAttributes": [{"name": n, "type": str(t)} for n, t in self.event_attributes],
        }


@dataclass
class ColumnData:
    """One materialized, immutable column."""

    type: ScalarType
    data: np.ndarray
    valid: np.ndarray | None = None          # None means every row is valid
    dictionary: tuple[str, ...] | None = None  # set for STRING columns

    def __len__(self) -> int:
        return len(self.data)

    def is_valid(self, i: int) -> bool:
        return self.valid is None or bool(self.valid[i])

    def value_at(self, i: int) -> Any:
        if not self.is_valid(i):
            return None
        if self.type is ScalarType.STRING:
            return self.dictionary[int(self.data[i])]
        if self.type is ScalarType.NUMBER:
            return float(self.data[i])
        if self.type is ScalarType.BOOLEAN:
            return bool(self.data[i])
        return int(self.data[i])

    def to_pylist(self) -> list:
        return [self.value_at(i) for i in range(len(self.data))]


class _ColumnBuilder:
    """Append-only cell storage; materializes to numpy on demand."""

    def __init__(self, stype: ScalarType):
        self.type = stype
        self.cells: list[Any] = []
        if stype is ScalarType.STRING:
            self.dictionary: list[str] = []
            self._codes: dict[str, int] = {}

    def append(self, value: Any) -> None:
        if value is None:
            self.cells.append(None)
            return
        if self.type is ScalarType.STRING:
            code = self._codes.get(value)
            if code is None:
                code = len(self.dictionary)
                self._codes[value] = code
                self.dictionary.append(value)
            self.cells.append(code)
        else:
            self.cells.append(value)

    def extend(self, values: Iterable[Any]) -> None:
        for v in values:
            self.append(v)

    def materialize(self) -> ColumnData:
        n = len(self.cells)
        sentinel = _NULL_SENTINEL[self.type]
        has_null = any(c is None for c in self.cells)
        if has_null:
            data = np.fromiter(
                (sentinel if c is None else c for c in self.cells),
                dtype=_NUMPY_DTYPE[self.type],
                count=n,
            )
            valid = np.fromiter((c is not None for c in self.cells), dtype=np.bool_, count=n)
        else:
            data = np.asarray(self.cells, dtype=_NUMPY_DTYPE[self.type])
            valid = None
        data.flags.writeable = False
        if valid is not None:
            valid.flags.writeable = False
        dictionary = tuple(self.dictionary) if self.type is ScalarType.STRING else None
        return ColumnData(self.type, data, valid, dictionary)


@dataclass(frozen=True)
class Snapshot:
    """Immutable view of selected columns, isolated from later appends."""

    log_id: str
    schema: Schema
    n_cases: int
    n_events: int
    case_offsets: np.ndarray
    case_columns: dict[str, ColumnData]
    event_columns: dict[str, ColumnData]

    def column(self, level: Level, name: str) -> ColumnData:
        cols = self.case_columns if level is Level.CASE else self.event_columns
        found = self.schema.find(level, name)
        key = found[0] if found else name
        if key not in cols:
            from .errors import SnapshotColumnMissing

            raise SnapshotColumnMissing(f"snapshot does not contain {level} column {name!r}")
        return cols[key]

    def case_lengths(self) -> np.ndarray:
        return self.case_offsets[1:] - self.case_offsets[:-1]


class EventLog:
    """One in-memory event log: case columns, event columns, case offsets.

    Single writer; readers take Snapshots. Appends invalidate the
    materialization cache, so live Snapshots keep the arrays they were
    built from.
    """

    def __init__(self, log_id: str, schema: Schema):
        if not log_id:
            raise InvalidSchema("log_id must be non-empty")
        self.log_id = log_id
        self.schema = schema
        self._lock = threading.RLock()
        self._case_cols = {n: _ColumnBuilder(t) for n, t in schema.case_attributes}
        self._event_cols = {n: _ColumnBuilder(t) for n, t in schema.event_attributes}
        self._offsets: list[int] = [0]
        self._case_index: dict[str, int] = {}
        self._version = 0
        self._cache: dict[tuple[Level, str], tuple[int, ColumnData]] = {}
        self._offsets_cache: tuple[int, np.ndarray] | None = None

    # -- introspection ----------------------------------------------------

    @property
    def n_cases(self) -> int:
        return len(self._offsets) - 1

    @property
    def n_events(self) -> int:
        return self._offsets[-1]

    def case_index_of(self, case_id: str) -> int | None:
        return self._case_index.get(case_id)

    # -- mutation ----------------------------------------------------------

    def append_case(self, case_values: Mapping[str, Any], events: Sequence[Mapping[str, Any]]) -> int:
        """Append one case; events are stably sorted by end_time first."""
        with self._lock:
            if not events:
                raise EmptyCase(f"case in log {self.log_id!r} has no events")
            case_row = self._check_row(Level.CASE, case_values, REQUIRED_CASE)
            case_id = case_row[self.schema.find(Level.CASE, CASE_ID)[0]]
            if case_id in self._case_index:
                raise DuplicateCaseId(f"case_id {case_id!r} already present in log {self.log_id!r}")
            event_rows = [self._check_row(Level.EVENT, ev, REQUIRED_EVENT) for ev in events]
            end_key = self.schema.find(Level.EVENT, END_TIME)[0]
            event_rows.sort(key=lambda r: r[end_key])  # stable: ties keep input order

            index = self.n_cases
            for name, builder in self._case_cols.items():
                builder.append(case_row[name])
            for name, builder in self._event_cols.items():
                builder.extend(row[name] for row in event_rows)
            self._offsets.append(self._offsets[-1] + len(event_rows))
            self._case_index[case_id] = index
            self._version += 1
            return index

    def _check_row(self, level: Level, values: Mapping[str, Any], required: tuple[str, ...]) -> dict:
        row: dict[str, Any] = {}
        for key, value in values.items():
            found = self.schema.find(level, key)
            if found is None:
                raise UnknownColumn(f"unknown {level} column {key!r} in log {self.log_id!r}")
            name, stype = found
            row[name] = check_value(stype, value, name)
        for name, stype in self.schema.attributes(level):
            row.setdefault(name, None)
        for req in required:
            name = self.schema.find(level, req)[0]
            if row.get(name) is None:
                raise MissingRequiredField(f"missing required value for {req!r}")
        return row

    @classmethod
    def from_arrays(
        cls,
        log_id: str,
        schema: Schema,
        case_cols: Mapping[str, Sequence[Any]],
        event_cols: Mapping[str, Sequence[Any]],
        offsets: Sequence[int],
    ) -> "EventLog":
        """Bulk construction from pre-grouped columns.

        `offsets` delimits each case's events; events may arrive unsorted and
        are stably re-ordered by end_time within each case here. Cell values
        must already be validated/typed (this is the ingestion fast path).
        """
        log = cls(log_id, schema)
        n_cases = len(offsets) - 1
        n_events = offsets[-1]
        off = np.asarray(offsets, dtype=np.int64)
        if n_cases < 0 or off[0] != 0 or np.any(np.diff(off) < 1):
            raise EmptyCase("every case needs at least one event")

        end_name = schema.find(Level.EVENT, END_TIME)[0]
        end_time = np.asarray(event_cols[end_name], dtype=np.int64)
        case_of_event = np.repeat(np.arange(n_cases, dtype=np.int64), np.diff(off))
        # Stable per-case sort only when some case is out of order.
        order: np.ndarray | None = None
        unsorted = np.zeros(n_events, dtype=bool)
        unsorted[1:] = np.diff(end_time) < 0
        unsorted[off[1:-1]] = False  # boundaries between cases do not count
        if unsorted.any():
            order = np.lexsort((end_time, case_of_event))  # stable on ties

        case_name_for = {n.lower(): n for n, _ in schema.case_attributes}
        event_name_for = {n.lower(): n for n, _ in schema.event_attributes}
        for key, cells in case_cols.items():
            name = case_name_for[key.lower()]
            log._case_cols[name].extend(cells)
        for key, cells in event_cols.items():
            name = event_name_for[key.lower()]
            if order is not None:
                cells = [cells[i] for i in order]
            log._event_cols[name].extend(cells)

        id_name = schema.find(Level.CASE, CASE_ID)[0]
        for i, cid in enumerate(case_cols[id_name] if id_name in case_cols else case_cols[CASE_ID]):
            if cid in log._case_index:
                raise DuplicateCaseId(f"case_id {cid!r} already present in log {log_id!r}")
            log._case_index[cid] = i
        log._offsets = [int(v) for v in off]
        log._version += 1
        return log

    # -- reads ---------------------------------------------------------------

    def _materialized(self, level: Level, name: str) -> ColumnData:
        with self._lock:
            key = (level, name)
            cached = self._cache.get(key)
            if cached is not None and cached[0] == self._version:
                return cached[1]
            builder = (self._case_cols if level is Level.CASE else self._event_cols)[name]
            col = builder.materialize()
            self._cache[key] = (self._version, col)
            return col

    def _materialized_offsets(self) -> np.ndarray:
        with self._lock:
            if self._offsets_cache is None or self._offsets_cache[0] != self._version:
                arr = np.asarray(self._offsets, dtype=np.int64)
                arr.flags.writeable = False
                self._offsets_cache = (self._version, arr)
            return self._offsets_cache[1]

    def snapshot(self, columns: Sequence[tuple[Level, str]] | None = None) -> Snapshot:
        """Immutable view over the requested columns (all columns if None)."""
        with self._lock:
            if columns is None:
                columns = [(Level.CASE, n) for n, _ in self.schema.case_attributes] + [
                    (Level.EVENT, n) for n, _ in self.schema.event_attributes
                ]
            case_cols: dict[str, ColumnData] = {}
            event_cols: dict[str, ColumnData] = {}
            for level, name in columns:
                found = self.schema.find(level, name)
                if found is None:
                    raise UnknownColumn(f"no {level} column {name!r} in log {self.log_id!r}")
                canonical = found[0]
                target = case_cols if level is Level.CASE else event_cols
                target[canonical] = self._materialized(level, canonical)
            return Snapshot(
                log_id=self.log_id,
                schema=self.schema,
                n_cases=self.n_cases,
                n_events=self.n_events,
                case_offsets=self._materialized_offsets(),
                case_columns=case_cols,
                event_columns=event_cols,
            )

    def flatten(self):
        """One row per event: case attributes (repeated) then event attributes."""
        from .result import ResultTable

        snap = self.snapshot()
        lengths = snap.case_lengths()
        names: list[str] = []
        types: list[ScalarType] = []
        columns: list[ColumnData] = []
        for name, stype in self.schema.case_attributes:
            col = snap.case_columns[name]
            data = np.repeat(col.data, lengths)
            valid = np.repeat(col.valid, lengths) if col.valid is not None else None
            names.append(name)
            types.append(stype)
            columns.append(ColumnData(stype, data, valid, col.dictionary))
        for name, stype in self.schema.event_attributes:
            col = snap.event_columns[name]
            names.append(name)
            types.append(stype)
            columns.append(col)
        return ResultTable(names, types, columns)

    def read_case(self, index: int) -> tuple[dict, list[dict]]:
        """Read one case back as (case_values, events); mainly for tests/REPL."""
        snap = self.snapshot()
        case_values = {n: snap.case_columns[n].value_at(index) for n, _ in self.schema.case_attributes}
        lo, hi = int(snap.case_offsets[index]), int(snap.case_offsets[index + 1])
        events = [
            {n: snap.event_columns[n].value_at(i) for n, _ in self.schema.event_attributes}
            for i in range(lo, hi)
        ]
        return case_values, events


class Catalog:
    """Registry of event logs; guards against duplicate ids."""

    def __init__(self):
        self._logs: dict[str, EventLog] = {}
        self._lock = threading.RLock()

    def create_log(self, log_id: str, schema: Schema) -> EventLog:
        return self.add(EventLog(log_id, schema))

    def add(self, log: EventLog) -> EventLog:
        with self._lock:
            if log.log_id in self._logs:
                raise DuplicateLogId(f"log {log.log_id!r} already exists")
            self._logs[log.log_id] = log
            return log

    def get(self, log_id: str) -> EventLog:
        with self._lock:
            log = self._logs.get(log_id)
        if log is None:
            raise UnknownLog(f"no log named {log_id!r}")
        return log

    def drop(self, log_id: str) -> None:
        with self._lock:
            if log_id not in self._logs:
                raise UnknownLog(f"no log named {log_id!r}")
            del self._logs[log_id]

    def list_logs(self) -> list[EventLog]:
        with self._lock:
            return list(self._logs.values())
