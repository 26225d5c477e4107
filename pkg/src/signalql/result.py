"""Flat, typed, columnar query output and its serializations.

JSON cell encoding: Timestamp and Duration as integer milliseconds, Number as
an IEEE double, NULL as null. `to_json_bytes` is the single canonical
serialization used by both the library API and the HTTP layer, so responses
are byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Any, Iterator

from .store import ColumnData, ScalarType


class ResultTable:
    def __init__(self, names: list[str], types: list[ScalarType], columns: list[ColumnData]):
        assert len(names) == len(types) == len(columns)
        self.names = names
        self.types = types
        self.columns = columns
        self.n_rows = len(columns[0]) if columns else 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResultTable):
            return NotImplemented
        return (
            self.names == other.names
            and self.types == other.types
            and list(self.iter_rows()) == list(other.iter_rows())
        )

    def column_values(self, name: str) -> list:
        return self.columns[self.names.index(name)].to_pylist()

    def iter_rows(self) -> Iterator[tuple]:
        cols = [c.to_pylist() for c in self.columns]
        for row in zip(*cols) if cols else iter(()):
            yield row

    def rows(self) -> list[list[Any]]:
        return [list(r) for r in self.iter_rows()]

    # -- serialization ------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "columns": [{"name": n, "type": str(t)} for n, t in zip(self.names, self.types)],
            "rows": [[_json_cell(v) for v in row] for row in self.iter_rows()],
        }

    def to_json_bytes(self) -> bytes:
        return json.dumps(self.to_json_obj(), separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    def to_csv(self) -> str:
        """RFC-4180-style CSV, same quoting rules as ingestion; NULL is empty."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        for row in self.iter_rows():
            writer.writerow(["" if v is None else _csv_cell(v) for v in row])
        return buf.getvalue()

    def pretty(self) -> str:
        """Fixed-width text table for the REPL."""
        header = list(self.names)
        body = [[_display(v) for v in row] for row in self.iter_rows()]
        widths = [len(h) for h in header]
        for row in body:
            for i, cell in enumerate(row):
                widths[i] = max(widths[i], len(cell))
        def fmt(cells):
            return " | ".join(c.ljust(w) for c, w in zip(cells, widths))
        lines = [fmt(header), "-+-".join("-" * w for w in widths)]
        lines.extend(fmt(row) for row in body)
        lines.append(f"({self.n_rows} row{'s' if self.n_rows != 1 else ''})")
        return "\n".join(lines)


def _json_cell(value: Any):
    # whole Numbers (counts, exact averages) read better without the '.0'
    if isinstance(value, float) and value.is_integer() and abs(value) < 2**53:
        return int(value)
    return value


def _csv_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value.is_integer() and abs(value) < 2**53:
            return str(int(value))
        return repr(value)
    return str(value)


def _display(value: Any) -> str:
    if value is None:
        return "NULL"
    return _csv_cell(value)
