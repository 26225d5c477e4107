"""In-memory columnar query engine for process event logs.

Logs hold one row per case with a nested, end-time-ordered events table.
Queries are standard SQL expressions extended with order-aware aggregation
(FIRST/LAST) and declarative behaviour matching over the event sequence.
"""

from .engine import Engine
from .errors import (
    ExecError,
    IngestError,
    QueryError,
    SignalError,
    StoreError,
)
from .ingest import CsvIngestConfig, ingest_csv, ingest_xes
from .result import ResultTable
from .store import Catalog, EventLog, Level, ScalarType, Schema

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "CsvIngestConfig",
    "Engine",
    "EventLog",
    "ExecError",
    "IngestError",
    "Level",
    "QueryError",
    "ResultTable",
    "ScalarType",
    "Schema",
    "SignalError",
    "StoreError",
    "ingest_csv",
    "ingest_xes",
]
