"""Error types shared across the engine.

Every error carries a stable ``code`` string (asserted by tests and returned
over the wire) and, for query-text errors, an optional byte-offset span into
the original query string.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    """Half-open byte range [start, end) into the query text."""

    start: int
    end: int

    def as_list(self) -> list[int]:
        return [self.start, self.end]


class SignalError(Exception):
    """Base class for all engine errors."""

    code = "SignalError"

    def __init__(self, message: str, span: Span | None = None):
        super().__init__(message)
        self.message = message
        self.span = span


def _make(name: str, base: type) -> type:
    return type(name, (base,), {"code": name})


# --- store ---------------------------------------------------------------

class StoreError(SignalError):
    code = "StoreError"


DuplicateLogId = _make("DuplicateLogId", StoreError)
UnknownLog = _make("UnknownLog", StoreError)
InvalidSchema = _make("InvalidSchema", StoreError)
EmptyCase = _make("EmptyCase", StoreError)
TypeMismatch = _make("TypeMismatch", StoreError)
DuplicateCaseId = _make("DuplicateCaseId", StoreError)
MissingRequiredField = _make("MissingRequiredField", StoreError)
UnknownColumn = _make("UnknownColumn", StoreError)


# --- ingestion -----------------------------------------------------------

class IngestError(SignalError):
    code = "IngestError"


InvalidIngestConfig = _make("InvalidIngestConfig", IngestError)
MissingHeader = _make("MissingHeader", IngestError)
UnparseableTimestamp = _make("UnparseableTimestamp", IngestError)
MissingRequiredValue = _make("MissingRequiredValue", IngestError)
InconsistentCaseAttribute = _make("InconsistentCaseAttribute", IngestError)
MalformedXml = _make("MalformedXml", IngestError)
MissingConceptName = _make("MissingConceptName", IngestError)
MissingTimestamp = _make("MissingTimestamp", IngestError)


# --- query text (parser / analyzer) --------------------------------------

class QueryError(SignalError):
    """Any diagnostic produced while compiling or running a query."""

    code = "QueryError"

    def diagnostic(self) -> dict:
        d: dict = {"code": self.code, "message": self.message}
        d["span"] = self.span.as_list() if self.span else None
        return d


UnterminatedString = _make("UnterminatedString", QueryError)
IllegalCharacter = _make("IllegalCharacter", QueryError)
SyntaxError_ = _make("SyntaxError", QueryError)
MisplacedAnchor = _make("MisplacedAnchor", QueryError)
InvalidNotOperand = _make("InvalidNotOperand", QueryError)

TypeError_ = _make("TypeError", QueryError)
LevelError = _make("LevelError", QueryError)
NonAggregatedSubquery = _make("NonAggregatedSubquery", QueryError)
NonBooleanBehaviour = _make("NonBooleanBehaviour", QueryError)
DuplicateBehaviour = _make("DuplicateBehaviour", QueryError)
MatchesOnFlattened = _make("MatchesOnFlattened", QueryError)
MatchesPlacement = _make("MatchesPlacement", QueryError)
UngroupedExpression = _make("UngroupedExpression", QueryError)
UnknownBehaviour = _make("UnknownBehaviour", QueryError)
NoCurrentProcess = _make("NoCurrentProcess", QueryError)

# UnknownColumn doubles as a query diagnostic; give it the QueryError surface.
UnknownColumnQuery = _make("UnknownColumn", QueryError)


# --- execution -----------------------------------------------------------

class ExecError(QueryError):
    code = "ExecError"


SnapshotColumnMissing = _make("SnapshotColumnMissing", ExecError)
EvaluationError = _make("EvaluationError", ExecError)
ResourceLimitExceeded = _make("ResourceLimitExceeded", ExecError)
