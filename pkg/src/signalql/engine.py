"""Session facade tying the catalog to the query pipeline."""

from __future__ import annotations

from .analyzer import AnalyzedQuery, analyze_query, explain
from .errors import NoCurrentProcess
from .executor import DEFAULT_MAX_CELLS, execute, optimize, scan_columns
from .parser import QueryAst, SourceFlatten, SourceLog, parse_query
from .result import ResultTable
from .store import Catalog, EventLog


class Engine:
    """A catalog of logs plus one session-level binding: the current process,
    which is what THIS_PROCESS resolves to."""

    def __init__(self, max_cells: int = DEFAULT_MAX_CELLS):
        self.catalog = Catalog()
        self.current: str | None = None
        self.max_cells = max_cells

    def add_log(self, log: EventLog, make_current: bool = True) -> EventLog:
        self.catalog.add(log)
        if make_current:
            self.current = log.log_id
        return log

    def use(self, log_id: str) -> None:
        self.catalog.get(log_id)
        self.current = log_id

    def drop(self, log_id: str) -> None:
        self.catalog.drop(log_id)
        if self.current == log_id:
            self.current = None

    def _resolve_log(self, ast: QueryAst, current: str | None) -> EventLog:
        source = ast.source
        while isinstance(source, SourceFlatten):
            source = source.inner
        if isinstance(source, SourceLog):
            return self.catalog.get(source.name)
        bound = current if current is not None else self.current
        if bound is None:
            raise NoCurrentProcess(
                "THIS_PROCESS is not bound; open a log first", source.span
            )
        return self.catalog.get(bound)

    def prepare(self, text: str, current: str | None = None) -> tuple[AnalyzedQuery, EventLog]:
        ast = parse_query(text)
        log = self._resolve_log(ast, current)
        aq = optimize(analyze_query(ast, log.schema))
        return aq, log

    def run(self, text: str, current: str | None = None) -> ResultTable:
        aq, log = self.prepare(text, current)
        snapshot = log.snapshot(scan_columns(aq.plan))
        return execute(aq, snapshot, self.max_cells)

    def explain(self, text: str, current: str | None = None) -> str:
        aq, _ = self.prepare(text, current)
        return explain(aq.plan)
