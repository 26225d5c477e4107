"""Semantic analysis: resolve names, levels and types, build a logical plan.

The two-level data model drives most rules here. On a nested source the
query ranges over cases; event-level values may only reach case level
through an aggregating scalar subquery, a behaviour definition, a pattern,
or an event-level WHERE conjunct. That last form lifts existentially: the
conjunct holds for a case iff some event of the case satisfies it, which is
the only reasonable meaning of an event predicate at case scope.

MATCHES is not an ordinary boolean expression: it is accepted only as a
top-level WHERE conjunct, optionally under NOT. Anywhere else the placement
is rejected rather than silently reinterpreted.

Aggregate functions are context-sensitive: in the select list they aggregate
result rows (GROUP BY groups or the whole input), while in WHERE, behaviours
and scalar subqueries they aggregate the current case's events.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

from . import parser as P
from .errors import (
    DuplicateBehaviour,
    LevelError,
    MatchesOnFlattened,
    MatchesPlacement,
    NonAggregatedSubquery,
    NonBooleanBehaviour,
    Span,
    TypeError_,
    UngroupedExpression,
    UnknownColumnQuery,
)
from .pattern import CompiledPattern, compile_pattern
from .parser import print_expr
from .store import Level, ScalarType, Schema

B = ScalarType.BOOLEAN
N = ScalarType.NUMBER
S = ScalarType.STRING
T = ScalarType.TIMESTAMP
D = ScalarType.DURATION

# aggregate context: SELECT/GROUP/ORDER aggregate result rows, WHERE and the
# inner contexts aggregate the case's events, inner contexts additionally
# forbid subqueries
SELECT_CTX = "select"
WHERE_CTX = "where"
INNER_CTX = "inner"


# --- typed expressions ---------------------------------------------------------


@dataclass(frozen=True)
class TExpr:
    pass


@dataclass(frozen=True)
class TLiteral(TExpr):
    value: Any
    stype: ScalarType | None  # None for an uncoerced NULL


@dataclass(frozen=True)
class TColumn(TExpr):
    name: str
    level: Level
    stype: ScalarType


@dataclass(frozen=True)
class TSlot(TExpr):
    """Reference into the output row of an Aggregate node."""
    index: int
    stype: ScalarType | None


@dataclass(frozen=True)
class TUnary(TExpr):
    op: str  # '-' | 'NOT'
    operand: TExpr
    stype: ScalarType


@dataclass(frozen=True)
class TBinary(TExpr):
    op: str
    left: TExpr
    right: TExpr
    stype: ScalarType


@dataclass(frozen=True)
class TIsNull(TExpr):
    operand: TExpr
    negated: bool
    stype: ScalarType = B


@dataclass(frozen=True)
class TInList(TExpr):
    operand: TExpr
    items: tuple[TExpr, ...]
    negated: bool
    stype: ScalarType = B


@dataclass(frozen=True)
class TEventAgg(TExpr):
    """Per-case aggregation over the events table."""
    func: str
    arg: TExpr | None  # None for COUNT(*)
    cond: tuple[TExpr, ...]  # conjunction from the subquery WHERE
    distinct: bool
    stype: ScalarType


@dataclass(frozen=True)
class TGroupAgg(TExpr):
    """Aggregation over the query's result rows (GROUP BY or whole input)."""
    func: str
    arg: TExpr | None
    distinct: bool
    stype: ScalarType


def expr_level(te: TExpr) -> Level:
    """Event level is infectious; aggregation brings it back to case level."""
    if isinstance(te, TColumn):
        return te.level
    if isinstance(te, (TLiteral, TSlot, TEventAgg, TGroupAgg)):
        return Level.CASE
    if isinstance(te, TUnary):
        return expr_level(te.operand)
    if isinstance(te, TBinary):
        levels = (expr_level(te.left), expr_level(te.right))
        return Level.EVENT if Level.EVENT in levels else Level.CASE
    if isinstance(te, TIsNull):
        return expr_level(te.operand)
    if isinstance(te, TInList):
        parts = (te.operand,) + te.items
        return Level.EVENT if any(expr_level(p) is Level.EVENT for p in parts) else Level.CASE
    raise TypeError(type(te).__name__)


def _walk(te: TExpr):
    yield te
    if isinstance(te, TUnary):
        yield from _walk(te.operand)
    elif isinstance(te, TBinary):
        yield from _walk(te.left)
        yield from _walk(te.right)
    elif isinstance(te, TIsNull):
        yield from _walk(te.operand)
    elif isinstance(te, TInList):
        for p in (te.operand,) + te.items:
            yield from _walk(p)
    elif isinstance(te, TEventAgg):
        if te.arg is not None:
            yield from _walk(te.arg)
        for c in te.cond:
            yield from _walk(c)
    elif isinstance(te, TGroupAgg):
        if te.arg is not None:
            yield from _walk(te.arg)


def contains_group_agg(te: TExpr) -> bool:
    return any(isinstance(n, TGroupAgg) for n in _walk(te))


def contains_event_agg(te: TExpr) -> bool:
    return any(isinstance(n, TEventAgg) for n in _walk(te))


def referenced_columns(te: TExpr) -> set[tuple[Level, str]]:
    return {(n.level, n.name) for n in _walk(te) if isinstance(n, TColumn)}


# --- logical plan --------------------------------------------------------------


@dataclass(frozen=True)
class PlanNode:
    pass


@dataclass(frozen=True)
class Scan(PlanNode):
    log_name: str | None  # None binds the session's current process
    flattened: bool
    case_columns: tuple[str, ...] | None = None  # None = all (pruning fills these)
    event_columns: tuple[str, ...] | None = None


@dataclass(frozen=True)
class PatternFilter(PlanNode):
    child: PlanNode
    compiled: CompiledPattern
    subject: TExpr | None  # defaults to event_name
    behaviours: tuple[tuple[str, TExpr], ...]
    negate: bool


@dataclass(frozen=True)
class ExistsFilter(PlanNode):
    """Keep cases where some event satisfies cond (event-level Boolean)."""
    child: PlanNode
    cond: TExpr


@dataclass(frozen=True)
class Filter(PlanNode):
    child: PlanNode
    cond: TExpr  # case-level Boolean


@dataclass(frozen=True)
class Aggregate(PlanNode):
    child: PlanNode
    keys: tuple[TExpr, ...]
    aggs: tuple[TGroupAgg, ...]  # output row = keys ++ aggs, TSlot indexes it


@dataclass(frozen=True)
class Sort(PlanNode):
    child: PlanNode
    keys: tuple[tuple[TExpr, bool], ...]  # (expr, descending)


@dataclass(frozen=True)
class Project(PlanNode):
    child: PlanNode
    exprs: tuple[TExpr, ...]
    names: tuple[str, ...]
    types: tuple[ScalarType, ...]


@dataclass(frozen=True)
class Limit(PlanNode):
    child: PlanNode
    n: int


@dataclass(frozen=True)
class AnalyzedQuery:
    plan: PlanNode
    names: tuple[str, ...]
    types: tuple[ScalarType, ...]
    flattened: bool


def explain(plan: PlanNode, indent: int = 0) -> str:
    """Stable one-node-per-line plan rendering, used by tests and the REPL."""
    pad = "  " * indent
    if isinstance(plan, Scan):
        cols = ""
        if plan.case_columns is not None or plan.event_columns is not None:
            cols = f" case={list(plan.case_columns or ())} event={list(plan.event_columns or ())}"
        name = plan.log_name if plan.log_name is not None else "THIS_PROCESS"
        kind = "FlattenScan" if plan.flattened else "Scan"
        return f"{pad}{kind} {name}{cols}"
    if isinstance(plan, PatternFilter):
        neg = "NOT " if plan.negate else ""
        n_branch = len(plan.compiled.branches)
        return f"{pad}{neg}PatternFilter branches={n_branch}\n" + explain(plan.child, indent + 1)
    if isinstance(plan, ExistsFilter):
        return f"{pad}ExistsFilter\n" + explain(plan.child, indent + 1)
    if isinstance(plan, Filter):
        return f"{pad}Filter\n" + explain(plan.child, indent + 1)
    if isinstance(plan, Aggregate):
        return (
            f"{pad}Aggregate keys={len(plan.keys)} aggs={[a.func for a in plan.aggs]}\n"
            + explain(plan.child, indent + 1)
        )
    if isinstance(plan, Sort):
        return f"{pad}Sort keys={len(plan.keys)}\n" + explain(plan.child, indent + 1)
    if isinstance(plan, Project):
        return f"{pad}Project {list(plan.names)}\n" + explain(plan.child, indent + 1)
    if isinstance(plan, Limit):
        return f"{pad}Limit {plan.n}\n" + explain(plan.child, indent + 1)
    raise TypeError(type(plan).__name__)


# --- analysis ------------------------------------------------------------------

_ARITH = {
    ("+", N, N): N, ("+", T, D): T, ("+", D, T): T, ("+", D, D): D,
    ("-", N, N): N, ("-", T, T): D, ("-", T, D): T, ("-", D, D): D,
    ("*", N, N): N, ("/", N, N): N,
}

_AGG_FUNCS = set(P.AGG_FUNCS)


def _espan(e) -> Span:
    return Span(*e.span)


class _Analyzer:
    def __init__(self, schema: Schema, flattened: bool):
        self.schema = schema
        self.flattened = flattened
        self.behaviours: dict[str, TExpr] = {}
        self.aliases: dict[str, TExpr] = {}

    # level distinctions collapse on a flattened source: everything is a row
    def level_of(self, te: TExpr) -> Level:
        return Level.CASE if self.flattened else expr_level(te)

    def resolve_column(self, ref: P.ColumnRef) -> TColumn:
        found = self.schema.resolve(ref.name)
        if found is None:
            hint = ""
            if ref.name in self.behaviours:
                hint = " (behaviours can only be referenced inside a pattern)"
            raise UnknownColumnQuery(f"unknown column {ref.name!r}{hint}", _espan(ref))
        level, name, stype = found
        return TColumn(name, level, stype)

    def type_expr(self, e: P.Expr, ctx: str, in_agg: bool = False) -> TExpr:
        if isinstance(e, P.Literal):
            if e.value is None:
                return TLiteral(None, None)
            if isinstance(e.value, bool):
                return TLiteral(e.value, B)
            if isinstance(e.value, (int, float)):
                return TLiteral(e.value, N)
            return TLiteral(e.value, S)
        if isinstance(e, P.ColumnRef):
            return self.resolve_column(e)
        if isinstance(e, P.Star):
            raise TypeError_("'*' is only valid as a select item or in COUNT(*)", _espan(e))
        if isinstance(e, P.Unary):
            operand = self.type_expr(e.operand, ctx, in_agg)
            if e.op == "NOT":
                if operand.stype not in (B, None):
                    raise TypeError_("NOT expects a Boolean operand", _espan(e))
                return TUnary("NOT", _coerce(operand, B), B)
            if operand.stype not in (N, D):
                raise TypeError_("unary '-' expects Number or Duration", _espan(e))
            return TUnary("-", operand, operand.stype)
        if isinstance(e, P.Binary):
            return self.type_binary(e, ctx, in_agg)
        if isinstance(e, P.IsNull):
            return TIsNull(self.type_expr(e.operand, ctx, in_agg), e.negated)
        if isinstance(e, P.InList):
            operand = self.type_expr(e.operand, ctx, in_agg)
            items = tuple(self.type_expr(i, ctx, in_agg) for i in e.items)
            target = operand.stype
            for item in items:
                target = target or item.stype
            operand = _coerce(operand, target)
            items = tuple(_coerce(i, target) for i in items)
            for item in items:
                if item.stype is not None and target is not None and item.stype is not target:
                    raise TypeError_(
                        f"IN list mixes {target.value} with {item.stype.value}", _espan(e)
                    )
            return TInList(operand, items, e.negated)
        if isinstance(e, P.FuncCall):
            return self.type_func(e, ctx, in_agg)
        if isinstance(e, P.ScalarSubquery):
            return self.type_subquery(e, ctx)
        if isinstance(e, P.Matches):
            raise MatchesPlacement(
                "MATCHES is only allowed as a top-level WHERE condition", _espan(e)
            )
        raise TypeError(f"cannot type {type(e).__name__}")

    def type_binary(self, e: P.Binary, ctx: str, in_agg: bool) -> TExpr:
        left = self.type_expr(e.left, ctx, in_agg)
        right = self.type_expr(e.right, ctx, in_agg)
        op = e.op
        if op in ("AND", "OR"):
            for side in (left, right):
                if side.stype not in (B, None):
                    raise TypeError_(f"{op} expects Boolean operands", _espan(e))
            return TBinary(op, _coerce(left, B), _coerce(right, B), B)
        if op in ("=", "!=", "<", "<=", ">", ">="):
            left, right = _coerce(left, right.stype), _coerce(right, left.stype)
            if left.stype is not None and right.stype is not None and left.stype is not right.stype:
                raise TypeError_(
                    f"cannot compare {left.stype.value} with {right.stype.value}", _espan(e)
                )
            return TBinary(op, left, right, B)
        # arithmetic: an integer literal next to a Timestamp or Duration reads
        # as a millisecond Duration, not as a second Timestamp
        if left.stype in (T, D) and right.stype in (N, None):
            right = _coerce(right, D)
        elif right.stype in (T, D) and left.stype in (N, None):
            left = _coerce(left, D)
        else:
            left, right = _coerce(left, right.stype), _coerce(right, left.stype)
        lt = left.stype or right.stype
        rt = right.stype or left.stype
        result = _ARITH.get((op, lt, rt))
        if result is None:
            raise TypeError_(
                f"invalid operands for {op!r}: {_tname(lt)} and {_tname(rt)}", _espan(e)
            )
        return TBinary(op, _coerce(left, lt), _coerce(right, rt), result)

    def type_func(self, e: P.FuncCall, ctx: str, in_agg: bool) -> TExpr:
        name = e.name
        if name not in _AGG_FUNCS:
            raise TypeError_(f"unknown function {name!r}", _espan(e))
        if in_agg:
            raise TypeError_("aggregates cannot be nested", _espan(e))
        event_agg = ctx in (WHERE_CTX, INNER_CTX)
        if event_agg and self.flattened:
            raise TypeError_(
                "aggregates are not allowed here on a flattened source", _espan(e)
            )
        if e.distinct and name != "COUNT":
            raise TypeError_("DISTINCT is only supported with COUNT", _espan(e))
        if e.star:
            if name != "COUNT":
                raise TypeError_(f"{name}(*) is not defined, only COUNT(*)", _espan(e))
            arg = None
        else:
            if len(e.args) != 1:
                raise TypeError_(f"{name} takes exactly one argument", _espan(e))
            arg = self.type_expr(e.args[0], ctx, in_agg=True)
        stype = self._agg_type(name, arg, _espan(e))
        if event_agg:
            return TEventAgg(name, arg, (), e.distinct, stype)
        if arg is not None and self.level_of(arg) is Level.EVENT:
            raise LevelError(
                f"{name} here aggregates result rows, but its argument is "
                "event-level; use a scalar subquery such as (SELECT "
                f"{name}(...))",
                _espan(e),
            )
        return TGroupAgg(name, arg, e.distinct, stype)

    def _agg_type(self, name: str, arg: TExpr | None, span: Span) -> ScalarType:
        if name == "COUNT":
            return N
        at = arg.stype
        if name in ("SUM", "AVG"):
            if at in (N, D):
                return at
            raise TypeError_(f"{name} expects Number or Duration, got {_tname(at)}", span)
        if name in ("MIN", "MAX"):
            if at in (N, D, T, S):
                return at
            raise TypeError_(f"{name} is not defined for {_tname(at)}", span)
        # FIRST / LAST keep the argument type
        return at if at is not None else S

    def type_subquery(self, e: P.ScalarSubquery, ctx: str) -> TExpr:
        if ctx == INNER_CTX:
            raise TypeError_("subqueries cannot be nested", _espan(e))
        if self.flattened:
            raise LevelError(
                "scalar subqueries need a nested source; this one is flattened", _espan(e)
            )
        conds: list[TExpr] = []
        if e.where is not None:
            cond = self.type_expr(e.where, INNER_CTX)
            if cond.stype not in (B, None):
                raise TypeError_("subquery WHERE expects a Boolean", _espan(e.where))
            conds.append(_coerce(cond, B))
        item = self.type_expr(e.item, INNER_CTX)
        if expr_level(item) is Level.EVENT:
            raise NonAggregatedSubquery(
                "subquery result is event-level; aggregate it (FIRST, LAST, SUM, ...)",
                _espan(e),
            )
        if not contains_event_agg(item):
            if conds:
                raise TypeError_(
                    "subquery WHERE is meaningless without an event aggregate",
                    _espan(e),
                )
            return item
        return _attach_cond(item, tuple(conds))

    def check_behaviours(self, behaviours: Iterable[P.Behaviour]) -> None:
        for b in behaviours:
            if b.name in self.behaviours:
                raise DuplicateBehaviour(f"behaviour {b.name!r} defined twice", _espan(b))
            te = self.type_expr(b.expr, INNER_CTX)
            if te.stype not in (B, None):
                raise NonBooleanBehaviour(
                    f"behaviour {b.name!r} must be a Boolean predicate", _espan(b)
                )
            self.behaviours[b.name] = _coerce(te, B)


def _tname(stype: ScalarType | None) -> str:
    return stype.value if stype else "NULL"


def _coerce(te: TExpr, target: ScalarType | None) -> TExpr:
    """Literal retyping: NULL adopts any type; integer Numbers may serve as
    Timestamp or Duration millisecond values."""
    if target is None or te.stype is target:
        return te
    if isinstance(te, TLiteral):
        if te.value is None:
            return TLiteral(None, target)
        if (
            te.stype is N
            and target in (T, D)
            and isinstance(te.value, int)
            and not isinstance(te.value, bool)
        ):
            return TLiteral(te.value, target)
    if isinstance(te, TUnary) and te.op == "-" and target is D:
        inner = _coerce(te.operand, target)
        if inner.stype is target:
            return TUnary("-", inner, target)
    return te


def _attach_cond(te: TExpr, cond: tuple[TExpr, ...]) -> TExpr:
    """Push the subquery WHERE into each event aggregate it covers."""
    if not cond:
        return te
    if isinstance(te, TEventAgg):
        return TEventAgg(te.func, te.arg, te.cond + cond, te.distinct, te.stype)
    if isinstance(te, TUnary):
        return TUnary(te.op, _attach_cond(te.operand, cond), te.stype)
    if isinstance(te, TBinary):
        return TBinary(
            te.op, _attach_cond(te.left, cond), _attach_cond(te.right, cond), te.stype
        )
    if isinstance(te, TIsNull):
        return TIsNull(_attach_cond(te.operand, cond), te.negated)
    if isinstance(te, TInList):
        return TInList(
            _attach_cond(te.operand, cond),
            tuple(_attach_cond(i, cond) for i in te.items),
            te.negated,
        )
    return te


def _split_conjuncts(e: P.Expr) -> list[P.Expr]:
    if isinstance(e, P.Binary) and e.op == "AND":
        return _split_conjuncts(e.left) + _split_conjuncts(e.right)
    return [e]


def _strip_not(e: P.Expr) -> tuple[bool, P.Expr]:
    negate = False
    while isinstance(e, P.Unary) and e.op == "NOT":
        negate = not negate
        e = e.operand
    return negate, e


def _derive_name(item: P.SelectItem) -> str:
    if item.alias is not None:
        return item.alias
    e = item.expr
    if isinstance(e, P.ColumnRef):
        return e.name.lower() if not e.quoted else e.name
    if isinstance(e, P.FuncCall):
        return e.name.lower()
    if isinstance(e, P.ScalarSubquery) and isinstance(e.item, P.FuncCall):
        return e.item.name.lower()
    return print_expr(e)


def analyze_query(ast: P.QueryAst, schema: Schema) -> AnalyzedQuery:
    flattened = isinstance(ast.source, P.SourceFlatten)
    source = ast.source
    while isinstance(source, P.SourceFlatten):
        source = source.inner
    log_name = source.name if isinstance(source, P.SourceLog) else None

    az = _Analyzer(schema, flattened)
    az.check_behaviours(ast.behaviours)

    # WHERE decomposes into per-conjunct plan steps
    pattern_steps: list[tuple[CompiledPattern, TExpr | None, bool]] = []
    exists_steps: list[TExpr] = []
    filter_steps: list[TExpr] = []
    if ast.where is not None:
        for conjunct in _split_conjuncts(ast.where):
            negate, inner = _strip_not(conjunct)
            if isinstance(inner, P.Matches):
                if flattened:
                    raise MatchesOnFlattened(
                        "MATCHES needs the nested events table; the source is flattened",
                        _espan(inner),
                    )
                subject = None
                if inner.subject is not None:
                    subject = az.type_expr(inner.subject, INNER_CTX)
                    if subject.stype is not S:
                        raise TypeError_(
                            "MATCHES subject must be a String expression",
                            _espan(inner.subject),
                        )
                compiled = compile_pattern(inner.pattern, az.behaviours.keys())
                pattern_steps.append((compiled, subject, negate))
                continue
            te = az.type_expr(conjunct, WHERE_CTX)
            if te.stype not in (B, None):
                raise TypeError_("WHERE expects a Boolean condition", _espan(conjunct))
            te = _coerce(te, B)
            if az.level_of(te) is Level.EVENT:
                exists_steps.append(te)
            else:
                filter_steps.append(te)

    # select list
    names: list[str] = []
    raw_items: list[TExpr] = []
    item_spans: list[Span] = []
    for item in ast.select:
        if isinstance(item.expr, P.Star):
            attrs = list(schema.case_attributes)
            if flattened:
                attrs += list(schema.event_attributes)
            for name, stype in attrs:
                level = schema.resolve(name)[0]
                names.append(name)
                raw_items.append(TColumn(name, level, stype))
                item_spans.append(_espan(item))
            continue
        te = az.type_expr(item.expr, SELECT_CTX)
        names.append(_derive_name(item))
        raw_items.append(te)
        item_spans.append(_espan(item))
        if item.alias:
            az.aliases[item.alias] = te

    # group keys
    group_keys: list[TExpr] = []
    for g in ast.group_by:
        te = az.type_expr(g, SELECT_CTX)
        if contains_group_agg(te):
            raise TypeError_("aggregates are not allowed in GROUP BY", _espan(g))
        if az.level_of(te) is Level.EVENT:
            raise LevelError(
                "GROUP BY expressions must be case-level; aggregate event values first",
                _espan(g),
            )
        group_keys.append(te)

    # order keys (select aliases are visible here)
    order_items: list[tuple[TExpr, bool]] = []
    order_spans: list[Span] = []
    for o in ast.order_by:
        if isinstance(o.expr, P.ColumnRef) and not o.expr.quoted and o.expr.name in az.aliases:
            te = az.aliases[o.expr.name]
        else:
            te = az.type_expr(o.expr, SELECT_CTX)
        if az.level_of(te) is Level.EVENT:
            raise LevelError(
                "ORDER BY expressions must be case-level; aggregate event values first",
                _espan(o),
            )
        order_items.append((te, o.descending))
        order_spans.append(_espan(o))

    for te, span in zip(raw_items, item_spans):
        if az.level_of(te) is Level.EVENT:
            raise LevelError(
                "event-level expression at case level; wrap it in an aggregating "
                "subquery such as (SELECT FIRST(...))",
                span,
            )

    has_agg = (
        bool(group_keys)
        or any(contains_group_agg(te) for te in raw_items)
        or any(contains_group_agg(te) for te, _ in order_items)
    )

    aggs: list[TGroupAgg] = []
    if has_agg:
        raw_items = [
            _rewrite_agg(te, group_keys, aggs, span)
            for te, span in zip(raw_items, item_spans)
        ]
        order_items = [
            (_rewrite_agg(te, group_keys, aggs, span), desc)
            for (te, desc), span in zip(order_items, order_spans)
        ]

    plan: PlanNode = Scan(log_name, flattened)
    for compiled, subject, negate in pattern_steps:
        plan = PatternFilter(plan, compiled, subject, tuple(az.behaviours.items()), negate)
    for cond in exists_steps:
        plan = ExistsFilter(plan, cond)
    for cond in filter_steps:
        plan = Filter(plan, cond)
    if has_agg:
        plan = Aggregate(plan, tuple(group_keys), tuple(aggs))
    if order_items:
        plan = Sort(plan, tuple(order_items))
    out_types = tuple((te.stype or S) for te in raw_items)
    plan = Project(plan, tuple(raw_items), tuple(names), out_types)
    if ast.limit is not None:
        plan = Limit(plan, ast.limit)
    return AnalyzedQuery(plan, tuple(names), out_types, flattened)


def _rewrite_agg(te: TExpr, keys: list[TExpr], aggs: list[TGroupAgg], span: Span) -> TExpr:
    """Rewrite a post-aggregation expression over slots of the Aggregate row."""
    for i, key in enumerate(keys):
        if te == key:
            return TSlot(i, key.stype)
    if isinstance(te, TGroupAgg):
        if te not in aggs:
            aggs.append(te)
        return TSlot(len(keys) + aggs.index(te), te.stype)
    if isinstance(te, TLiteral):
        return te
    if isinstance(te, TUnary):
        return TUnary(te.op, _rewrite_agg(te.operand, keys, aggs, span), te.stype)
    if isinstance(te, TBinary):
        return TBinary(
            te.op,
            _rewrite_agg(te.left, keys, aggs, span),
            _rewrite_agg(te.right, keys, aggs, span),
            te.stype,
        )
    if isinstance(te, TIsNull):
        return TIsNull(_rewrite_agg(te.operand, keys, aggs, span), te.negated)
    if isinstance(te, TInList):
        return TInList(
            _rewrite_agg(te.operand, keys, aggs, span),
            tuple(_rewrite_agg(i, keys, aggs, span) for i in te.items),
            te.negated,
        )
    # a TColumn or TEventAgg surviving to here is neither grouped nor aggregated
    raise UngroupedExpression(
        "expression mixes aggregates with ungrouped values; add it to GROUP BY "
        "or aggregate it",
        span,
    )
