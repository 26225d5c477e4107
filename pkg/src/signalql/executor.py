"""Plan optimization and vectorized execution over immutable snapshots.

Execution walks the (linear) plan chain. Case filters, existential filters
and pattern filters narrow a selection of case indices; Aggregate turns the
selection into materialized group rows; Sort/Project/Limit work uniformly
over whichever row representation they receive.

Value convention throughout: an expression evaluates to (values, valid)
where valid is None when every row is known. Cells with valid[i] == False
hold type-correct placeholders (never None), so vectorized operations stay
safe; NULL-ness travels only in the mask.

Optimizer rules are deliberately few and each is behavior-preserving:
  * LIMIT slides below the projection (projection is 1:1 per row),
  * plain case filters run before existential and pattern filters,
  * scans materialize only the columns the plan touches.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import kernels
from .analyzer import (
    Aggregate,
    AnalyzedQuery,
    ExistsFilter,
    Filter,
    Limit,
    PatternFilter,
    PlanNode,
    Project,
    Scan,
    Sort,
    TBinary,
    TColumn,
    TEventAgg,
    TExpr,
    TGroupAgg,
    TInList,
    TIsNull,
    TLiteral,
    TSlot,
    TUnary,
)
from .errors import EvaluationError, ResourceLimitExceeded
from .pattern import (
    ClassAny,
    ClassBehaviour,
    ClassLit,
    ClassNot,
    ClassUnion,
    EventClass,
    build_match_masks,
    class_bitmap,
)
from .result import ResultTable
from .store import ColumnData, Level, ScalarType, Snapshot

DEFAULT_MAX_CELLS = 20_000_000

B = ScalarType.BOOLEAN
N = ScalarType.NUMBER
S = ScalarType.STRING
T = ScalarType.TIMESTAMP
D = ScalarType.DURATION


# --- optimizer -----------------------------------------------------------------


def optimize(aq: AnalyzedQuery) -> AnalyzedQuery:
    plan = _push_limit(aq.plan)
    plan = _reorder_filters(plan)
    plan = _prune_columns(plan)
    return replace(aq, plan=plan)


def _push_limit(plan: PlanNode) -> PlanNode:
    if isinstance(plan, Limit) and isinstance(plan.child, Project):
        project = plan.child
        return replace(project, child=Limit(project.child, plan.n))
    return plan


_FILTERISH = (PatternFilter, ExistsFilter, Filter)


def _reorder_filters(plan: PlanNode) -> PlanNode:
    if isinstance(plan, _FILTERISH):
        run: list[PlanNode] = []
        node: PlanNode = plan
        while isinstance(node, _FILTERISH):
            run.append(node)
            node = node.child
        base = _reorder_filters(node)
        in_exec_order = list(reversed(run))
        ordered = (
            [n for n in in_exec_order if isinstance(n, Filter)]
            + [n for n in in_exec_order if isinstance(n, ExistsFilter)]
            + [n for n in in_exec_order if isinstance(n, PatternFilter)]
        )
        out = base
        for n in ordered:
            out = replace(n, child=out)
        return out
    if isinstance(plan, Scan):
        return plan
    return replace(plan, child=_reorder_filters(plan.child))


def _class_leaves(cls: EventClass):
    if isinstance(cls, ClassNot):
        yield from _class_leaves(cls.inner)
    elif isinstance(cls, ClassUnion):
        for part in cls.parts:
            yield from _class_leaves(part)
    else:
        yield cls


def _collect_columns(plan: PlanNode, refs: set[tuple[Level, str]]) -> None:
    def add(te: TExpr | None):
        if te is not None:
            for n in _walk_texpr(te):
                if isinstance(n, TColumn):
                    refs.add((n.level, n.name))

    if isinstance(plan, Scan):
        return
    if isinstance(plan, PatternFilter):
        behaviours = dict(plan.behaviours)
        needs_subject = False
        for cls in plan.compiled.classes:
            for leaf in _class_leaves(cls):
                if isinstance(leaf, ClassLit):
                    needs_subject = True
                elif isinstance(leaf, ClassBehaviour):
                    add(behaviours[leaf.name])
        if needs_subject:
            if plan.subject is None:
                refs.add((Level.EVENT, "event_name"))
            else:
                add(plan.subject)
    elif isinstance(plan, (ExistsFilter, Filter)):
        add(plan.cond)
    elif isinstance(plan, Aggregate):
        for k in plan.keys:
            add(k)
        for a in plan.aggs:
            add(a.arg)
    elif isinstance(plan, Sort):
        for expr, _ in plan.keys:
            add(expr)
    elif isinstance(plan, Project):
        for e in plan.exprs:
            add(e)
    _collect_columns(plan.child, refs)


def _walk_texpr(te: TExpr):
    yield te
    if isinstance(te, TUnary):
        yield from _walk_texpr(te.operand)
    elif isinstance(te, TBinary):
        yield from _walk_texpr(te.left)
        yield from _walk_texpr(te.right)
    elif isinstance(te, TIsNull):
        yield from _walk_texpr(te.operand)
    elif isinstance(te, TInList):
        for p in (te.operand,) + te.items:
            yield from _walk_texpr(p)
    elif isinstance(te, (TEventAgg, TGroupAgg)):
        if te.arg is not None:
            yield from _walk_texpr(te.arg)
        if isinstance(te, TEventAgg):
            for c in te.cond:
                yield from _walk_texpr(c)


def _prune_columns(plan: PlanNode) -> PlanNode:
    refs: set[tuple[Level, str]] = set()
    _collect_columns(plan, refs)
    case_cols = tuple(sorted(name for level, name in refs if level is Level.CASE))
    event_cols = tuple(sorted(name for level, name in refs if level is Level.EVENT))

    def rewrite(node: PlanNode) -> PlanNode:
        if isinstance(node, Scan):
            return replace(node, case_columns=case_cols, event_columns=event_cols)
        return replace(node, child=rewrite(node.child))

    return rewrite(plan)


def scan_columns(plan: PlanNode) -> list[tuple[Level, str]] | None:
    """The snapshot column request implied by the (optimized) plan."""
    node = plan
    while not isinstance(node, Scan):
        node = node.child
    if node.case_columns is None and node.event_columns is None:
        return None
    return [(Level.CASE, n) for n in node.case_columns or ()] + [
        (Level.EVENT, n) for n in node.event_columns or ()
    ]


# --- value helpers ---------------------------------------------------------------

_PLACEHOLDER = {B: False, N: 0.0, S: "", T: 0, D: 0}
_OUT_DTYPE = {B: np.bool_, N: np.float64, T: np.int64, D: np.int64}


def _column_arrays(col: ColumnData, idx) -> tuple[np.ndarray, np.ndarray | None]:
    data = col.data if idx is None else col.data[idx]
    if col.type is S:
        codes = data
        member = codes >= 0
        out = np.full(len(codes), "", dtype=object)
        if len(col.dictionary) and member.any():
            lookup = np.array(col.dictionary, dtype=object)
            out[member] = lookup[codes[member]]
        return out, (None if member.all() else member)
    valid = col.valid
    if valid is not None and idx is not None:
        valid = valid[idx]
    return data, valid


def _and_valid(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a & b


def _known_true(v, k):
    return v if k is None else v & k


def _known_false(v, k):
    return ~v if k is None else ~v & k


def _kleene_and(lv, lk, rv, rk):
    if lk is None and rk is None:
        return lv & rv, None
    t = _known_true(lv, lk) & _known_true(rv, rk)
    f = _known_false(lv, lk) | _known_false(rv, rk)
    return t, t | f


def _kleene_or(lv, lk, rv, rk):
    if lk is None and rk is None:
        return lv | rv, None
    t = _known_true(lv, lk) | _known_true(rv, rk)
    f = _known_false(lv, lk) & _known_false(rv, rk)
    return t, t | f


_CMP = {
    "=": np.equal,
    "!=": np.not_equal,
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}


def _literal_arrays(te: TLiteral, n: int):
    if te.value is None:
        stype = te.stype or N
        dtype = object if stype is S else _OUT_DTYPE[stype]
        return np.full(n, _PLACEHOLDER[stype], dtype=dtype), np.zeros(n, dtype=np.bool_)
    if te.stype is S:
        return np.full(n, te.value, dtype=object), None
    if te.stype is B:
        return np.full(n, te.value, dtype=np.bool_), None
    if te.stype in (T, D):
        return np.full(n, int(te.value), dtype=np.int64), None
    return np.full(n, float(te.value), dtype=np.float64), None


def _eval_expr(te: TExpr, n: int, leaf):
    """Generic evaluator; `leaf` resolves context-dependent nodes."""
    if isinstance(te, TLiteral):
        return _literal_arrays(te, n)
    if isinstance(te, TUnary):
        v, k = _eval_expr(te.operand, n, leaf)
        if te.op == "NOT":
            return ~v, k
        return -v, k
    if isinstance(te, TBinary):
        if te.op in ("AND", "OR"):
            lv, lk = _eval_expr(te.left, n, leaf)
            rv, rk = _eval_expr(te.right, n, leaf)
            fn = _kleene_and if te.op == "AND" else _kleene_or
            return fn(lv, lk, rv, rk)
        lv, lk = _eval_expr(te.left, n, leaf)
        rv, rk = _eval_expr(te.right, n, leaf)
        valid = _and_valid(lk, rk)
        if te.op in _CMP:
            return _CMP[te.op](lv, rv), valid
        if te.op == "/":
            nonzero = rv != 0
            valid = _and_valid(valid, None if nonzero.all() else nonzero)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = lv / np.where(nonzero, rv, 1.0)
            return out, valid
        if te.op == "+":
            return lv + rv, valid
        if te.op == "-":
            return lv - rv, valid
        return lv * rv, valid
    if isinstance(te, TIsNull):
        v, k = _eval_expr(te.operand, n, leaf)
        nullness = np.zeros(n, dtype=np.bool_) if k is None else ~k
        return (~nullness if te.negated else nullness), None
    if isinstance(te, TInList):
        ov, ok = _eval_expr(te.operand, n, leaf)
        acc_v = np.zeros(n, dtype=np.bool_)
        acc_k = None
        for item in te.items:
            iv, ik = _eval_expr(item, n, leaf)
            eq_v, eq_k = np.equal(ov, iv), _and_valid(ok, ik)
            acc_v, acc_k = _kleene_or(acc_v, acc_k, eq_v, eq_k)
        if te.negated:
            return ~acc_v, acc_k
        return acc_v, acc_k
    return leaf(te)


def _as_filter(v, k) -> np.ndarray:
    """3VL condition to keep-mask: only known-true rows pass."""
    return v if k is None else v & k


# --- row contexts ----------------------------------------------------------------


class _CaseRows:
    """Rows are cases of the snapshot, restricted to `sel` (None = all)."""

    def __init__(self, ex: "_Executor", sel):
        self.ex = ex
        self.sel = sel

    @property
    def n_rows(self) -> int:
        return self.ex.snap.n_cases if self.sel is None else len(self.sel)

    def _base(self):
        return np.arange(self.ex.snap.n_cases) if self.sel is None else self.sel

    def eval(self, te: TExpr):
        return self.ex.eval_case(te, self.sel)

    def keep(self, mask):
        return _CaseRows(self.ex, self._base()[mask])

    def take(self, idx):
        return _CaseRows(self.ex, self._base()[idx])


class _FlatRows:
    """Rows are events; case attributes are broadcast per event."""

    def __init__(self, ex: "_Executor", sel):
        self.ex = ex
        self.sel = sel

    @property
    def n_rows(self) -> int:
        return self.ex.snap.n_events if self.sel is None else len(self.sel)

    def _base(self):
        return np.arange(self.ex.snap.n_events) if self.sel is None else self.sel

    def eval(self, te: TExpr):
        return self.ex.eval_flat(te, self.sel)

    def keep(self, mask):
        return _FlatRows(self.ex, self._base()[mask])

    def take(self, idx):
        return _FlatRows(self.ex, self._base()[idx])


class _SlotRows:
    """Materialized rows out of an Aggregate; TSlot indexes the columns."""

    def __init__(self, columns: list[tuple[np.ndarray, np.ndarray | None]], n_rows: int):
        self.columns = columns
        self.n_rows = n_rows

    def eval(self, te: TExpr):
        def leaf(node: TExpr):
            if isinstance(node, TSlot):
                return self.columns[node.index]
            raise EvaluationError(f"unexpected {type(node).__name__} after aggregation")

        return _eval_expr(te, self.n_rows, leaf)

    def keep(self, mask):
        return self.take(np.flatnonzero(mask))

    def take(self, idx):
        cols = [
            (v[idx], None if k is None else k[idx]) for v, k in self.columns
        ]
        return _SlotRows(cols, len(idx))


# --- executor ----------------------------------------------------------------------


def execute(aq: AnalyzedQuery, snapshot: Snapshot, max_cells: int = DEFAULT_MAX_CELLS) -> ResultTable:
    out = _Executor(snapshot, max_cells).run(aq.plan)
    if not isinstance(out, ResultTable):
        raise EvaluationError("plan did not terminate in a projection")
    return out


class _Executor:
    def __init__(self, snapshot: Snapshot, max_cells: int = DEFAULT_MAX_CELLS):
        self.snap = snapshot
        self.max_cells = max_cells

    # --- plan walk ---------------------------------------------------------------

    def run(self, plan: PlanNode):
        if isinstance(plan, Scan):
            return _FlatRows(self, None) if plan.flattened else _CaseRows(self, None)
        if isinstance(plan, PatternFilter):
            rows = self.run(plan.child)
            flags = self._pattern_flags(plan, rows.sel)
            if plan.negate:
                flags = ~flags
            return rows.keep(flags)
        if isinstance(plan, ExistsFilter):
            rows = self.run(plan.child)
            if rows.n_rows == 0:
                return rows
            _, offs = self.event_selection(rows.sel)
            v, k = self.eval_event(plan.cond, rows.sel)
            keep = _as_filter(v, k)
            return rows.keep(np.logical_or.reduceat(keep, offs[:-1]))
        if isinstance(plan, Filter):
            rows = self.run(plan.child)
            v, k = rows.eval(plan.cond)
            return rows.keep(_as_filter(v, k))
        if isinstance(plan, Aggregate):
            rows = self.run(plan.child)
            return self._aggregate(rows, plan.keys, plan.aggs)
        if isinstance(plan, Sort):
            rows = self.run(plan.child)
            keys = [rows.eval(e) + (desc,) for e, desc in plan.keys]
            return rows.take(sort_permutation(keys, rows.n_rows))
        if isinstance(plan, Project):
            rows = self.run(plan.child)
            if rows.n_rows * max(len(plan.exprs), 1) > self.max_cells:
                raise ResourceLimitExceeded(
                    f"result would exceed {self.max_cells} cells"
                )
            columns = [
                _make_column(stype, *rows.eval(e))
                for e, stype in zip(plan.exprs, plan.types)
            ]
            return ResultTable(list(plan.names), list(plan.types), columns)
        if isinstance(plan, Limit):
            out = self.run(plan.child)
            if isinstance(out, ResultTable):
                return _slice_result(out, plan.n)
            return out.take(np.arange(min(plan.n, out.n_rows)))
        raise TypeError(type(plan).__name__)

    # --- selections ----------------------------------------------------------------

    def event_selection(self, sel):
        """(event index array | None, per-case offsets) for selected cases."""
        offs = self.snap.case_offsets
        if sel is None:
            return None, offs
        starts = offs[sel]
        lens = offs[sel + 1] - starts
        sub_offsets = np.concatenate(([0], np.cumsum(lens)))
        total = int(sub_offsets[-1])
        idx = np.arange(total, dtype=np.int64) + np.repeat(starts - sub_offsets[:-1], lens)
        return idx, sub_offsets

    # --- expression contexts ---------------------------------------------------------

    def eval_case(self, te: TExpr, sel):
        n = self.snap.n_cases if sel is None else len(sel)

        def leaf(node: TExpr):
            if isinstance(node, TColumn):
                if node.level is not Level.CASE:
                    raise EvaluationError(
                        f"event column {node.name!r} reached case context"
                    )
                return _column_arrays(self.snap.column(Level.CASE, node.name), sel)
            if isinstance(node, TEventAgg):
                return self._event_agg(node, sel)
            raise EvaluationError(f"unexpected {type(node).__name__} in case context")

        return _eval_expr(te, n, leaf)

    def eval_event(self, te: TExpr, sel):
        event_idx, offs = self.event_selection(sel)
        n = int(offs[-1])
        lens = offs[1:] - offs[:-1]

        def leaf(node: TExpr):
            if isinstance(node, TColumn):
                if node.level is Level.EVENT:
                    return _column_arrays(self.snap.column(Level.EVENT, node.name), event_idx)
                v, k = _column_arrays(self.snap.column(Level.CASE, node.name), sel)
                return np.repeat(v, lens), None if k is None else np.repeat(k, lens)
            if isinstance(node, TEventAgg):
                v, k = self._event_agg(node, sel)
                return np.repeat(v, lens), None if k is None else np.repeat(k, lens)
            raise EvaluationError(f"unexpected {type(node).__name__} in event context")

        return _eval_expr(te, n, leaf)

    def eval_flat(self, te: TExpr, sel):
        n = self.snap.n_events if sel is None else len(sel)

        def leaf(node: TExpr):
            if isinstance(node, TColumn):
                if node.level is Level.EVENT:
                    return _column_arrays(self.snap.column(Level.EVENT, node.name), sel)
                case_of = np.repeat(
                    np.arange(self.snap.n_cases), self.snap.case_lengths()
                )
                idx = case_of if sel is None else case_of[sel]
                return _column_arrays(self.snap.column(Level.CASE, node.name), idx)
            raise EvaluationError(f"unexpected {type(node).__name__} on a flattened source")

        return _eval_expr(te, n, leaf)

    # --- event aggregation -------------------------------------------------------------

    def _event_agg(self, te: TEventAgg, sel):
        _, offs = self.event_selection(sel)
        cond = None
        for c in te.cond:
            v, k = self.eval_event(c, sel)
            cond = _and_valid(cond, _as_filter(v, k))
        if te.func == "COUNT" and te.arg is None:
            return kernels.seg_counts(offs, cond).astype(np.float64), None
        vals, valid = self.eval_event(te.arg, sel)
        return _reduce_segments(te.func, te.distinct, te.stype, vals, valid, offs, cond)

    # --- pattern filter ------------------------------------------------------------------

    def _pattern_flags(self, node: PatternFilter, sel) -> np.ndarray:
        event_idx, offs = self.event_selection(sel)
        n_ev = int(offs[-1])
        behaviours = dict(node.behaviours)

        subject = node.subject
        needs_lit = any(
            isinstance(leaf, ClassLit)
            for cls in node.compiled.classes
            for leaf in _class_leaves(cls)
        )
        if not needs_lit:

            def lit_bitmap(text: str) -> np.ndarray:
                raise EvaluationError("literal class without a subject")

        elif subject is None or (
            isinstance(subject, TColumn)
            and subject.level is Level.EVENT
            and subject.stype is S
        ):
            # dictionary fast path: literal classes become one code comparison
            name = "event_name" if subject is None else subject.name
            col = self.snap.column(Level.EVENT, name)
            codes = col.data if event_idx is None else col.data[event_idx]
            index = {s: i for i, s in enumerate(col.dictionary)}

            def lit_bitmap(text: str) -> np.ndarray:
                return codes == index.get(text, -2)

        else:
            subj_v, subj_k = self.eval_event(subject, sel)

            def lit_bitmap(text: str) -> np.ndarray:
                eq = np.equal(subj_v, text)
                return eq if subj_k is None else eq & subj_k

        cache: dict[EventClass, np.ndarray] = {}

        def base(cls: EventClass) -> np.ndarray:
            if isinstance(cls, ClassLit):
                return lit_bitmap(cls.text)
            if isinstance(cls, ClassAny):
                return np.ones(n_ev, dtype=np.bool_)
            v, k = self.eval_event(behaviours[cls.name], sel)
            return _as_filter(v, k)

        def bitmap(cls: EventClass) -> np.ndarray:
            if cls not in cache:
                cache[cls] = class_bitmap(cls, base)
            return cache[cls]

        total = None
        for branch in node.compiled.branches:
            mm = build_match_masks([bitmap(c) for c in branch.classes])
            flags = kernels.match_cases(
                mm,
                offs,
                branch.follow,
                branch.accept_mask,
                branch.anchored_start,
                branch.anchored_end,
            )
            total = flags if total is None else total | flags
        return total

    # --- aggregation ---------------------------------------------------------------------

    def _aggregate(self, rows, keys, aggs) -> _SlotRows:
        n = rows.n_rows
        key_data = [rows.eval(k) for k in keys]
        agg_args = [None if a.arg is None else rows.eval(a.arg) for a in aggs]

        if not keys:
            # implicit single group, present even over empty input
            columns = []
            for agg, arg in zip(aggs, agg_args):
                if n == 0:
                    if agg.func == "COUNT":
                        columns.append((np.zeros(1, dtype=np.float64), None))
                    else:
                        stype = agg.stype
                        dtype = object if stype is S else _OUT_DTYPE[stype]
                        columns.append(
                            (
                                np.full(1, _PLACEHOLDER[stype], dtype=dtype),
                                np.zeros(1, dtype=np.bool_),
                            )
                        )
                    continue
                columns.append(self._one_agg(agg, arg, np.array([0, n])))
            return _SlotRows(columns, 1)

        perm = sort_permutation([(v, k, False) for v, k in key_data], n)
        sorted_keys = [
            (v[perm], None if k is None else k[perm]) for v, k in key_data
        ]
        boundary = np.zeros(n, dtype=np.bool_)
        if n:
            boundary[0] = True
        for v, k in sorted_keys:
            if not n:
                break
            neq = np.not_equal(v[1:], v[:-1])
            if k is not None:
                # two NULL keys compare equal; a NULL never equals a value
                neq = (neq & k[1:] & k[:-1]) | (k[1:] != k[:-1])
            boundary[1:] |= neq
        starts = np.flatnonzero(boundary)
        offs = np.append(starts, n)
        n_groups = len(starts)
        columns = [
            (v[starts], None if k is None else k[starts]) for v, k in sorted_keys
        ]
        for agg, arg in zip(aggs, agg_args):
            if n_groups == 0:
                stype = agg.stype
                dtype = object if stype is S else _OUT_DTYPE[stype]
                columns.append((np.empty(0, dtype=dtype), None))
                continue
            sorted_arg = (
                None
                if arg is None
                else (arg[0][perm], None if arg[1] is None else arg[1][perm])
            )
            columns.append(self._one_agg(agg, sorted_arg, offs))
        return _SlotRows(columns, n_groups)

    def _one_agg(self, agg: TGroupAgg, arg, offs):
        if agg.func == "COUNT" and agg.arg is None:
            return (offs[1:] - offs[:-1]).astype(np.float64), None
        vals, valid = arg
        return _reduce_segments(agg.func, agg.distinct, agg.stype, vals, valid, offs, None)


# --- shared reductions -------------------------------------------------------------


def _reduce_segments(func, distinct, stype, vals, valid, offs, cond):
    if func == "COUNT":
        if distinct:
            return _distinct_counts(vals, valid, offs, cond).astype(np.float64), None
        return kernels.seg_counts(offs, cond, valid).astype(np.float64), None
    if func in ("FIRST", "LAST"):
        gather = kernels.gather_first if func == "FIRST" else kernels.gather_last
        out, out_valid = gather(vals, valid, offs, cond)
        return out, (None if out_valid is None or out_valid.all() else out_valid)
    if func == "SUM":
        sums, counts = kernels.seg_sum(vals, valid, offs, cond)
        has = counts > 0
        return sums, (None if has.all() else has)
    if func == "AVG":
        sums, counts = kernels.seg_sum(vals, valid, offs, cond)
        has = counts > 0
        denom = np.maximum(counts, 1)
        avg = sums / denom
        if stype is D:
            avg = np.rint(avg).astype(np.int64)
        return avg, (None if has.all() else has)
    # MIN / MAX
    want_max = func == "MAX"
    if vals.dtype == object:
        ranks, uniq = _string_ranks(vals, valid, cond)
        fn = kernels.seg_max if want_max else kernels.seg_min
        extremes, counts = fn(ranks, valid, offs, cond)
        has = counts > 0
        out = np.full(len(extremes), "", dtype=object)
        if len(uniq):
            out[has] = uniq[np.clip(extremes[has], 0, len(uniq) - 1)]
        return out, (None if has.all() else has)
    fn = kernels.seg_max if want_max else kernels.seg_min
    extremes, counts = fn(vals, valid, offs, cond)
    has = counts > 0
    return extremes, (None if has.all() else has)


def _string_ranks(vals, valid, cond):
    keep = np.ones(len(vals), dtype=np.bool_)
    if valid is not None:
        keep &= valid
    if cond is not None:
        keep &= cond
    safe = np.where(keep, vals, "")
    uniq, inv = np.unique(safe, return_inverse=True)
    return inv.astype(np.int64), uniq


def _distinct_counts(vals, valid, offs, cond):
    n_seg = len(offs) - 1
    keep = np.ones(len(vals), dtype=np.bool_)
    if valid is not None:
        keep &= valid
    if cond is not None:
        keep &= cond
    seg_of = np.repeat(np.arange(n_seg, dtype=np.int64), offs[1:] - offs[:-1])
    kept_seg = seg_of[keep]
    kept_vals = vals[keep]
    if len(kept_vals) == 0:
        return np.zeros(n_seg, dtype=np.int64)
    _, inv = np.unique(kept_vals, return_inverse=True)
    pair = kept_seg * (int(inv.max()) + 2) + inv
    unique_pairs = np.unique(pair)
    seg_ids = (unique_pairs // (int(inv.max()) + 2)).astype(np.int64)
    return np.bincount(seg_ids, minlength=n_seg)


# --- sorting ----------------------------------------------------------------------


def sort_permutation(keys, n: int) -> np.ndarray:
    """Stable permutation; NULL sorts as the largest value of its type."""
    if not keys:
        return np.arange(n)
    arrays = []
    for vals, valid, desc in reversed(list(keys)):
        flag = np.zeros(n, dtype=np.int8) if valid is None else (~valid).astype(np.int8)
        if vals.dtype == object:
            safe = vals if valid is None else np.where(valid, vals, "")
            _, v = np.unique(safe, return_inverse=True)
            v = v.astype(np.int64)
        elif vals.dtype == np.bool_:
            v = vals.astype(np.int8)
        else:
            v = vals
        if desc:
            v = -v
            flag = -flag
        arrays.append(v)
        arrays.append(flag)
    # arrays run least-significant first; np.lexsort takes the last entry
    # as the primary key, which is key 0's null flag, then key 0's value
    return np.lexsort(arrays)


# --- output ------------------------------------------------------------------------


def _make_column(stype: ScalarType, values, valid) -> ColumnData:
    n = len(values)
    if stype is S:
        member = np.ones(n, dtype=np.bool_) if valid is None else valid
        safe = np.where(member, values, "")
        uniq, inv = np.unique(safe, return_inverse=True)
        codes = inv.astype(np.int32)
        codes[~member] = -1
        v = None if member.all() else member.copy()
        return ColumnData(S, codes, v, tuple(str(u) for u in uniq))
    dtype = _OUT_DTYPE[stype]
    data = np.asarray(values).astype(dtype, copy=True)
    if valid is not None and not valid.all():
        data[~valid] = np.nan if stype is N else _PLACEHOLDER[stype]
        return ColumnData(stype, data, valid.copy())
    return ColumnData(stype, data, None)


def _slice_result(table: ResultTable, n: int) -> ResultTable:
    cols = [
        ColumnData(c.type, c.data[:n], None if c.valid is None else c.valid[:n], c.dictionary)
        for c in table.columns
    ]
    return ResultTable(list(table.names), list(table.types), cols)
