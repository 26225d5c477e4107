"""Pattern compilation for MATCHES.

A pattern is normalized into anchored branches (top-level alternation may
carry per-branch anchors), each branch lowered to a core form over event
classes, then compiled with the Glushkov construction into a position
automaton. States are bitmasks in a single uint64: bit 0 is the initial
state, bits 1..n are atom positions, so a branch is limited to 63 positions.

`a -> b` and plain juxtaposition both mean direct succession; `a ~> b`
inserts an implicit ANY* between the operands. NOT takes a single-event
class and matches its complement (an event with an unknown predicate value
is not in the class, hence in the complement).

`reference_match` is a deliberately slow window-enumeration matcher kept as
an independent check on the automaton.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import (
    InvalidNotOperand,
    MisplacedAnchor,
    ResourceLimitExceeded,
    Span,
    UnknownBehaviour,
)
from .parser import (
    PAlt,
    PAnchored,
    PAny,
    PIdent,
    PLiteral,
    PNot,
    PSeq,
    PStar,
    Pattern,
)

MAX_POSITIONS = 63


# --- event classes -----------------------------------------------------------


@dataclass(frozen=True)
class ClassLit:
    """Events whose subject value equals `text`."""
    text: str


@dataclass(frozen=True)
class ClassBehaviour:
    name: str


@dataclass(frozen=True)
class ClassAny:
    pass


@dataclass(frozen=True)
class ClassNot:
    inner: "EventClass"


@dataclass(frozen=True)
class ClassUnion:
    parts: tuple["EventClass", ...]


EventClass = ClassLit | ClassBehaviour | ClassAny | ClassNot | ClassUnion


def class_bitmap(cls: EventClass, base: Callable[[EventClass], np.ndarray]) -> np.ndarray:
    """Membership bitmap for a class; `base` resolves Lit/Behaviour/Any."""
    if isinstance(cls, ClassNot):
        return ~class_bitmap(cls.inner, base)
    if isinstance(cls, ClassUnion):
        out = class_bitmap(cls.parts[0], base)
        for part in cls.parts[1:]:
            out = out | class_bitmap(part, base)
        return out
    return base(cls)


# --- core form ---------------------------------------------------------------


@dataclass(frozen=True)
class CAtom:
    pos: int  # 1-based position


@dataclass(frozen=True)
class CConcat:
    parts: tuple


@dataclass(frozen=True)
class CAlt:
    parts: tuple


@dataclass(frozen=True)
class CStar:
    part: object


@dataclass(frozen=True)
class CompiledBranch:
    anchored_start: bool
    anchored_end: bool
    nullable: bool
    classes: tuple[EventClass, ...]  # classes[p - 1] is the class of position p
    follow: np.ndarray  # uint64, follow[p] = bitmask of successor positions
    accept_mask: int  # last positions, plus bit 0 when nullable
    core: object


@dataclass(frozen=True)
class CompiledPattern:
    branches: tuple[CompiledBranch, ...]

    @property
    def classes(self) -> tuple[EventClass, ...]:
        seen: dict[EventClass, None] = {}
        for branch in self.branches:
            for cls in branch.classes:
                seen.setdefault(cls)
        return tuple(seen)


# --- normalization -----------------------------------------------------------


def normalize(ast: Pattern) -> list[tuple[bool, bool, Pattern]]:
    """Split into (anchored_start, anchored_end, body) branches.

    Anchors are legal at the root and on parenthesized branches of a
    top-level alternation; anywhere deeper they have no coherent window
    semantics and are rejected during lowering.
    """
    start = end = False
    root = ast
    if isinstance(root, PAnchored):
        start, end, root = root.start, root.end, root.body
    branches = root.branches if isinstance(root, PAlt) else (root,)
    out = []
    for branch in branches:
        b_start, b_end = start, end
        if isinstance(branch, PAnchored):
            b_start = b_start or branch.start
            b_end = b_end or branch.end
            branch = branch.body
        out.append((b_start, b_end, branch))
    return out


def _class_of(node: Pattern, behaviours: set[str]) -> EventClass | None:
    if isinstance(node, PLiteral):
        return ClassLit(node.text)
    if isinstance(node, PIdent):
        if node.name not in behaviours:
            raise UnknownBehaviour(f"unknown behaviour {node.name!r}", Span(*node.span))
        return ClassBehaviour(node.name)
    if isinstance(node, PAny):
        return ClassAny()
    if isinstance(node, PNot):
        inner = _class_of(node.operand, behaviours)
        return None if inner is None else ClassNot(inner)
    if isinstance(node, PAlt):
        parts = [_class_of(b, behaviours) for b in node.branches]
        if all(p is not None for p in parts):
            return ClassUnion(tuple(parts))
        return None
    if isinstance(node, PSeq) and len(node.items) == 1:
        return _class_of(node.items[0], behaviours)
    return None


class _Lowerer:
    def __init__(self, behaviours: set[str]):
        self.behaviours = behaviours
        self.classes: list[EventClass] = []

    def atom(self, cls: EventClass) -> CAtom:
        self.classes.append(cls)
        return CAtom(len(self.classes))

    def lower(self, node: Pattern):
        if isinstance(node, (PLiteral, PIdent, PAny)):
            return self.atom(_class_of(node, self.behaviours))
        if isinstance(node, PNot):
            cls = _class_of(node, self.behaviours)
            if cls is None:
                raise InvalidNotOperand(
                    "NOT requires a single-event operand", Span(*node.span)
                )
            return self.atom(cls)
        if isinstance(node, PStar):
            return CStar(self.lower(node.operand))
        if isinstance(node, PSeq):
            parts = [self.lower(node.items[0])]
            for sep, item in zip(node.seps, node.items[1:]):
                if sep == "~>":
                    parts.append(CStar(self.atom(ClassAny())))
                parts.append(self.lower(item))
            return CConcat(tuple(parts))
        if isinstance(node, PAlt):
            return CAlt(tuple(self.lower(b) for b in node.branches))
        if isinstance(node, PAnchored):
            raise MisplacedAnchor(
                "anchors are only valid at the top level of a pattern or of an "
                "alternation branch",
                Span(*node.span),
            )
        raise TypeError(f"cannot lower {type(node).__name__}")


def _glushkov(node, follow: dict[int, set[int]]) -> tuple[bool, set[int], set[int]]:
    """Returns (nullable, first, last), accumulating the follow relation."""
    if isinstance(node, CAtom):
        return False, {node.pos}, {node.pos}
    if isinstance(node, CConcat):
        nullable, first, last = _glushkov(node.parts[0], follow)
        for part in node.parts[1:]:
            p_null, p_first, p_last = _glushkov(part, follow)
            for p in last:
                follow[p] |= p_first
            first = first | p_first if nullable else first
            last = last | p_last if p_null else p_last
            nullable = nullable and p_null
        return nullable, first, last
    if isinstance(node, CAlt):
        nullable, first, last = False, set(), set()
        for part in node.parts:
            p_null, p_first, p_last = _glushkov(part, follow)
            nullable = nullable or p_null
            first |= p_first
            last |= p_last
        return nullable, first, last
    if isinstance(node, CStar):
        _, first, last = _glushkov(node.part, follow)
        for p in last:
            follow[p] |= first
        return True, first, last
    raise TypeError(f"cannot analyze {type(node).__name__}")


def _mask(positions: Iterable[int]) -> int:
    out = 0
    for p in positions:
        out |= 1 << p
    return out


def compile_pattern(ast: Pattern, behaviours: Iterable[str] = ()) -> CompiledPattern:
    known = set(behaviours)
    compiled = []
    for anchored_start, anchored_end, body in normalize(ast):
        lowerer = _Lowerer(known)
        core = lowerer.lower(body)
        n_pos = len(lowerer.classes)
        if n_pos > MAX_POSITIONS:
            raise ResourceLimitExceeded(
                f"pattern needs {n_pos} positions, limit is {MAX_POSITIONS}"
            )
        follow: dict[int, set[int]] = {p: set() for p in range(1, n_pos + 1)}
        nullable, first, last = _glushkov(core, follow)
        follow_arr = np.zeros(n_pos + 1, dtype=np.uint64)
        follow_arr[0] = _mask(first)
        for p in range(1, n_pos + 1):
            follow_arr[p] = _mask(follow[p])
        accept = _mask(last) | (1 if nullable else 0)
        compiled.append(
            CompiledBranch(
                anchored_start=anchored_start,
                anchored_end=anchored_end,
                nullable=nullable,
                classes=tuple(lowerer.classes),
                follow=follow_arr,
                accept_mask=accept,
                core=core,
            )
        )
    return CompiledPattern(tuple(compiled))


def build_match_masks(bitmaps: list[np.ndarray]) -> np.ndarray:
    """Pack per-position membership bitmaps into per-event uint64 masks.

    Bit p of masks[e] is set iff event e belongs to the class of position p.
    """
    n_events = len(bitmaps[0]) if bitmaps else 0
    masks = np.zeros(n_events, dtype=np.uint64)
    for p, bitmap in enumerate(bitmaps, start=1):
        masks |= bitmap.astype(np.uint64) << np.uint64(p)
    return masks


# --- reference matcher -------------------------------------------------------


def reference_match(branch: CompiledBranch, masks, start: int, end: int) -> bool:
    """Window-enumeration matcher, independent of the automaton path."""
    memo: dict[tuple, bool] = {}

    def member(pos: int, e: int) -> bool:
        return bool((int(masks[e]) >> pos) & 1)

    def rec(node, i: int, j: int) -> bool:
        key = (id(node), i, j)
        if key in memo:
            return memo[key]
        memo[key] = False  # cycle guard for star self-splits
        if isinstance(node, CAtom):
            result = j == i + 1 and member(node.pos, i)
        elif isinstance(node, CConcat):
            result = seq(node.parts, 0, i, j)
        elif isinstance(node, CAlt):
            result = any(rec(p, i, j) for p in node.parts)
        elif isinstance(node, CStar):
            result = i == j or any(
                rec(node.part, i, k) and rec(node, k, j) for k in range(i + 1, j + 1)
            )
        else:
            raise TypeError(type(node).__name__)
        memo[key] = result
        return result

    def seq(parts, at: int, i: int, j: int) -> bool:
        key = ("seq", id(parts), at, i, j)
        if key in memo:
            return memo[key]
        if at == len(parts):
            result = i == j
        else:
            result = any(
                rec(parts[at], i, k) and seq(parts, at + 1, k, j)
                for k in range(i, j + 1)
            )
        memo[key] = result
        return result

    starts = [start] if branch.anchored_start else range(start, end + 1)
    for i in starts:
        ends = [end] if branch.anchored_end else range(i, end + 1)
        for j in ends:
            if j < i:
                continue
            if rec(branch.core, i, j):
                return True
    return False


def reference_match_pattern(pattern: CompiledPattern, branch_masks, offsets) -> np.ndarray:
    """Per-case match flags using only the reference matcher."""
    n_cases = len(offsets) - 1
    out = np.zeros(n_cases, dtype=np.bool_)
    for c in range(n_cases):
        s, e = int(offsets[c]), int(offsets[c + 1])
        out[c] = any(
            reference_match(branch, masks, s, e)
            for branch, masks in zip(pattern.branches, branch_masks)
        )
    return out
