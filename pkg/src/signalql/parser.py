"""Tokenizer and recursive-descent parser for the query language.

Produces a plain AST (dataclasses below); name/type/level resolution happens
in the analyzer. Spans are (start, end) character offsets into the source and
are excluded from equality so structurally equal ASTs compare equal.

Pattern grammar, parsed with the same token stream:

    pattern := ['^'] alt ['$']
    alt     := seq ('|' seq)*
    seq     := rep (rep | '->' rep | '~>' rep)*
    rep     := atom ['*']
    atom    := string | identifier | ANY | NOT atom | '(' pattern ')'
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import IllegalCharacter, Span, SyntaxError_, UnterminatedString

KEYWORDS = {
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "ORDER", "LIMIT", "ASC", "DESC",
    "AND", "OR", "NOT", "TRUE", "FALSE", "NULL", "IS", "IN", "AS", "DISTINCT",
    "BEHAVIOUR", "BEHAVIOR", "MATCHES", "ANY", "FLATTEN", "THIS_PROCESS",
}

AGG_FUNCS = ("COUNT", "SUM", "AVG", "MIN", "MAX", "FIRST", "LAST")

_OPS = ("->", "~>", "!=", "<>", "<=", ">=",
        "(", ")", ",", "*", "=", "<", ">", "+", "-", "/", "|", "^", "$", ";", ".")


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT | QIDENT | STRING | NUMBER | KW | OP | EOF
    text: str
    value: Any
    start: int
    end: int

    @property
    def span(self) -> Span:
        return Span(self.start, self.end)


def tokenize(src: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if src.startswith("--", i):
            j = src.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if c == "'":
            text, j = _scan_quoted(src, i, "'")
            tokens.append(Token("STRING", src[i:j], text, i, j))
            i = j
            continue
        if c == '"':
            text, j = _scan_quoted(src, i, '"')
            if text == "":
                raise SyntaxError_("empty quoted identifier", Span(i, j))
            tokens.append(Token("QIDENT", src[i:j], text, i, j))
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            is_float = False
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            text = src[i:j]
            tokens.append(Token("NUMBER", text, float(text) if is_float else int(text), i, j))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            text = src[i:j]
            upper = text.upper()
            if upper == "BEHAVIOR":
                upper = "BEHAVIOUR"
            if upper in KEYWORDS:
                tokens.append(Token("KW", upper, None, i, j))
            else:
                tokens.append(Token("IDENT", text, None, i, j))
            i = j
            continue
        for op in _OPS:
            if src.startswith(op, i):
                tokens.append(Token("OP", op, None, i, i + len(op)))
                i += len(op)
                break
        else:
            raise IllegalCharacter(f"illegal character {c!r}", Span(i, i + 1))
    tokens.append(Token("EOF", "", None, n, n))
    return tokens


def _scan_quoted(src: str, start: int, quote: str) -> tuple[str, int]:
    """Scan a quoted token starting at `start`; doubled quotes escape."""
    parts: list[str] = []
    i = start + 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == quote:
            if i + 1 < n and src[i + 1] == quote:
                parts.append(quote)
                i += 2
                continue
            return "".join(parts), i + 1
        parts.append(c)
        i += 1
    what = "string literal" if quote == "'" else "quoted identifier"
    raise UnterminatedString(f"unterminated {what}", Span(start, n))


# --- AST ---------------------------------------------------------------------

SpanT = tuple[int, int]


def _span() -> Any:
    return field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Literal(Expr):
    value: Any  # None | bool | int | float | str
    span: SpanT = _span()


@dataclass(frozen=True)
class ColumnRef(Expr):
    name: str
    quoted: bool = False
    span: SpanT = _span()


@dataclass(frozen=True)
class Star(Expr):
    span: SpanT = _span()


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # '-' | 'NOT'
    operand: Expr
    span: SpanT = _span()


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # arithmetic, comparison, AND, OR
    left: Expr
    right: Expr
    span: SpanT = _span()


@dataclass(frozen=True)
class IsNull(Expr):
    operand: Expr
    negated: bool
    span: SpanT = _span()


@dataclass(frozen=True)
class InList(Expr):
    operand: Expr
    items: tuple[Expr, ...]
    negated: bool
    span: SpanT = _span()


@dataclass(frozen=True)
class FuncCall(Expr):
    name: str  # upper-cased
    args: tuple[Expr, ...]
    distinct: bool = False
    star: bool = False
    span: SpanT = _span()


@dataclass(frozen=True)
class ScalarSubquery(Expr):
    """(SELECT expr [WHERE cond]) over the current case's events."""
    item: Expr
    where: Expr | None
    span: SpanT = _span()


@dataclass(frozen=True)
class Matches(Expr):
    subject: Expr | None
    pattern: "Pattern"
    span: SpanT = _span()


@dataclass(frozen=True)
class Pattern:
    pass


@dataclass(frozen=True)
class PLiteral(Pattern):
    text: str
    span: SpanT = _span()


@dataclass(frozen=True)
class PIdent(Pattern):
    name: str
    span: SpanT = _span()


@dataclass(frozen=True)
class PAny(Pattern):
    span: SpanT = _span()


@dataclass(frozen=True)
class PNot(Pattern):
    operand: Pattern
    span: SpanT = _span()


@dataclass(frozen=True)
class PStar(Pattern):
    operand: Pattern
    span: SpanT = _span()


@dataclass(frozen=True)
class PSeq(Pattern):
    items: tuple[Pattern, ...]
    seps: tuple[str, ...]  # '' (juxtaposition), '->' or '~>'; len == len(items) - 1
    span: SpanT = _span()


@dataclass(frozen=True)
class PAlt(Pattern):
    branches: tuple[Pattern, ...]
    span: SpanT = _span()


@dataclass(frozen=True)
class PAnchored(Pattern):
    start: bool
    end: bool
    body: Pattern
    span: SpanT = _span()


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None
    span: SpanT = _span()


@dataclass(frozen=True)
class Source:
    pass


@dataclass(frozen=True)
class SourceLog(Source):
    name: str
    span: SpanT = _span()


@dataclass(frozen=True)
class SourceThisProcess(Source):
    span: SpanT = _span()


@dataclass(frozen=True)
class SourceFlatten(Source):
    inner: Source
    span: SpanT = _span()


@dataclass(frozen=True)
class Behaviour:
    name: str
    expr: Expr
    span: SpanT = _span()


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    descending: bool
    span: SpanT = _span()


@dataclass(frozen=True)
class QueryAst:
    select: tuple[SelectItem, ...]
    source: Source
    behaviours: tuple[Behaviour, ...]
    where: Expr | None
    group_by: tuple[Expr, ...]
    order_by: tuple[OrderItem, ...]
    limit: int | None
    span: SpanT = _span()


# --- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = tokenize(src)
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at_kw(self, *names: str) -> bool:
        tok = self.peek()
        return tok.kind == "KW" and tok.text in names

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.text in ops

    def accept_kw(self, *names: str) -> Token | None:
        return self.advance() if self.at_kw(*names) else None

    def accept_op(self, *ops: str) -> Token | None:
        return self.advance() if self.at_op(*ops) else None

    def expect_kw(self, name: str) -> Token:
        if not self.at_kw(name):
            self.fail(f"expected {name}")
        return self.advance()

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            self.fail(f"expected {op!r}")
        return self.advance()

    def fail(self, message: str) -> None:
        tok = self.peek()
        got = "end of input" if tok.kind == "EOF" else repr(tok.text)
        raise SyntaxError_(f"{message}, got {got}", tok.span)

    # query := SELECT ... FROM ... [BEHAVIOUR ...] [WHERE ...] [GROUP BY ...]
    #          [ORDER BY ...] [LIMIT n]
    # BEHAVIOUR is also accepted directly after the WHERE keyword, before the
    # predicate, which is where published examples place it.
    def parse_query(self) -> QueryAst:
        start = self.peek().start
        self.expect_kw("SELECT")
        select = [self.select_item()]
        while self.accept_op(","):
            select.append(self.select_item())
        self.expect_kw("FROM")
        source = self.parse_source()
        behaviours: list[Behaviour] = []
        if self.accept_kw("BEHAVIOUR"):
            behaviours = self.behaviour_list()
        where = None
        if self.accept_kw("WHERE"):
            if self.accept_kw("BEHAVIOUR"):
                if behaviours:
                    self.fail("duplicate BEHAVIOUR clause")
                behaviours = self.behaviour_list()
            where = self.expr()
        group_by: list[Expr] = []
        if self.at_kw("GROUP"):
            self.advance()
            self.expect_kw("BY")
            group_by.append(self.expr())
            while self.accept_op(","):
                group_by.append(self.expr())
        order_by: list[OrderItem] = []
        if self.at_kw("ORDER"):
            self.advance()
            self.expect_kw("BY")
            order_by.append(self.order_item())
            while self.accept_op(","):
                order_by.append(self.order_item())
        limit = None
        if self.accept_kw("LIMIT"):
            tok = self.peek()
            if tok.kind != "NUMBER" or not isinstance(tok.value, int) or tok.value < 0:
                self.fail("LIMIT expects a non-negative integer")
            self.advance()
            limit = tok.value
        self.accept_op(";")
        if self.peek().kind != "EOF":
            self.fail("unexpected trailing input")
        end = self.tokens[max(self.pos - 1, 0)].end
        return QueryAst(tuple(select), source, tuple(behaviours), where,
                        tuple(group_by), tuple(order_by), limit, span=(start, end))

    def select_item(self) -> SelectItem:
        start = self.peek().start
        if self.at_op("*"):
            tok = self.advance()
            return SelectItem(Star(span=(tok.start, tok.end)), None, span=(tok.start, tok.end))
        expr = self.expr()
        alias = None
        if self.accept_kw("AS"):
            alias = self.identifier("alias")
        return SelectItem(expr, alias, span=(start, self.prev_end()))

    def parse_source(self) -> Source:
        tok = self.peek()
        if self.accept_kw("FLATTEN"):
            self.expect_op("(")
            inner = self.parse_source()
            close = self.expect_op(")")
            return SourceFlatten(inner, span=(tok.start, close.end))
        if self.accept_kw("THIS_PROCESS"):
            return SourceThisProcess(span=(tok.start, tok.end))
        if tok.kind in ("IDENT", "QIDENT"):
            self.advance()
            return SourceLog(tok.text if tok.kind == "IDENT" else tok.value,
                             span=(tok.start, tok.end))
        self.fail("expected a log name, FLATTEN(...) or THIS_PROCESS")
        raise AssertionError  # unreachable

    def behaviour_list(self) -> list[Behaviour]:
        out = [self.behaviour()]
        while True:
            if self.accept_op(","):
                out.append(self.behaviour())
            elif self.accept_kw("BEHAVIOUR"):
                out.append(self.behaviour())
            else:
                return out

    # behaviour := '(' expr ')' AS identifier
    def behaviour(self) -> Behaviour:
        start = self.peek().start
        self.expect_op("(")
        expr = self.expr()
        self.expect_op(")")
        self.expect_kw("AS")
        name = self.identifier("behaviour name")
        return Behaviour(name, expr, span=(start, self.prev_end()))

    def order_item(self) -> OrderItem:
        start = self.peek().start
        expr = self.expr()
        descending = False
        if self.accept_kw("DESC"):
            descending = True
        else:
            self.accept_kw("ASC")
        return OrderItem(expr, descending, span=(start, self.prev_end()))

    def identifier(self, what: str) -> str:
        tok = self.peek()
        if tok.kind == "IDENT":
            self.advance()
            return tok.text
        if tok.kind == "QIDENT":
            self.advance()
            return tok.value
        self.fail(f"expected {what}")
        raise AssertionError

    def prev_end(self) -> int:
        return self.tokens[max(self.pos - 1, 0)].end

    # --- expressions ---------------------------------------------------------

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self.at_kw("OR"):
            self.advance()
            right = self.and_expr()
            left = Binary("OR", left, right, span=(_start(left), _end(right)))
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self.at_kw("AND"):
            self.advance()
            right = self.not_expr()
            left = Binary("AND", left, right, span=(_start(left), _end(right)))
        return left

    def not_expr(self) -> Expr:
        if self.at_kw("NOT") and not (self.peek(1).kind == "KW" and self.peek(1).text == "IN"):
            tok = self.advance()
            operand = self.not_expr()
            return Unary("NOT", operand, span=(tok.start, _end(operand)))
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.additive()
        while True:
            tok = self.peek()
            if tok.kind == "OP" and tok.text in ("=", "!=", "<>", "<", "<=", ">", ">="):
                self.advance()
                op = "!=" if tok.text == "<>" else tok.text
                right = self.additive()
                left = Binary(op, left, right, span=(_start(left), _end(right)))
                continue
            if self.at_kw("IS"):
                self.advance()
                negated = self.accept_kw("NOT") is not None
                end = self.expect_kw("NULL").end
                left = IsNull(left, negated, span=(_start(left), end))
                continue
            if self.at_kw("IN") or (self.at_kw("NOT") and self.peek(1).kind == "KW"
                                    and self.peek(1).text == "IN"):
                negated = self.accept_kw("NOT") is not None
                self.expect_kw("IN")
                self.expect_op("(")
                items = [self.expr()]
                while self.accept_op(","):
                    items.append(self.expr())
                end = self.expect_op(")").end
                left = InList(left, tuple(items), negated, span=(_start(left), end))
                continue
            if self.at_kw("MATCHES"):
                self.advance()
                pattern, end = self.pattern_group()
                left = Matches(left, pattern, span=(_start(left), end))
                continue
            return left

    def additive(self) -> Expr:
        left = self.multiplicative()
        while self.at_op("+", "-"):
            op = self.advance().text
            right = self.multiplicative()
            left = Binary(op, left, right, span=(_start(left), _end(right)))
        return left

    def multiplicative(self) -> Expr:
        left = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            right = self.unary()
            left = Binary(op, left, right, span=(_start(left), _end(right)))
        return left

    def unary(self) -> Expr:
        if self.at_op("-"):
            tok = self.advance()
            operand = self.unary()
            return Unary("-", operand, span=(tok.start, _end(operand)))
        return self.primary()

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return Literal(tok.value, span=(tok.start, tok.end))
        if tok.kind == "STRING":
            self.advance()
            return Literal(tok.value, span=(tok.start, tok.end))
        if tok.kind == "KW":
            if tok.text in ("TRUE", "FALSE"):
                self.advance()
                return Literal(tok.text == "TRUE", span=(tok.start, tok.end))
            if tok.text == "NULL":
                self.advance()
                return Literal(None, span=(tok.start, tok.end))
            if tok.text == "MATCHES":
                self.advance()
                pattern, end = self.pattern_group()
                return Matches(None, pattern, span=(tok.start, end))
        if tok.kind == "IDENT" and self.peek(1).kind == "OP" and self.peek(1).text == "(":
            return self.func_call()
        if tok.kind in ("IDENT", "QIDENT"):
            self.advance()
            name = tok.text if tok.kind == "IDENT" else tok.value
            return ColumnRef(name, quoted=tok.kind == "QIDENT", span=(tok.start, tok.end))
        if self.at_op("("):
            open_tok = self.advance()
            if self.at_kw("SELECT"):
                self.advance()
                item = self.expr()
                where = None
                if self.accept_kw("WHERE"):
                    where = self.expr()
                end = self.expect_op(")").end
                return ScalarSubquery(item, where, span=(open_tok.start, end))
            inner = self.expr()
            self.expect_op(")")
            return inner
        self.fail("expected an expression")
        raise AssertionError

    def func_call(self) -> Expr:
        name_tok = self.advance()
        name = name_tok.text.upper()
        self.expect_op("(")
        if self.at_op("*"):
            self.advance()
            end = self.expect_op(")").end
            return FuncCall(name, (), star=True, span=(name_tok.start, end))
        distinct = self.accept_kw("DISTINCT") is not None
        args = [self.expr()]
        while self.accept_op(","):
            args.append(self.expr())
        end = self.expect_op(")").end
        return FuncCall(name, tuple(args), distinct=distinct, span=(name_tok.start, end))

    # --- patterns -------------------------------------------------------------

    def pattern_group(self) -> tuple[Pattern, int]:
        """'(' pattern ')' after MATCHES; returns (pattern, end offset)."""
        self.expect_op("(")
        pattern = self.parse_pattern()
        end = self.expect_op(")").end
        return pattern, end

    def parse_pattern(self) -> Pattern:
        start = self.peek().start
        anchored_start = self.accept_op("^") is not None
        body = self.pattern_alt()
        anchored_end = self.accept_op("$") is not None
        if anchored_start or anchored_end:
            return PAnchored(anchored_start, anchored_end, body, span=(start, self.prev_end()))
        return body

    def pattern_alt(self) -> Pattern:
        start = self.peek().start
        branches = [self.pattern_seq()]
        while self.accept_op("|"):
            branches.append(self.pattern_seq())
        if len(branches) == 1:
            return branches[0]
        return PAlt(tuple(branches), span=(start, self.prev_end()))

    def pattern_seq(self) -> Pattern:
        start = self.peek().start
        items = [self.pattern_rep()]
        seps: list[str] = []
        while True:
            if self.at_op("->", "~>"):
                seps.append(self.advance().text)
                items.append(self.pattern_rep())
            elif self._at_pattern_atom():
                seps.append("")
                items.append(self.pattern_rep())
            else:
                break
        if len(items) == 1:
            return items[0]
        return PSeq(tuple(items), tuple(seps), span=(start, self.prev_end()))

    def _at_pattern_atom(self) -> bool:
        tok = self.peek()
        if tok.kind in ("STRING", "IDENT", "QIDENT"):
            return True
        if tok.kind == "KW" and tok.text in ("ANY", "NOT"):
            return True
        return tok.kind == "OP" and tok.text == "("

    def pattern_rep(self) -> Pattern:
        atom = self.pattern_atom()
        if self.at_op("*"):
            tok = self.advance()
            return PStar(atom, span=(_start(atom), tok.end))
        return atom

    def pattern_atom(self) -> Pattern:
        tok = self.peek()
        if tok.kind == "STRING":
            self.advance()
            return PLiteral(tok.value, span=(tok.start, tok.end))
        if tok.kind in ("IDENT", "QIDENT"):
            self.advance()
            name = tok.text if tok.kind == "IDENT" else tok.value
            return PIdent(name, span=(tok.start, tok.end))
        if tok.kind == "KW" and tok.text == "ANY":
            self.advance()
            return PAny(span=(tok.start, tok.end))
        if tok.kind == "KW" and tok.text == "NOT":
            self.advance()
            operand = self.pattern_atom()
            return PNot(operand, span=(tok.start, _end(operand)))
        if self.at_op("("):
            self.advance()
            inner = self.parse_pattern()
            self.expect_op(")")
            return inner
        self.fail("expected a pattern atom")
        raise AssertionError


def _start(node) -> int:
    return node.span[0]


def _end(node) -> int:
    return node.span[1]


def parse_query(src: str) -> QueryAst:
    return _Parser(src).parse_query()


def parse_expression(src: str) -> Expr:
    p = _Parser(src)
    expr = p.expr()
    if p.peek().kind != "EOF":
        p.fail("unexpected trailing input")
    return expr


def parse_pattern(src: str) -> Pattern:
    p = _Parser(src)
    pattern = p.parse_pattern()
    if p.peek().kind != "EOF":
        p.fail("unexpected trailing input")
    return pattern


# --- printer -----------------------------------------------------------------

_PREC = {"OR": 1, "AND": 2, "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6}


def _quote_str(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def _quote_ident(name: str) -> str:
    bare = name and (name[0].isalpha() or name[0] == "_") and all(
        c.isalnum() or c == "_" for c in name
    ) and name.upper() not in KEYWORDS
    return name if bare else '"' + name.replace('"', '""') + '"'


def print_expr(expr: Expr, parent_prec: int = 0) -> str:
    text, prec = _print_expr(expr)
    return f"({text})" if prec < parent_prec else text


def _print_expr(expr: Expr) -> tuple[str, int]:
    if isinstance(expr, Literal):
        if expr.value is None:
            return "NULL", 9
        if isinstance(expr.value, bool):
            return ("TRUE" if expr.value else "FALSE"), 9
        if isinstance(expr.value, str):
            return _quote_str(expr.value), 9
        return repr(expr.value), 9
    if isinstance(expr, ColumnRef):
        return _quote_ident(expr.name) if not expr.quoted else '"' + expr.name.replace('"', '""') + '"', 9
    if isinstance(expr, Star):
        return "*", 9
    if isinstance(expr, Unary):
        if expr.op == "NOT":
            return "NOT " + print_expr(expr.operand, 4), 3
        return "-" + print_expr(expr.operand, 8), 7
    if isinstance(expr, Binary):
        prec = _PREC[expr.op]
        left = print_expr(expr.left, prec)
        right = print_expr(expr.right, prec + 1)
        return f"{left} {expr.op} {right}", prec
    if isinstance(expr, IsNull):
        middle = "IS NOT NULL" if expr.negated else "IS NULL"
        return f"{print_expr(expr.operand, 5)} {middle}", 4
    if isinstance(expr, InList):
        items = ", ".join(print_expr(i) for i in expr.items)
        kw = "NOT IN" if expr.negated else "IN"
        return f"{print_expr(expr.operand, 5)} {kw} ({items})", 4
    if isinstance(expr, FuncCall):
        if expr.star:
            return f"{expr.name}(*)", 9
        inner = ", ".join(print_expr(a) for a in expr.args)
        if expr.distinct:
            inner = "DISTINCT " + inner
        return f"{expr.name}({inner})", 9
    if isinstance(expr, ScalarSubquery):
        text = f"(SELECT {print_expr(expr.item)}"
        if expr.where is not None:
            text += f" WHERE {print_expr(expr.where)}"
        return text + ")", 9
    if isinstance(expr, Matches):
        pat = print_pattern(expr.pattern)
        if expr.subject is None:
            return f"MATCHES ({pat})", 4
        return f"{print_expr(expr.subject, 5)} MATCHES ({pat})", 4
    raise TypeError(f"cannot print {type(expr).__name__}")


_P_ALT, _P_SEQ, _P_REP, _P_ATOM = 1, 2, 3, 4


def print_pattern(pattern: Pattern, parent_prec: int = 0) -> str:
    text, prec = _print_pattern(pattern)
    return f"({text})" if prec < parent_prec else text


def _print_pattern(pattern: Pattern) -> tuple[str, int]:
    if isinstance(pattern, PLiteral):
        return _quote_str(pattern.text), _P_ATOM
    if isinstance(pattern, PIdent):
        return _quote_ident(pattern.name), _P_ATOM
    if isinstance(pattern, PAny):
        return "ANY", _P_ATOM
    if isinstance(pattern, PNot):
        return "NOT " + print_pattern(pattern.operand, _P_ATOM), _P_ATOM
    if isinstance(pattern, PStar):
        return print_pattern(pattern.operand, _P_ATOM) + "*", _P_REP
    if isinstance(pattern, PSeq):
        parts = [print_pattern(pattern.items[0], _P_REP)]
        for sep, item in zip(pattern.seps, pattern.items[1:]):
            prefix = f"{sep} " if sep else ""
            parts.append(prefix + print_pattern(item, _P_REP))
        return " ".join(parts), _P_SEQ
    if isinstance(pattern, PAlt):
        return " | ".join(print_pattern(b, _P_SEQ) for b in pattern.branches), _P_ALT
    if isinstance(pattern, PAnchored):
        inner = print_pattern(pattern.body, _P_ALT)
        text = ("^ " if pattern.start else "") + inner + (" $" if pattern.end else "")
        # anchored sub-patterns only make sense inside explicit parens
        return text, 0
    raise TypeError(f"cannot print {type(pattern).__name__}")


def print_query(q: QueryAst) -> str:
    parts = ["SELECT " + ", ".join(_print_select_item(i) for i in q.select)]
    parts.append("FROM " + _print_source(q.source))
    if q.behaviours:
        parts.append("BEHAVIOUR " + ", ".join(
            f"({print_expr(b.expr)}) AS {_quote_ident(b.name)}" for b in q.behaviours
        ))
    if q.where is not None:
        parts.append("WHERE " + print_expr(q.where))
    if q.group_by:
        parts.append("GROUP BY " + ", ".join(print_expr(e) for e in q.group_by))
    if q.order_by:
        parts.append("ORDER BY " + ", ".join(
            print_expr(o.expr) + (" DESC" if o.descending else "") for o in q.order_by
        ))
    if q.limit is not None:
        parts.append(f"LIMIT {q.limit}")
    return " ".join(parts)


def _print_select_item(item: SelectItem) -> str:
    text = print_expr(item.expr)
    if item.alias is not None:
        text += f" AS {_quote_ident(item.alias)}"
    return text


def _print_source(source: Source) -> str:
    if isinstance(source, SourceLog):
        return _quote_ident(source.name)
    if isinstance(source, SourceThisProcess):
        return "THIS_PROCESS"
    if isinstance(source, SourceFlatten):
        return f"FLATTEN({_print_source(source.inner)})"
    raise TypeError(f"cannot print {type(source).__name__}")
