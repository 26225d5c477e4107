"""Lexer, query/expression/pattern grammar, and printer round trips.

The round-trip property is structural: for a random AST x,
parse(print(x)) == x (span fields are excluded from equality), which pins
both the printer's parenthesization and the parser's precedence rules.
"""

import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from signalql import parser as P
from signalql.errors import IllegalCharacter, SyntaxError_, UnterminatedString
from signalql.parser import (
    parse_expression,
    parse_pattern,
    parse_query,
    print_expr,
    print_pattern,
    print_query,
    tokenize,
)


class TestLexer:
    def test_spans_and_kinds(self):
        toks = tokenize("SELECT x FROM t")
        assert [t.kind for t in toks] == ["KW", "IDENT", "KW", "IDENT", "EOF"]
        assert (toks[1].start, toks[1].end) == (7, 8)

    def test_comments_skipped(self):
        toks = tokenize("SELECT -- hi\n x")
        assert [t.kind for t in toks] == ["KW", "IDENT", "EOF"]

    def test_string_escapes(self):
        toks = tokenize("'it''s'")
        assert toks[0].value == "it's"

    def test_quoted_identifier(self):
        toks = tokenize('"final status"')
        assert toks[0].kind == "QIDENT"
        assert toks[0].value == "final status"

    def test_multi_char_operators(self):
        toks = tokenize("-> ~> != <> <= >=")
        assert [t.text for t in toks[:-1]] == ["->", "~>", "!=", "<>", "<=", ">="]

    def test_numbers(self):
        toks = tokenize("42 3.5")
        assert toks[0].value == 42 and isinstance(toks[0].value, int)
        assert toks[1].value == 3.5

    def test_unterminated_string(self):
        with pytest.raises(UnterminatedString):
            tokenize("'abc")

    def test_illegal_character(self):
        with pytest.raises(IllegalCharacter):
            tokenize("SELECT @")

    def test_behavior_spelling_normalized(self):
        toks = tokenize("BEHAVIOR behaviour")
        assert toks[0].kind == "KW" and toks[0].text == "BEHAVIOUR"
        assert toks[1].kind == "KW" and toks[1].text == "BEHAVIOUR"


class TestQueryGrammar:
    def test_minimal(self):
        q = parse_query("SELECT case_id FROM support")
        assert q.select[0].expr == P.ColumnRef("case_id")
        assert q.source == P.SourceLog("support")
        assert q.where is None and q.limit is None

    def test_all_clauses(self):
        q = parse_query(
            "SELECT region, COUNT(*) AS n FROM support "
            "WHERE region != 'EU' GROUP BY region ORDER BY n DESC, region LIMIT 5;"
        )
        assert q.select[1].alias == "n"
        assert len(q.group_by) == 1
        assert q.order_by[0].descending and not q.order_by[1].descending
        assert q.limit == 5

    def test_sources(self):
        assert parse_query("SELECT * FROM THIS_PROCESS").source == P.SourceThisProcess()
        q = parse_query("SELECT * FROM FLATTEN(FLATTEN(support))")
        assert q.source == P.SourceFlatten(P.SourceFlatten(P.SourceLog("support")))

    def test_behaviour_before_where(self):
        q = parse_query(
            "SELECT case_id FROM t BEHAVIOUR (x > 1) AS a WHERE MATCHES(a)"
        )
        assert q.behaviours == (P.Behaviour("a", P.Binary(">", P.ColumnRef("x"), P.Literal(1))),)

    def test_behaviour_after_where_keyword(self):
        q = parse_query(
            "SELECT case_id FROM t WHERE BEHAVIOUR (x > 1) AS a MATCHES(a ~> 'Open')"
        )
        assert q.behaviours[0].name == "a"
        assert isinstance(q.where, P.Matches)

    def test_behaviour_chained_and_comma_forms(self):
        for text in (
            "SELECT * FROM t BEHAVIOUR (x=1) AS a BEHAVIOUR (y=2) AS b",
            "SELECT * FROM t BEHAVIOUR (x=1) AS a, (y=2) AS b",
        ):
            q = parse_query(text)
            assert [b.name for b in q.behaviours] == ["a", "b"]

    def test_duplicate_behaviour_clause_rejected(self):
        with pytest.raises(SyntaxError_):
            parse_query("SELECT * FROM t BEHAVIOUR (x=1) AS a WHERE BEHAVIOUR (y=2) AS b x")

    def test_negative_limit_rejected(self):
        with pytest.raises(SyntaxError_):
            parse_query("SELECT * FROM t LIMIT -1")

    def test_trailing_garbage_rejected(self):
        with pytest.raises(SyntaxError_):
            parse_query("SELECT * FROM t; SELECT")

    def test_keywords_are_reserved_but_quotable(self):
        with pytest.raises(SyntaxError_):
            parse_query("SELECT select FROM t")
        q = parse_query('SELECT "select" FROM t')
        assert q.select[0].expr == P.ColumnRef("select", quoted=True)


class TestExpressions:
    def test_precedence(self):
        e = parse_expression("a OR b AND NOT c = 1 + 2 * 3")
        assert e == P.Binary(
            "OR",
            P.ColumnRef("a"),
            P.Binary(
                "AND",
                P.ColumnRef("b"),
                P.Unary(
                    "NOT",
                    P.Binary(
                        "=",
                        P.ColumnRef("c"),
                        P.Binary(
                            "+",
                            P.Literal(1),
                            P.Binary("*", P.Literal(2), P.Literal(3)),
                        ),
                    ),
                ),
            ),
        )

    def test_is_null_and_in(self):
        assert parse_expression("x IS NOT NULL") == P.IsNull(P.ColumnRef("x"), True)
        e = parse_expression("x NOT IN (1, 2)")
        assert e == P.InList(P.ColumnRef("x"), (P.Literal(1), P.Literal(2)), True)

    def test_scalar_subquery(self):
        e = parse_expression("(SELECT LAST(end_time) - FIRST(end_time))")
        assert isinstance(e, P.ScalarSubquery)
        assert e.where is None
        e = parse_expression("(SELECT COUNT(*) WHERE amount > 3)")
        assert e.item == P.FuncCall("COUNT", (), star=True)
        assert e.where is not None

    def test_matches_forms(self):
        e = parse_expression("event_name MATCHES ('a' ~> 'b')")
        assert e == P.Matches(
            P.ColumnRef("event_name"),
            P.PSeq((P.PLiteral("a"), P.PLiteral("b")), ("~>",)),
        )
        e = parse_expression("MATCHES (x)")
        assert e == P.Matches(None, P.PIdent("x"))

    def test_count_distinct(self):
        e = parse_expression("COUNT(DISTINCT region)")
        assert e == P.FuncCall("COUNT", (P.ColumnRef("region"),), distinct=True)


class TestPatternGrammar:
    def test_sequence_separators(self):
        p = parse_pattern("a b -> c ~> d")
        assert p == P.PSeq(
            (P.PIdent("a"), P.PIdent("b"), P.PIdent("c"), P.PIdent("d")),
            ("", "->", "~>"),
        )

    def test_anchors(self):
        p = parse_pattern("^ 'a' $")
        assert p == P.PAnchored(True, True, P.PLiteral("a"))
        p = parse_pattern("'a' $")
        assert p == P.PAnchored(False, True, P.PLiteral("a"))

    def test_star_and_not(self):
        p = parse_pattern("NOT a*")
        assert p == P.PStar(P.PNot(P.PIdent("a")))
        p = parse_pattern("(NOT a)*")
        assert p == P.PStar(P.PNot(P.PIdent("a")))

    def test_alternation_grouping(self):
        p = parse_pattern("a | b c")
        assert p == P.PAlt((P.PIdent("a"), P.PSeq((P.PIdent("b"), P.PIdent("c")), ("",))))

    def test_universal_shape(self):
        p = parse_pattern("^ (NOT a | (a b))* $")
        assert isinstance(p, P.PAnchored)
        assert isinstance(p.body, P.PStar)


# --- round-trip property -------------------------------------------------------

SAFE_IDENTS = ("case_id", "region", "amount", "end_time", "x", "y_2", "foo")
_text = st.text(st.characters(min_codepoint=32, max_codepoint=126), max_size=6)

_literals = st.one_of(
    st.just(P.Literal(None)),
    st.booleans().map(P.Literal),
    st.integers(0, 10**9).map(P.Literal),
    st.integers(0, 9999).map(lambda i: P.Literal(i / 10)),
    _text.map(P.Literal),
)
_cols = st.one_of(
    st.sampled_from(SAFE_IDENTS).map(P.ColumnRef),
    _text.filter(lambda s: s.strip()).map(lambda n: P.ColumnRef(n, quoted=True)),
)

_p_atoms = st.one_of(
    st.sampled_from(SAFE_IDENTS).map(P.PIdent),
    _text.map(P.PLiteral),
    st.just(P.PAny()),
)


@st.composite
def _pseq(draw, children):
    items = [draw(children)]
    seps = []
    for _ in range(draw(st.integers(1, 3))):
        seps.append(draw(st.sampled_from(["", "->", "~>"])))
        items.append(draw(children))
    return P.PSeq(tuple(items), tuple(seps))


def _pattern_layer(children):
    return st.one_of(
        st.builds(P.PNot, children),
        st.builds(P.PStar, children),
        _pseq(children),
        st.lists(children, min_size=2, max_size=3).map(lambda b: P.PAlt(tuple(b))),
        st.builds(
            P.PAnchored,
            st.booleans(),
            st.booleans(),
            children,
        ).filter(lambda a: a.start or a.end),
    )


_patterns = st.recursive(_p_atoms, _pattern_layer, max_leaves=12)


def _expr_layer(children):
    ops = ["+", "-", "*", "/", "=", "!=", "<", "<=", ">", ">=", "AND", "OR"]
    return st.one_of(
        st.builds(P.Binary, st.sampled_from(ops), children, children),
        st.builds(P.Unary, st.sampled_from(["-", "NOT"]), children),
        st.builds(P.IsNull, children, st.booleans()),
        st.builds(
            P.InList,
            children,
            st.lists(children, min_size=1, max_size=3).map(tuple),
            st.booleans(),
        ),
        st.builds(
            P.FuncCall,
            st.sampled_from(P.AGG_FUNCS),
            st.tuples(children),
            st.booleans(),
        ),
        st.just(P.FuncCall("COUNT", (), star=True)),
        st.builds(P.ScalarSubquery, children, st.none() | children),
        st.builds(P.Matches, st.none() | _cols, _patterns),
    )


_exprs = st.recursive(st.one_of(_literals, _cols), _expr_layer, max_leaves=16)


@st.composite
def _queries(draw):
    n_items = draw(st.integers(1, 3))
    items = tuple(
        draw(
            st.one_of(
                st.just(P.SelectItem(P.Star(), None)),
                st.builds(
                    P.SelectItem, _exprs, st.none() | st.sampled_from(SAFE_IDENTS)
                ),
            )
        )
        for _ in range(n_items)
    )
    source = draw(
        st.one_of(
            st.sampled_from(SAFE_IDENTS).map(P.SourceLog),
            st.just(P.SourceThisProcess()),
            st.sampled_from(SAFE_IDENTS).map(
                lambda n: P.SourceFlatten(P.SourceLog(n))
            ),
        )
    )
    b_names = draw(
        st.lists(st.sampled_from(("ba", "bb", "bc")), max_size=2, unique=True)
    )
    behaviours = tuple(P.Behaviour(n, draw(_exprs)) for n in b_names)
    where = draw(st.none() | _exprs)
    group_by = tuple(draw(st.lists(_exprs, max_size=2)))
    order_by = tuple(
        P.OrderItem(e, d)
        for e, d in draw(st.lists(st.tuples(_exprs, st.booleans()), max_size=2))
    )
    limit = draw(st.none() | st.integers(0, 100))
    return P.QueryAst(items, source, behaviours, where, group_by, order_by, limit)


@settings(max_examples=300, deadline=None)
@given(_exprs)
def test_expr_round_trip(e):
    assert parse_expression(print_expr(e)) == e


@settings(max_examples=300, deadline=None)
@given(_patterns)
def test_pattern_round_trip(p):
    assert parse_pattern(print_pattern(p)) == p


@settings(max_examples=200, deadline=None)
@given(_queries())
def test_query_round_trip(q):
    assert parse_query(print_query(q)) == q
