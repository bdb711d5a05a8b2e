from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thor.reader import (
    END,
    Clause,
    ConsultError,
    LexError,
    ParseError,
    PredicateTable,
    consult,
    format_clause,
    normalize_vars,
    parse_goal,
    tokenize,
)
from thor.terms import NIL, Atom, Int, Struct, Var, format_term, list_items, make_list


def clauses(text: str) -> list[Clause]:
    table = consult(text)
    return [c for key in table.keys() for c in table.lookup(key)]


def test_fact():
    (c,) = clauses("p.")
    assert c.head == Atom("p") and c.body == ()
    assert c.key == ("p", 0)


def test_conjunction_splits_on_comma():
    (c,) = clauses("p(X) :- q(X), r(X).")
    assert c.body == (Struct("q", (Var("X"),)), Struct("r", (Var("X"),)))


def test_is_and_minus_precedence():
    (c,) = clauses("d(X,Y) :- Y is X - 1.")
    assert c.body == (Struct("is", (Var("Y"), Struct("-", (Var("X"), Int(1))))),)


def test_additive_operators_are_left_associative():
    (g,) = parse_goal("X is 10 - 3 - 2")
    assert g.args[1] == Struct("-", (Struct("-", (Int(10), Int(3))), Int(2)))


def test_multiplicative_binds_tighter():
    (g,) = parse_goal("X is 1 + 2 * 3 mod 4")
    rhs = g.args[1]
    assert rhs.name == "+" and rhs.args[1] == Struct("mod", (Struct("*", (Int(2), Int(3))), Int(4)))


def test_parentheses_override():
    (g,) = parse_goal("X is (1 + 2) * 3")
    assert g.args[1].name == "*"


def test_comparison_is_non_associative():
    with pytest.raises(ParseError):
        parse_goal("1 < 2 < 3")


def test_negative_literal_and_prefix_minus():
    (g,) = parse_goal("X is -3")
    assert g.args[1] == Int(-3)
    (g,) = parse_goal("X is - Y")
    assert g.args[1] == Struct("-", (Var("Y"),))


def test_lists_and_tails():
    (g,) = parse_goal("p([1,2|T], [], [a])")
    a, b, c = g.args
    assert a == make_list([Int(1), Int(2)], Var("T"))
    assert b == NIL
    assert list_items(c) == [Atom("a")]


def test_quoted_atoms():
    (g,) = parse_goal("p('hello world', 'it''s', 'a\\nb')")
    assert [a.name for a in g.args] == ["hello world", "it's", "a\nb"]


def test_comments_are_skipped():
    assert len(clauses("% header\np(1). % trailing\np(2).\n")) == 2


def test_clauses_kept_in_source_order():
    table = consult("p(3). q. p(1). p(2).")
    assert [c.head.args[0].value for c in table.lookup(("p", 1))] == [3, 1, 2]
    assert [c.index for c in table.lookup(("p", 1))] == [0, 1, 2]


def test_builtin_redefinition_rejected():
    with pytest.raises(ConsultError) as err:
        consult("is(X, Y).")
    assert "built-in" in str(err.value)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as err:
        parse_goal("queens(6,")
    assert err.value.line == 1 and err.value.col >= 1
    assert "line 1" in str(err.value)


def test_consult_reports_every_bad_clause():
    with pytest.raises(ConsultError) as err:
        consult("p(.\nq :- .\nr.")
    assert len(err.value.errors) == 2
    assert {e.line for e in err.value.errors} == {1, 2}


def test_illegal_character():
    with pytest.raises(LexError):
        tokenize("p(§).")


def test_unterminated_quote():
    with pytest.raises(LexError):
        tokenize("p('abc).")


def test_missing_final_period():
    with pytest.raises(ConsultError):
        consult("p(1)")


def test_head_must_be_callable():
    with pytest.raises(ConsultError):
        consult("3 :- true.")


def test_lookup_unknown_is_empty():
    assert PredicateTable().lookup(("nope", 1)) == []


def test_bundled_queens_program_loads(queens_prog):
    table = queens_prog.table
    assert ("queens", 2) in table.keys()
    assert all(table.lookup(k) for k in table.keys())


# ---- properties -------------------------------------------------------------------
NAMES = st.sampled_from(["a", "foo", "b_1", "[]", "hello world", "It", "+", "x'y", "\\"])
VARS = st.sampled_from(["X", "Y", "Z", "_G", "Acc"]).map(Var)
INTS = st.integers(-10**6, 10**6).map(Int)
FUNCTORS = st.sampled_from(["f", "g", "+", "-", "*", "//", "mod", "is", "<", "=", "=\\=", ".", "Ab"])


def _compound(children):
    return st.builds(lambda f, args: Struct(f, tuple(args)), FUNCTORS,
                     st.lists(children, min_size=1, max_size=3))


TERMS = st.recursive(st.one_of(NAMES.map(Atom), VARS, INTS), _compound, max_leaves=12)
HEADS = st.builds(lambda name, args: Struct(name, tuple(args)),
                  st.sampled_from(["p", "q", "head"]), st.lists(TERMS, min_size=1, max_size=3))


@settings(max_examples=200, deadline=None)
@given(HEADS, st.lists(HEADS, max_size=3))
def test_print_then_reparse_round_trips(head, body):
    clause = Clause(head, tuple(body))
    (back,) = clauses(format_clause(clause))
    assert normalize_vars((back.head, *back.body)) == normalize_vars((clause.head, *clause.body))


@settings(max_examples=200, deadline=None)
@given(TERMS)
def test_format_term_reparses(t):
    (g,) = parse_goal(f"p({format_term(t, 999)})")
    assert normalize_vars(g.args) == normalize_vars((t,))


SOURCE_CHARS = st.sampled_from(list("abXY_19 \n\t(),[]|.'%+-*<=>:\\"))


@settings(max_examples=300, deadline=None)
@given(st.text(SOURCE_CHARS, max_size=60))
def test_tokens_cover_input_without_loss(text):
    try:
        tokens = tokenize(text)
    except LexError:
        return
    pos = 0
    for tok in tokens:
        skipped = text[pos:tok.offset]
        # only blanks and comments lie between tokens
        for line in skipped.split("\n"):
            body = line.split("%", 1)[0]
            assert body.strip() == ""
        assert text[tok.offset:tok.end] == tok.text
        pos = tok.end
    tail = text[pos:]
    assert all(line.split("%", 1)[0].strip() == "" for line in tail.split("\n"))
    assert sum(t.end - t.offset for t in tokens) + sum(
        len(text[a.end:b.offset]) for a, b in zip(tokens, tokens[1:])) + (
        tokens[0].offset + len(tail) if tokens else len(text)) == len(text)


def test_end_token_needs_layout_after_period():
    kinds = [t.kind for t in tokenize("p. q.")]
    assert kinds.count(END) == 2
