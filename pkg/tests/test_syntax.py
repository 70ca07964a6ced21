import pytest
from hypothesis import given

from conftest import PROPERTY, terms
from retrotab.program import Clause, Mode, Program
from retrotab.syntax import ParseError, parse_program, parse_query, parse_term
from retrotab.term import NIL, canonicalize, to_str, variant


def test_r_program_with_retro_directive():
    prog = parse_program("""
        :- use_retrosubsumptive_tabling r/2.
        r(X,Y) :- e(X,Y).
        r(X,Y) :- r(X,Z), e(Z,Y).
    """)
    assert prog.tabled == {("r", 2): Mode.RETROACTIVE}
    assert len(prog.clauses) == 2
    assert prog.clauses[1].body[0][0] == "r"


@pytest.mark.parametrize("text,mode", [
    (":- table p/2 as variant.", Mode.VARIANT),
    (":- table p/2 as subsumptive.", Mode.SUBSUMPTIVE),
    (":- table p/2 as retroactive.", Mode.RETROACTIVE),
    (":- table p/2.", Mode.VARIANT),
    (":- use_subsumptive_tabling p/2.", Mode.SUBSUMPTIVE),
])
def test_directive_forms(text, mode):
    assert parse_program(text).tabled == {("p", 2): mode}


def test_dynamic_declares_without_tabling():
    prog = parse_program(":- dynamic edge/2.")
    assert prog.dynamic == {("edge", 2)} and prog.tabled == {}
    assert str(prog) == ":- dynamic edge/2.\n"


def test_empty_file():
    prog = parse_program("")
    assert prog.clauses == [] and prog.tabled == {}
    assert parse_program("% only a comment\n/* block */").clauses == []


def test_directive_needs_arity():
    with pytest.raises(ParseError, match="arity"):
        parse_program(":- table p/x.")
    with pytest.raises(ParseError):
        parse_program(":- table p.")


def test_unknown_mode_rejected():
    with pytest.raises(ParseError, match="mode"):
        parse_program(":- table p/1 as eager.")


def test_error_position():
    with pytest.raises(ParseError) as ei:
        parse_program("p(a).\nq(X :- r.\n")
    assert (ei.value.line, ei.value.column) == (2, 5)


def test_missing_end():
    with pytest.raises(ParseError):
        parse_program("p(a)")


def test_variables_shared_within_clause_only():
    prog = parse_program("p(X,Y) :- q(X). r(X).")
    c1, c2 = prog.clauses
    assert c1.head[1] is c1.body[0][1]
    assert c1.head[1] is not c2.head[1]


def test_anonymous_variables_are_distinct():
    t = parse_term("p(_,_)")
    assert t[1] is not t[2]


def test_lists_and_numbers():
    assert parse_term("[1,2|T]")[2][2].name == "T"
    assert parse_term("[]") == NIL
    assert parse_term("f(-3)") == ("f", -3)
    assert parse_term("'hello world'") == "hello world"


def test_true_body_is_fact():
    assert parse_program("p :- true.").clauses[0].is_fact


def test_equality_goal():
    goals, vm = parse_query("X = f(Y), p(X)")
    assert goals[0] == ("=", vm["X"], ("f", vm["Y"]))


def test_functor_needs_adjacent_paren():
    with pytest.raises(ParseError):
        parse_term("f (a)")


def test_round_trip_path_clause():
    text = "path(f(X),f(Z)) :- edge(f(X),f(Z))."
    prog = parse_program(text)
    again = parse_program(str(prog))
    assert len(again.clauses) == 1
    a, b = prog.clauses[0], again.clauses[0]
    assert variant((":-", a.head, *a.body), (":-", b.head, *b.body))


def test_program_print_includes_directives():
    prog = Program([Clause(("p", 1))], {("p", 1): Mode.RETROACTIVE})
    assert str(prog).splitlines() == [":- table p/1 as retroactive.", "p(1)."]


@PROPERTY
@given(terms(max_leaves=8))
def test_term_print_parse_round_trip(t):
    back = parse_term(to_str(t))
    assert canonicalize(back) == canonicalize(t)
