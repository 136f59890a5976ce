import pytest

from adtfree import linear
from adtfree.parser import ParseError, format_problem, parse_file, parse_problem
from adtfree.terms import Var

from conftest import PROBLEMS
from helpers import REVERSE


def test_reverse_file():
    p = parse_problem(REVERSE)
    assert p.expect == "sat"
    assert len(p.clauses) == 9
    assert str(p.clauses[0]) == (
        "false :- N0+N1 =\\= N2, append(Xs,Ys,Zs), reverse(Zs,Rs), len(Xs,N0), len(Ys,N1), len(Rs,N2).")
    assert str(p.clauses[1]) == "append([],Ys,Ys)."
    assert p.signature.mode("len").outputs == (1,)
    assert p.signature.mode("len").total and p.signature.mode("len").functional


def test_len_clause_moves_arithmetic_into_constraint():
    p = parse_problem(REVERSE)
    c = p.clauses[-1]
    assert all(isinstance(t, Var) for t in c.body[0].args)
    n1, n0 = c.head.args[1], c.body[0].args[1]
    assert linear.equivalent(c.constraint, linear.conj(linear.eq(n1, linear.LinExpr.of(n0) + 1)))


def test_integer_head_argument():
    (c,) = parse_problem(":- pred p(int).\n:- mode p(in).\np(3).\n").clauses
    assert str(c.constraint) == f"{c.head.args[0].name} = 3"


def test_functional_without_totality():
    p = parse_problem(":- pred f(int, int).\n:- mode f(in, out).\n:- functional f/2.\n")
    m = p.signature.mode("f")
    assert m.functional and not m.total


@pytest.mark.parametrize("text, line, col, msg", [
    (":- pred p(int).\nfalse :- q(X).", 2, 10, "undeclared predicate 'q'"),
    (":- pred p(int).\nfalse :- p(X,Y).", 2, 10, "p expects 1 arguments"),
    (":- pred p(int).\nfalse :- p(X) & .", 2, 15, "unexpected character '&'"),
    (":- pred p(int).\nfalse :- X*X > 0, p(X).", 2, 11, "nonlinear product"),
    (":- adt t = c(t).", 1, 8, "type 't' has no base constructor"),
])
def test_parse_errors(text, line, col, msg):
    with pytest.raises(ParseError) as e:
        parse_problem(text)
    assert (e.value.line, e.value.col, e.value.msg) == (line, col, msg)
    assert str(e.value) == f"{line}:{col}: {msg}"


def test_round_trip_corpus():
    for f in sorted(PROBLEMS.glob("*.chc")):
        p = parse_file(f)
        q = parse_problem(format_problem(p))
        assert [str(c) for c in q.clauses] == [str(c) for c in p.clauses], f.name
        assert q.expect == p.expect
        assert format_problem(q) == format_problem(p)
