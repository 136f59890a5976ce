from adtfree import linear
from adtfree.algorithm import AlgorithmR, Config, RunStatus, run
from adtfree.clauses import is_variant
from adtfree.parser import parse_file, parse_problem
from adtfree.rules import DefKind

from conftest import PROBLEMS
from helpers import REVERSE, reverse_problem

HEADER = REVERSE.split("\n\n")[0] + "\n:- pred new1(int, int, int).\n:- pred new2(int, int).\n"


def clause(text, cid=0):
    return parse_problem(HEADER + text + "\n").clause_set.clauses[0].with_id(cid)


def test_first_iteration_projects_goal():
    alg = AlgorithmR(reverse_problem())
    new_defs, fld = alg.diff_define_fold(list(alg.t.problem.goals()))
    (d1,) = new_defs
    assert d1.kind is DefKind.PROJECT and d1.pred == "new1"
    assert [str(c) for c in fld] == ["false :- N0+N1 =\\= N2, new1(N0,N1,N2)."]


def test_unfold_procedure_on_d1():
    alg = AlgorithmR(reverse_problem())
    new_defs, _ = alg.diff_define_fold(list(alg.t.problem.goals()))
    unf = alg.unfold_proc(new_defs)
    c13 = clause("new1(N0,N1,N2) :- N0=0, reverse(Ys,Rs), len(Ys,N1), len(Rs,N2).")
    c14 = clause("new1(N01,N1,N21) :- N01=N0+1, append(Xs,Ys,Zs), reverse(Zs,Rs), "
                 "len(Xs,N0), len(Ys,N1), snoc(Rs,X,R1s), len(R1s,N21).")
    assert len(unf) == 2
    assert is_variant(unf[0], c13) and is_variant(unf[1], c14)
    # neither R5 nor R6 applies to them
    assert alg.replace_proc(unf) == unf


def test_second_iteration_project_then_diff():
    alg = AlgorithmR(reverse_problem())
    new_defs, _ = alg.diff_define_fold(list(alg.t.problem.goals()))
    unf = alg.replace_proc(alg.unfold_proc(new_defs))
    new_defs, fld = alg.diff_define_fold(unf)
    assert [(d.pred, d.kind) for d in new_defs] == [
        ("new2", DefKind.PROJECT), ("diff1", DefKind.DIFF)]
    c15 = clause("new1(N0,N1,N2) :- N0=0, new2(N1,N2).")
    assert is_variant(fld[0], c15)
    assert [a.pred for a in fld[1].body] == ["new1", "diff1"]


def test_replace_deletes_and_merges():
    alg = AlgorithmR(reverse_problem())
    dead = clause("new2(N,M) :- N>=1, N=<0, len(Xs,N), len(Ys,M).", alg.t.new_id())
    dup = clause("new2(N,M) :- len(Xs,N), len(Xs,M).", alg.t.new_id())
    out = alg.replace_proc([dead, dup])
    assert len(out) == 1
    (c,) = out
    assert len(c.body) == 1
    # the merged outputs are equated through the constraint of the normal form
    n, m = c.head.args
    assert linear.entails(c.constraint, linear.conj(linear.eq(n, m)))


def test_basic_input_passes_through():
    text = """
:- pred p(int).
:- mode p(in).
false :- X < 0, p(X).
p(X) :- X = 0.
p(Y) :- Y = X+1, p(X).
"""
    problem = parse_problem(text).clause_set
    r = run(problem)
    assert r.status is RunStatus.TRANSFORMED
    assert r.iterations == 1
    assert not r.definitions
    assert sorted(map(str, r.clauses.clauses)) == sorted(map(str, problem.clauses))


def test_deterministic():
    a = run(reverse_problem())
    b = run(reverse_problem())
    assert [str(c) for c in a.clauses.clauses] == [str(c) for c in b.clauses.clauses]


def test_iteration_limit():
    r = run(reverse_problem(), Config(use_diff=False, max_iterations=3))
    assert r.status is RunStatus.ITERATION_LIMIT
    assert r.reason == "transformation did not terminate"


def test_condition_u_discharged_on_corpus():
    for f in sorted(PROBLEMS.glob("*.chc")):
        r = run(parse_file(f).clause_set)
        assert r.status is RunStatus.TRANSFORMED, f.name
        for pred in r.ledger.folded_with:
            assert pred in r.ledger.unfolded_at_level, f"{f.name}: {pred}"


def test_marks_propagate():
    alg = AlgorithmR(reverse_problem())
    t = alg.t
    c = clause("new2(N,M) :- len(Xs,N), reverse(Xs,Ys), len(Ys,M).", t.new_id())
    t.ledger.mark(c, "test")
    derived = t.unfold(c, 0)
    assert len(derived) == 2
    assert all(d.cid in t.ledger.marked for d in derived)
    (merged,) = alg.replace_proc([clause("new2(N,M) :- len(Xs,N), len(Xs,M).", t.new_id())])
    assert merged.cid not in t.ledger.marked
