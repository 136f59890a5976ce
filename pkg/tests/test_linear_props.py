"""Property checks for the constraint engine against brute-force enumeration."""

import itertools

from hypothesis import assume, given, settings
from hypothesis import strategies as st

from adtfree import linear
from adtfree.linear import LinExpr, Rel, Sat

INT_VARS = tuple(linear.int_var(n) for n in ("X", "Y", "Z"))
BOX = range(-5, 6)

N = 1000


@st.composite
def atoms(draw):
    vs = draw(st.lists(st.sampled_from(INT_VARS), min_size=1, max_size=3, unique=True))
    coeffs = {v: draw(st.integers(-3, 3)) for v in vs}
    const = draw(st.integers(-6, 6))
    rel = draw(st.sampled_from([Rel.LE, Rel.LE, Rel.EQ, Rel.NE]))
    return linear.make_atom(LinExpr(coeffs, const), rel)


def box(vs):
    out = []
    for v in vs:
        out += [linear.ge(v, BOX.start), linear.le(v, BOX.stop - 1)]
    return out


@st.composite
def constraints(draw, boxed=True):
    c = linear.conj(*draw(st.lists(atoms(), min_size=0, max_size=4)))
    if boxed:
        c = linear.conj(c, *box(INT_VARS))
    return c


def grid_models(c):
    """All integer models of ``c`` with every variable in [-5, 5]."""
    vs = list(INT_VARS)
    for vals in itertools.product(BOX, repeat=len(vs)):
        env = dict(zip(vs, vals))
        if c.holds(env):
            yield env


def holds_on_grid(c, d) -> bool:
    return all(d.holds(env) for env in grid_models(c))


@settings(max_examples=N, deadline=None)
@given(constraints())
def test_elimination_agrees_with_grid(c):
    status, witness = linear.check(c)
    expected = next(grid_models(c), None) is not None
    assert status is not Sat.UNKNOWN
    assert (status is Sat.SAT) == expected
    if witness is not None:
        assert c.holds({**{v: 0 for v in INT_VARS}, **witness})


@settings(max_examples=N, deadline=None)
@given(constraints(), constraints(boxed=False))
def test_widen_entailed_by_both(c1, c2):
    w = linear.widen(c1, c2)
    assert linear.entails(c1, w)
    assert linear.entails(c2, w)
    assert holds_on_grid(c1, w)


@settings(max_examples=N, deadline=None)
@given(constraints(), st.lists(st.sampled_from(INT_VARS), max_size=3, unique=True))
def test_project_sound_on_models(c, keep):
    p = linear.project(c, keep)
    assert set(p.vars()) <= set(keep)
    for env in grid_models(c):
        assert p.holds(env)


@settings(max_examples=N, deadline=None)
@given(constraints(boxed=False))
def test_entails_reflexive(c):
    assert linear.entails(c, c)


@settings(max_examples=N, deadline=None)
@given(constraints(), constraints(boxed=False), constraints(boxed=False))
def test_entails_transitive(a, b, c):
    # b and c are weakened so that the premises hold often enough
    b = linear.widen(b, a)
    c = linear.widen(c, b)
    assert linear.entails(a, b) and linear.entails(b, c)
    assert linear.entails(a, c)


@settings(max_examples=N, deadline=None)
@given(constraints(), constraints(boxed=False))
def test_entails_exact_on_boxed(a, d):
    assume(len(d.atoms) <= 3)
    assert linear.entails(a, d) == holds_on_grid(a, d)
