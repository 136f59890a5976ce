"""Conjunctions of linear integer / boolean constraints.

Atoms are kept in the normal form ``sum(a*x) + k REL 0`` where REL is one of
``<=``, ``=`` or ``!=`` and the coefficients are coprime integers. Boolean
variables are treated as integers ranging over {0, 1}.

Satisfiability is decided by Fourier-Motzkin elimination (which can only
refute) followed by a back-substitution search for an integer witness.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

from .terms import BOOL, INT, Const, Var

DEFAULT_CEILING = 512
_MAX_NE_SPLITS = 10
_MAX_NODES = 20000


class Rel(str, enum.Enum):
    LE = "<="
    EQ = "="
    NE = "!="


class Sat(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


Number = Union[int, Fraction]


class LinExpr:
    """A linear expression, used to build atoms."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Mapping[Var, Number] | None = None, const: Number = 0):
        self.coeffs = {v: c for v, c in (coeffs or {}).items() if c != 0}
        self.const = const

    @staticmethod
    def of(x: "LinExpr | Var | Const | int | bool") -> "LinExpr":
        if isinstance(x, LinExpr):
            return x
        if isinstance(x, Var):
            return LinExpr({x: 1})
        if isinstance(x, Const):
            return LinExpr({}, int(x.value))
        return LinExpr({}, int(x))

    def __add__(self, other) -> "LinExpr":
        other = LinExpr.of(other)
        coeffs = dict(self.coeffs)
        for v, c in other.coeffs.items():
            coeffs[v] = coeffs.get(v, 0) + c
        return LinExpr(coeffs, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "LinExpr":
        return LinExpr({v: -c for v, c in self.coeffs.items()}, -self.const)

    def __sub__(self, other) -> "LinExpr":
        return self + (-LinExpr.of(other))

    def __rsub__(self, other) -> "LinExpr":
        return LinExpr.of(other) - self

    def __mul__(self, k: Number) -> "LinExpr":
        return LinExpr({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"LinExpr({self.coeffs!r}, {self.const!r})"


@dataclass(frozen=True)
class LinAtom:
    coeffs: tuple[tuple[Var, int], ...]
    const: int
    rel: Rel

    @property
    def vars(self) -> tuple[Var, ...]:
        return tuple(v for v, _ in self.coeffs)

    def expr(self) -> LinExpr:
        return LinExpr(dict(self.coeffs), self.const)

    def holds(self, env: Mapping[Var, int]) -> bool:
        val = self.const + sum(c * int(env[v]) for v, c in self.coeffs)
        if self.rel is Rel.LE:
            return val <= 0
        if self.rel is Rel.EQ:
            return val == 0
        return val != 0

    def sort_key(self):
        return (list(Rel).index(self.rel), [(v.name, c) for v, c in self.coeffs], self.const)

    def __str__(self) -> str:
        return format_atom(self)


def make_atom(expr: LinExpr, rel: Rel) -> "LinAtom | bool":
    """Normalize ``expr REL 0``; degenerate atoms collapse to a boolean."""
    coeffs = {v: Fraction(c) for v, c in expr.coeffs.items() if c != 0}
    const = Fraction(expr.const)
    denom = math.lcm(const.denominator, *(c.denominator for c in coeffs.values()))
    ints = {v: int(c * denom) for v, c in coeffs.items()}
    k = const * denom
    if not ints:
        if rel is Rel.LE:
            return k <= 0
        if rel is Rel.EQ:
            return k == 0
        return k != 0
    g = math.gcd(*ints.values())
    if rel is Rel.LE:
        # sum(a/g x) <= -k/g  tightens to  sum(a/g x) + ceil(k/g) <= 0
        k = math.ceil(k / g)
    else:
        if k % g:
            return rel is Rel.NE
        k = int(k / g)
    ints = {v: c // g for v, c in ints.items()}
    order = sorted(ints)
    if rel is not Rel.LE and ints[order[0]] < 0:
        ints = {v: -c for v, c in ints.items()}
        k = -k
    return LinAtom(tuple((v, ints[v]) for v in order), int(k), rel)


_FALSE_ATOM = LinAtom((), 1, Rel.LE)


@dataclass(frozen=True)
class Constraint:
    """A conjunction of normalized atoms; ``Constraint()`` is ``true``."""

    atoms: tuple[LinAtom, ...] = ()

    @staticmethod
    def of(atoms: Iterable["LinAtom | bool"]) -> "Constraint":
        seen: dict[LinAtom, None] = {}
        for a in atoms:
            if a is True:
                continue
            if a is False or a == _FALSE_ATOM:
                return FALSE
            seen[a] = None
        return Constraint(tuple(sorted(seen, key=LinAtom.sort_key)))

    @property
    def is_false(self) -> bool:
        return self.atoms == (_FALSE_ATOM,)

    @property
    def is_true(self) -> bool:
        return not self.atoms

    def vars(self) -> tuple[Var, ...]:
        return tuple(dict.fromkeys(v for a in self.atoms for v in a.vars))

    def __and__(self, other: "Constraint") -> "Constraint":
        return Constraint.of(self.atoms + other.atoms)

    def substitute(self, s: Mapping[Var, "Var | Const | int | LinExpr"]) -> "Constraint":
        if self.is_false:
            return self
        out = []
        for a in self.atoms:
            if not any(v in s for v in a.vars):
                out.append(a)
                continue
            e = LinExpr({}, a.const)
            for v, c in a.coeffs:
                e = e + LinExpr.of(s.get(v, v)) * c
            out.append(make_atom(e, a.rel))
        return Constraint.of(out)

    def holds(self, env: Mapping[Var, int]) -> bool:
        return all(a.holds(env) for a in self.atoms)

    def __str__(self) -> str:
        if self.is_false:
            return "false"
        return ", ".join(format_atom(a) for a in self.atoms) or "true"


TRUE = Constraint()
FALSE = Constraint((_FALSE_ATOM,))


def conj(*items: "Constraint | LinAtom | bool") -> Constraint:
    atoms: list = []
    for it in items:
        if isinstance(it, Constraint):
            atoms.extend(it.atoms if not it.is_false else [False])
        else:
            atoms.append(it)
    return Constraint.of(atoms)


def _lhs_rhs(a: LinAtom) -> tuple[LinExpr, LinExpr]:
    pos = {v: c for v, c in a.coeffs if c > 0}
    neg = {v: -c for v, c in a.coeffs if c < 0}
    return LinExpr(pos), LinExpr(neg, -a.const)


def le(x, y) -> "LinAtom | bool":
    return make_atom(LinExpr.of(x) - LinExpr.of(y), Rel.LE)


def lt(x, y) -> "LinAtom | bool":
    return make_atom(LinExpr.of(x) - LinExpr.of(y) + 1, Rel.LE)


def ge(x, y) -> "LinAtom | bool":
    return le(y, x)


def gt(x, y) -> "LinAtom | bool":
    return lt(y, x)


def eq(x, y) -> "LinAtom | bool":
    return make_atom(LinExpr.of(x) - LinExpr.of(y), Rel.EQ)


def ne(x, y) -> "LinAtom | bool":
    return make_atom(LinExpr.of(x) - LinExpr.of(y), Rel.NE)


def format_expr(e: LinExpr) -> str:
    parts = []
    for v in sorted(e.coeffs):
        c = e.coeffs[v]
        mag = abs(c)
        body = v.name if mag == 1 else f"{mag}*{v.name}"
        parts.append(("-" if c < 0 else "+") + body)
    if e.const or not parts:
        parts.append(("-" if e.const < 0 else "+") + str(abs(e.const)))
    text = "".join(parts)
    return text[1:] if text.startswith("+") else text


def format_atom(a: LinAtom) -> str:
    lhs, rhs = _lhs_rhs(a)
    op = {Rel.LE: "=<", Rel.EQ: "=", Rel.NE: "=\\="}[a.rel]
    if not lhs.coeffs:
        # only negative coefficients: -N + k =< 0 reads N >= k
        return f"{format_expr(LinExpr(rhs.coeffs))} >= {a.const}"
    if a.rel is not Rel.LE and len(lhs.coeffs) == 1 and not rhs.coeffs:
        (v,) = lhs.coeffs
        if v.sort == BOOL and lhs.coeffs[v] == 1 and rhs.const in (0, 1):
            return f"{v.name} {op} {'true' if rhs.const else 'false'}"
    return f"{format_expr(lhs)} {op} {format_expr(rhs)}"


# ---------------------------------------------------------------------------
# Elimination machinery. A row is (coeff dict, const) meaning sum + const <= 0
# (or = 0 for equality rows). All numbers are Python ints.

Row = tuple[dict, int]


class _Overflow(Exception):
    pass


def _row(a: LinAtom) -> Row:
    return dict(a.coeffs), a.const


def _norm_le(coeffs: dict, const: int) -> "Row | bool":
    coeffs = {v: c for v, c in coeffs.items() if c}
    if not coeffs:
        return const <= 0
    g = math.gcd(*coeffs.values())
    return {v: c // g for v, c in coeffs.items()}, -((-const) // g)


def _norm_eq(coeffs: dict, const: int) -> "Row | bool":
    coeffs = {v: c for v, c in coeffs.items() if c}
    if not coeffs:
        return const == 0
    g = math.gcd(*coeffs.values())
    if const % g:
        return False
    return {v: c // g for v, c in coeffs.items()}, const // g


def _key(r: Row):
    return tuple(sorted((v.name, c) for v, c in r[0].items())), r[1]


def _combine(r: Row, m: int, s: Row, n: int) -> Row:
    """m*r + n*s."""
    coeffs = {v: m * c for v, c in r[0].items()}
    for v, c in s[0].items():
        coeffs[v] = coeffs.get(v, 0) + n * c
    return coeffs, m * r[1] + n * s[1]


def _domain_rows(vs: Iterable[Var]) -> list[Row]:
    rows = []
    for v in vs:
        if v.sort == BOOL:
            rows.append(({v: -1}, 0))
            rows.append(({v: 1}, -1))
    return rows


@dataclass
class _Stage:
    var: Var
    eq: Row | None
    rows: list[Row]


class _System:
    """Rows under elimination, recording each step for back-substitution."""

    def __init__(self, les: list[Row], eqs: list[Row], ceiling: int):
        self.les: dict = {}
        self.eqs: list[Row] = []
        self.stages: list[_Stage] = []
        self.ceiling = ceiling
        self.lossy = False
        self.inexact = False
        self.infeasible = False
        for r in les:
            self.add_le(r)
        for r in eqs:
            self.add_eq(r)

    def add_le(self, r: Row) -> None:
        n = _norm_le(*r)
        if n is True:
            return
        if n is False:
            self.infeasible = True
            return
        self.les.setdefault(_key(n), n)

    def add_eq(self, r: Row) -> None:
        n = _norm_eq(*r)
        if n is True:
            return
        if n is False:
            self.infeasible = True
            return
        self.eqs.append(n)

    def vars(self) -> set[Var]:
        out = set()
        for r in itertools.chain(self.les.values(), self.eqs):
            out.update(r[0])
        return out

    def promote_equalities(self) -> None:
        """Turn ``e <= 0`` and ``-e <= 0`` into ``e = 0``."""
        by_coeffs: dict = {}
        for k, r in self.les.items():
            by_coeffs.setdefault(k[0], []).append(k)
        pairs = []
        for k, r in self.les.items():
            neg = tuple(sorted((n, -c) for n, c in k[0]))
            for k2 in by_coeffs.get(neg, ()):
                if k2[1] == -k[1] and k < k2:
                    pairs.append((k, k2))
        for k, k2 in pairs:
            if k in self.les and k2 in self.les:
                r = self.les.pop(k)
                del self.les[k2]
                self.add_eq(r)

    def eliminate(self, x: Var) -> None:
        if self.infeasible:
            return
        for i, e in enumerate(self.eqs):
            if x in e[0]:
                self._solve_eq(x, self.eqs.pop(i))
                return
        pos, neg, keep = [], [], {}
        for k, r in self.les.items():
            c = r[0].get(x, 0)
            if c > 0:
                pos.append(r)
            elif c < 0:
                neg.append(r)
            else:
                keep[k] = r
        self.stages.append(_Stage(x, None, pos + neg))
        self.les = keep
        if len(pos) * len(neg) + len(keep) > self.ceiling:
            self.lossy = True
            return
        for p in pos:
            for n in neg:
                # the real shadow is only exact over the integers with a unit side
                if p[0][x] > 1 and n[0][x] < -1:
                    self.inexact = True
                self.add_le(_combine(p, -n[0][x], n, p[0][x]))

    def _solve_eq(self, x: Var, e: Row) -> None:
        a = e[0][x]
        self.stages.append(_Stage(x, e, []))
        old_les, old_eqs = list(self.les.values()), self.eqs
        self.les, self.eqs = {}, []
        for r in old_les:
            b = r[0].get(x, 0)
            if b:
                # |a|*r - sign(a)*b*e keeps the direction of the inequality
                r = _combine(r, abs(a), e, -b if a > 0 else b)
            self.add_le(r)
        for r in old_eqs:
            b = r[0].get(x, 0)
            self.add_eq(_combine(r, a, e, -b) if b else r)

    def pick(self, candidates: Iterable[Var]) -> Var:
        cands = sorted(candidates)
        # equalities first, unit pivots preferred since they keep elimination exact
        for unit in (True, False):
            for e in self.eqs:
                for v in sorted(e[0]):
                    if v in cands and (abs(e[0][v]) == 1 or not unit):
                        return v
        best, best_cost = None, None
        for v in cands:
            p = sum(1 for r in self.les.values() if r[0].get(v, 0) > 0)
            n = sum(1 for r in self.les.values() if r[0].get(v, 0) < 0)
            cost = p * n - p - n
            if best_cost is None or cost < best_cost:
                best, best_cost = v, cost
        return best

    def constant_feasible(self) -> bool:
        return not self.infeasible


def _bound_candidates(lo, hi, complete_span=64):
    """Integer values in [lo, hi] ordered by distance from zero."""
    if lo is not None and hi is not None:
        if lo > hi:
            return [], True
        if hi - lo <= complete_span:
            vals = sorted(range(lo, hi + 1), key=lambda v: (abs(v), v))
            return vals, True
    if lo is None and hi is None:
        return [0, 1, -1], False
    anchor = 0
    if lo is not None and anchor < lo:
        anchor = lo
    if hi is not None and anchor > hi:
        anchor = hi
    vals = []
    for d in range(0, 4):
        for v in (anchor + d, anchor - d):
            if (lo is None or v >= lo) and (hi is None or v <= hi) and v not in vals:
                vals.append(v)
    return vals, False


def _search(stages: list[_Stage], free: list[Var], inexact: bool = False) -> tuple[dict | None, bool]:
    """Back-substitute through the stages; returns (witness, exhaustive)."""
    env: dict[Var, int] = {v: 0 for v in free}
    exhaustive = True
    nodes = 0
    # a non-unit pivot or an inexact shadow leaves integer side conditions on
    # the variables that dropped out of every row, so those are searched too
    span = max((abs(st.eq[0][st.var]) for st in stages if st.eq is not None), default=1)
    if inexact:
        span = max([span] + [abs(c) for st in stages for r in st.rows for c in r[0].values()])
    if span > 1 and free:
        exhaustive = False
        window = sorted(range(-span, span + 1), key=lambda v: (abs(v), v))
        stages = stages + [_Stage(v, None, []) for v in free]

    def value(r: Row, skip: Var) -> Fraction:
        return r[1] + sum(c * env[v] for v, c in r[0].items() if v != skip)

    def go(i: int) -> bool:
        nonlocal exhaustive, nodes
        nodes += 1
        if nodes > _MAX_NODES:
            exhaustive = False
            return False
        if i < 0:
            return True
        st = stages[i]
        x = st.var
        if st.eq is not None:
            a = st.eq[0][x]
            num = -value(st.eq, x)
            if num % a:
                return False
            env[x] = num // a
            return go(i - 1)
        lo = hi = None
        for r in st.rows:
            a = r[0][x]
            rest = value(r, x)
            if a > 0:
                b = (-rest) // a
                hi = b if hi is None else min(hi, b)
            else:
                b = math.ceil(Fraction(-rest, a))
                lo = b if lo is None else max(lo, b)
        if not st.rows and span > 1:
            vals, complete = window, False
        else:
            vals, complete = _bound_candidates(lo, hi)
        if not complete:
            exhaustive = False
        for v in vals:
            env[x] = v
            if go(i - 1):
                return True
        return False

    found = go(len(stages) - 1)
    return (dict(env) if found else None), exhaustive


def _decide_rows(les: list[Row], eqs: list[Row], ceiling: int) -> tuple[Sat, dict | None]:
    sys = _System(les, eqs, ceiling)
    if sys.infeasible:
        return Sat.UNSAT, None
    allvars = sys.vars()
    while True:
        remaining = sys.vars()
        if not remaining or sys.infeasible:
            break
        sys.promote_equalities()
        if sys.infeasible:
            break
        sys.eliminate(sys.pick(remaining))
    if sys.infeasible:
        return Sat.UNSAT, None
    free = sorted(allvars - {st.var for st in sys.stages})
    witness, exhaustive = _search(sys.stages, free, sys.inexact)
    if witness is not None:
        return Sat.SAT, witness
    if exhaustive and not sys.lossy:
        return Sat.UNSAT, None
    return Sat.UNKNOWN, None


def _split(atoms: Iterable[LinAtom]) -> tuple[list[Row], list[Row], list[LinAtom]]:
    les, eqs, nes = [], [], []
    for a in atoms:
        if a.rel is Rel.LE:
            les.append(_row(a))
        elif a.rel is Rel.EQ:
            eqs.append(_row(a))
        else:
            nes.append(a)
    return les, eqs, nes


def _ne_branches(a: LinAtom) -> tuple[Row, Row]:
    coeffs, k = _row(a)
    # e != 0  <=>  e + 1 <= 0  or  -e + 1 <= 0
    return (coeffs, k + 1), ({v: -c for v, c in coeffs.items()}, -k + 1)


def check(c: Constraint, ceiling: int = DEFAULT_CEILING) -> tuple[Sat, dict | None]:
    """Satisfiability of ``c`` together with a witness when one was found."""
    if c.is_false:
        return Sat.UNSAT, None
    les, eqs, nes = _split(c.atoms)
    les = les + _domain_rows(c.vars())
    if len(nes) > _MAX_NE_SPLITS:
        status, _ = _decide_rows(les, eqs, ceiling)
        return (Sat.UNSAT if status is Sat.UNSAT else Sat.UNKNOWN), None
    result = Sat.UNSAT
    for choice in itertools.product(*(_ne_branches(a) for a in nes)):
        status, witness = _decide_rows(les + list(choice), eqs, ceiling)
        if status is Sat.SAT:
            env = {v: witness.get(v, 0) for v in c.vars()}
            if c.holds(env):
                return Sat.SAT, env
            result = Sat.UNKNOWN
        elif status is Sat.UNKNOWN:
            result = Sat.UNKNOWN
    return result, None


def is_satisfiable(c: Constraint, ceiling: int = DEFAULT_CEILING) -> Sat:
    return check(c, ceiling)[0]


def _negations(a: LinAtom) -> list[list[LinAtom]]:
    """Each inner list is one conjunctive branch of the negation of ``a``."""
    e = a.expr()
    if a.rel is Rel.LE:
        return [[make_atom(-e + 1, Rel.LE)]]
    if a.rel is Rel.EQ:
        return [[make_atom(e + 1, Rel.LE)], [make_atom(-e + 1, Rel.LE)]]
    return [[make_atom(e, Rel.EQ)]]


def entails_atom(c: Constraint, a: LinAtom, ceiling: int = DEFAULT_CEILING) -> bool:
    for branch in _negations(a):
        if is_satisfiable(conj(c, *branch), ceiling) is not Sat.UNSAT:
            return False
    return True


def entails(c: Constraint, d: Constraint, ceiling: int = DEFAULT_CEILING) -> bool:
    """Sound check of ``c -> d``; ``False`` may be a loss of precision."""
    if d.is_true or c.is_false:
        return True
    if d.is_false:
        return is_satisfiable(c, ceiling) is Sat.UNSAT
    if is_satisfiable(c, ceiling) is Sat.UNSAT:
        return True
    return all(entails_atom(c, a, ceiling) for a in d.atoms)


def equivalent(c: Constraint, d: Constraint) -> bool:
    return entails(c, d) and entails(d, c)


def _rows_to_atoms(rows: Iterable[Row], rel: Rel) -> list:
    return [make_atom(LinExpr(coeffs, k), rel) for coeffs, k in rows]


def simplify(c: Constraint, ceiling: int = DEFAULT_CEILING) -> Constraint:
    """Drop atoms entailed by the remaining ones."""
    atoms = list(c.atoms)
    i = 0
    while i < len(atoms):
        rest = Constraint.of(atoms[:i] + atoms[i + 1:])
        if entails_atom(rest, atoms[i], ceiling):
            atoms.pop(i)
        else:
            i += 1
    return Constraint.of(atoms)


def project(c: Constraint, keep: Iterable[Var], ceiling: int = DEFAULT_CEILING) -> Constraint:
    """An over-approximation of ``exists (vars(c) - keep). c`` over ``keep``."""
    if c.is_false:
        return FALSE
    keep = set(keep)
    if is_satisfiable(c, ceiling) is Sat.UNSAT:
        return FALSE
    les, eqs, nes = _split(c.atoms)
    domain = _domain_rows(c.vars())
    sys = _System(les + domain, eqs, ceiling)
    nes_rows = [_row(a) for a in nes]
    gone: set[Var] = set()
    while True:
        todo = sys.vars() - keep
        if not todo:
            break
        x = sys.pick(todo)
        solving = next((e for e in sys.eqs if x in e[0]), None)
        sys.eliminate(x)
        if solving is not None:
            a, b_rows = solving[0][x], []
            for r in nes_rows:
                b = r[0].get(x, 0)
                b_rows.append(_combine(r, a, solving, -b) if b else r)
            nes_rows = b_rows
        else:
            gone.add(x)
        # on overflow the rows mentioning x were dropped, which is still sound
        sys.lossy = False
    if sys.infeasible:
        return FALSE
    atoms = _rows_to_atoms(sys.les.values(), Rel.LE) + _rows_to_atoms(sys.eqs, Rel.EQ)
    for coeffs, k in nes_rows:
        if not (set(coeffs) - keep):
            atoms.append(make_atom(LinExpr(coeffs, k), Rel.NE))
    out = Constraint.of(atoms)
    out = simplify(out, ceiling)
    # drop the implicit 0..1 bounds of boolean variables
    dom = {make_atom(LinExpr(r[0], r[1]), Rel.LE) for r in domain}
    return Constraint.of(a for a in out.atoms if a not in dom)


def split_equalities(c: Constraint) -> Constraint:
    out = []
    for a in c.atoms:
        if a.rel is Rel.EQ:
            e = a.expr()
            out.append(make_atom(e, Rel.LE))
            out.append(make_atom(-e, Rel.LE))
        else:
            out.append(a)
    return Constraint.of(out)


def widen(c1: Constraint, c2: Constraint, ceiling: int = DEFAULT_CEILING) -> Constraint:
    """Keep the atoms of ``c1`` (equalities split) that ``c2`` entails."""
    return Constraint.of(a for a in split_equalities(c1).atoms if entails_atom(c2, a, ceiling))


def int_var(name: str) -> Var:
    return Var(name, INT)


def bool_var(name: str) -> Var:
    return Var(name, BOOL)
