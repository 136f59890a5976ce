"""Atoms, clauses, clause sets and the structural queries on them."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

from . import linear
from .linear import Constraint, LinExpr, Rel
from .terms import (
    AdtDecl,
    App,
    INT,
    Const,
    Constructor,
    FreshNames,
    Sort,
    Subst,
    Term,
    Var,
    apply,
    format_term,
    match_terms,
    term_vars,
    unify_terms,
    unique,
)


class ModelError(Exception):
    """Ill-formed clauses or declarations."""


class MissingModeError(ModelError):
    pass


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...] = ()

    def vars(self) -> tuple[Var, ...]:
        return unique(v for a in self.args for v in term_vars(a))

    def subst(self, s: Mapping[Var, Term]) -> "Atom":
        return Atom(self.pred, tuple(apply(a, s) for a in self.args))

    def has_basic_types(self) -> bool:
        return all(a.sort.is_basic for a in self.args)

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(format_term(a) for a in self.args)})"


@dataclass(frozen=True)
class Mode:
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    total: bool = False
    functional: bool = False


@dataclass(frozen=True)
class Signature:
    adts: Mapping[str, AdtDecl] = field(default_factory=dict)
    preds: Mapping[str, tuple[Sort, ...]] = field(default_factory=dict)
    modes: Mapping[str, Mode] = field(default_factory=dict)

    def constructors(self) -> dict[str, Constructor]:
        return {c.name: c for d in self.adts.values() for c in d.constructors}

    def with_pred(self, name: str, sorts: tuple[Sort, ...], mode: Mode | None = None) -> "Signature":
        preds = dict(self.preds)
        preds[name] = sorts
        modes = dict(self.modes)
        if mode is not None:
            modes[name] = mode
        return Signature(self.adts, preds, modes)

    def mode(self, pred: str) -> Mode:
        try:
            return self.modes[pred]
        except KeyError:
            raise MissingModeError(f"no mode declared for predicate {pred}") from None


@dataclass(frozen=True)
class Clause:
    head: Atom | None
    constraint: Constraint = linear.TRUE
    body: tuple[Atom, ...] = ()
    cid: int = field(default=0, compare=False)

    @property
    def is_goal(self) -> bool:
        return self.head is None

    def atoms(self) -> tuple[Atom, ...]:
        return ((self.head,) if self.head else ()) + self.body

    def vars(self) -> tuple[Var, ...]:
        return unique(
            [v for a in self.atoms() for v in a.vars()] + list(self.constraint.vars())
        )

    def has_basic_types(self) -> bool:
        return all(a.has_basic_types() for a in self.atoms())

    def subst(self, s: Mapping[Var, Term]) -> "Clause":
        return Clause(
            self.head.subst(s) if self.head else None,
            substitute_constraint(self.constraint, s),
            tuple(a.subst(s) for a in self.body),
            self.cid,
        )

    def with_id(self, cid: int) -> "Clause":
        return replace(self, cid=cid)

    def __str__(self) -> str:
        return format_clause(self)


@dataclass(frozen=True)
class ClauseSet:
    signature: Signature
    clauses: tuple[Clause, ...]
    marked: frozenset[int] = frozenset()

    def definite(self) -> tuple[Clause, ...]:
        return tuple(c for c in self.clauses if not c.is_goal)

    def goals(self) -> tuple[Clause, ...]:
        return tuple(c for c in self.clauses if c.is_goal)

    def by_pred(self) -> dict[str, list[Clause]]:
        out: dict[str, list[Clause]] = {}
        for c in self.clauses:
            if c.head:
                out.setdefault(c.head.pred, []).append(c)
        return out

    def has_basic_types(self) -> bool:
        return all(c.has_basic_types() for c in self.clauses)

    def validate(self) -> None:
        for c in self.clauses:
            for a in c.atoms():
                sorts = self.signature.preds.get(a.pred)
                if sorts is None:
                    raise ModelError(f"undeclared predicate {a.pred} in clause {c.cid}")
                if len(sorts) != len(a.args):
                    raise ModelError(f"arity mismatch for {a.pred} in clause {c.cid}")
                seen = set()
                for s, t in zip(sorts, a.args):
                    if t.sort != s:
                        raise ModelError(f"ill-typed argument {format_term(t)} of {a.pred}")
                    if s.is_basic:
                        if not isinstance(t, Var) or t in seen:
                            raise ModelError(f"basic argument discipline violated in {a}")
                        seen.add(t)
            for v in c.constraint.vars():
                if not v.sort.is_basic:
                    raise ModelError(f"non-basic variable {v} in constraint")

    def __str__(self) -> str:
        return "\n".join(format_clause(c) for c in self.clauses)


def substitute_constraint(c: Constraint, s: Mapping[Var, Term]) -> Constraint:
    m = {v: t for v, t in s.items() if v.sort.is_basic}
    if not m:
        return c
    for v, t in m.items():
        if isinstance(t, App):
            raise ModelError(f"basic variable {v} bound to a constructor term")
    return c.substitute(m)


# ---------------------------------------------------------------------------
# Structural queries


def partition_vars(g: Iterable[Atom]) -> tuple[tuple[Var, ...], tuple[Var, ...]]:
    vs = unique(v for a in g for v in a.vars())
    return (
        tuple(v for v in vs if v.sort.is_basic),
        tuple(v for v in vs if not v.sort.is_basic),
    )


def bvars(g: Iterable[Atom]) -> tuple[Var, ...]:
    return partition_vars(g)[0]


def adt_vars(g: Iterable[Atom]) -> tuple[Var, ...]:
    return partition_vars(g)[1]


def sharing_block_indices(g: Sequence[Atom]) -> list[list[int]]:
    parent = list(range(len(g)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[Var, int] = {}
    for i, a in enumerate(g):
        for v in adt_vars([a]):
            if v in owner:
                ri, rj = find(i), find(owner[v])
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
            else:
                owner[v] = i
    blocks: dict[int, list[int]] = {}
    for i in range(len(g)):
        blocks.setdefault(find(i), []).append(i)
    return sorted(blocks.values())


def sharing_blocks(g: Sequence[Atom]) -> list[tuple[Atom, ...]]:
    return [tuple(g[i] for i in b) for b in sharing_block_indices(g)]


def is_connected(g: Sequence[Atom]) -> bool:
    return len(sharing_block_indices(g)) <= 1


def atomwise_subsumes(g1: Sequence[Atom], g2: Sequence[Atom]) -> list[tuple[int, int, Subst]] | None:
    """Witness that every atom of ``g1`` has a distinct instance in ``g2``."""

    def search(i: int, used: frozenset[int]):
        if i == len(g1):
            return []
        for j, b in enumerate(g2):
            if j in used or b.pred != g1[i].pred or len(b.args) != len(g1[i].args):
                continue
            theta = match_terms(zip(g1[i].args, b.args))
            if theta is None:
                continue
            rest = search(i + 1, used | {j})
            if rest is not None:
                return [(i, j, theta)] + rest
        return None

    return search(0, frozenset())


def unify(a1: Atom, a2: Atom) -> Subst | None:
    if a1.pred != a2.pred or len(a1.args) != len(a2.args):
        return None
    return unify_terms(zip(a1.args, a2.args))


def input_vars(a: Atom, mode: Mode) -> tuple[Var, ...]:
    return unique(v for i in mode.inputs for v in term_vars(a.args[i]))


def output_vars(a: Atom, mode: Mode) -> tuple[Var, ...]:
    return unique(v for i in mode.outputs for v in term_vars(a.args[i]))


def source_indices(g: Sequence[Atom], sig: Signature) -> list[int]:
    ins = {v for a in g for v in input_vars(a, sig.mode(a.pred))}
    outs = {v for a in g for v in output_vars(a, sig.mode(a.pred))}
    sources = ins - outs
    return [
        i for i, a in enumerate(g) if set(input_vars(a, sig.mode(a.pred))) <= sources
    ]


def source_atoms(g: Sequence[Atom], sig: Signature) -> tuple[Atom, ...]:
    return tuple(g[i] for i in source_indices(g, sig))


def source_vars(g: Sequence[Atom], sig: Signature) -> tuple[Var, ...]:
    outs = {v for a in g for v in output_vars(a, sig.mode(a.pred))}
    return unique(v for a in g for v in input_vars(a, sig.mode(a.pred)) if v not in outs)


# ---------------------------------------------------------------------------
# Matching of conjunctions


def _basic_injective(theta: Subst, keys: Iterable[Var]) -> bool:
    images = set()
    for v in keys:
        if not v.sort.is_basic or v not in theta:
            continue
        t = theta[v]
        if not isinstance(t, Var) or t in images:
            return False
        images.add(t)
    return True


def match_conj(
    patterns: Sequence[Atom],
    targets: Sequence[Atom],
    theta: Subst | None = None,
    avoid: frozenset[int] = frozenset(),
) -> Iterator[tuple[list[int], Subst]]:
    """All ways of mapping every pattern onto a distinct target atom.

    Basic variables of the patterns may only be renamed (injectively);
    ADT variables may be bound to arbitrary terms.
    """

    def go(i: int, used: list[int], s: Subst):
        if i == len(patterns):
            yield list(used), dict(s)
            return
        p = patterns[i]
        for j, t in enumerate(targets):
            if j in used or j in avoid or t.pred != p.pred or len(t.args) != len(p.args):
                continue
            s2 = match_terms(zip(p.args, t.args), s)
            if s2 is None or not _basic_injective(s2, s2):
                continue
            used.append(j)
            yield from go(i + 1, used, s2)
            used.pop()

    yield from go(0, [], dict(theta or {}))


# ---------------------------------------------------------------------------
# Normal form, renaming and variants


def clause_names(c: Clause) -> set[str]:
    return {v.name for v in c.vars()}


def rename_apart(c: Clause, fresh: FreshNames) -> Clause:
    ren = {v: fresh.var(v) for v in c.vars()}
    return c.subst(ren)


def normalize(c: Clause, fresh: FreshNames) -> Clause:
    """Enforce distinct variables in the basic positions of every atom and
    remove constraint-only variables that are defined by a unit equality."""
    extra = []

    def fix(a: Atom) -> Atom:
        seen: set[Var] = set()
        args = []
        for t in a.args:
            if t.sort.is_basic and (not isinstance(t, Var) or t in seen):
                v = fresh.var(t if isinstance(t, Var) else "V", t.sort)
                extra.append(linear.eq(v, t))
                t = v
            if isinstance(t, Var) and t.sort.is_basic:
                seen.add(t)
            args.append(t)
        return Atom(a.pred, tuple(args))

    head = fix(c.head) if c.head else None
    body = tuple(fix(a) for a in c.body)
    constraint = linear.conj(c.constraint, *extra)
    constraint = eliminate_locals(constraint, {v for a in ((head,) if head else ()) + body for v in a.vars()})
    return Clause(head, constraint, body, c.cid)


def eliminate_locals(c: Constraint, keep: set[Var]) -> Constraint:
    """Substitute away integer variables outside ``keep`` that some equality
    defines with a unit coefficient. This is an exact transformation."""
    changed = True
    while changed and not c.is_false:
        changed = False
        for a in c.atoms:
            if a.rel is not Rel.EQ:
                continue
            for v, k in a.coeffs:
                if v in keep or abs(k) != 1 or v.sort != INT:
                    continue
                # v = -(rest + const) / k
                rest = LinExpr({u: -d * k for u, d in a.coeffs if u != v}, -a.const * k)
                others = [b for b in c.atoms if b is not a]
                c = Constraint.of(others).substitute({v: rest})
                changed = True
                break
            if changed:
                break
    return c


def _var_pairs(t1: Term, t2: Term, out: list) -> bool:
    if isinstance(t1, Var) and isinstance(t2, Var):
        out.append((t1, t2))
        return t1.sort == t2.sort
    if isinstance(t1, App) and isinstance(t2, App):
        if t1.ctor != t2.ctor:
            return False
        return all(_var_pairs(a, b, out) for a, b in zip(t1.args, t2.args))
    return t1 == t2


def _extend_bijection(fwd: dict, bwd: dict, pairs) -> tuple[dict, dict] | None:
    fwd, bwd = dict(fwd), dict(bwd)
    for a, b in pairs:
        if fwd.get(a, b) != b or bwd.get(b, a) != a:
            return None
        fwd[a] = b
        bwd[b] = a
    return fwd, bwd


def _atom_pairs(a1: Atom, a2: Atom) -> list | None:
    if len(a1.args) != len(a2.args):
        return None
    pairs: list = []
    for t1, t2 in zip(a1.args, a2.args):
        if not _var_pairs(t1, t2, pairs):
            return None
    return pairs


def renamings(c1: Clause, c2: Clause, ignore_head_pred: bool = False) -> Iterator[dict[Var, Var]]:
    """Bijective renamings mapping the atoms of ``c1`` onto those of ``c2``,
    allowing the body atoms to be reordered."""
    if (c1.head is None) != (c2.head is None) or len(c1.body) != len(c2.body):
        return
    fwd: dict = {}
    bwd: dict = {}
    if c1.head is not None:
        if not ignore_head_pred and c1.head.pred != c2.head.pred:
            return
        pairs = _atom_pairs(c1.head, c2.head)
        if pairs is None:
            return
        ext = _extend_bijection(fwd, bwd, pairs)
        if ext is None:
            return
        fwd, bwd = ext
    if sorted(a.pred for a in c1.body) != sorted(a.pred for a in c2.body):
        return

    def go(i: int, used: frozenset[int], fwd: dict, bwd: dict):
        if i == len(c1.body):
            yield fwd
            return
        a = c1.body[i]
        for j, b in enumerate(c2.body):
            if j in used or b.pred != a.pred:
                continue
            pairs = _atom_pairs(a, b)
            if pairs is None:
                continue
            ext = _extend_bijection(fwd, bwd, pairs)
            if ext is not None:
                yield from go(i + 1, used | {j}, *ext)

    yield from go(0, frozenset(), fwd, bwd)


def variant_renaming(c1: Clause, c2: Clause, ignore_head_pred: bool = False) -> dict[Var, Var] | None:
    """A renaming showing ``c1`` and ``c2`` are variants, up to body order and
    equivalence of constraints."""
    for ren in renamings(c1, c2, ignore_head_pred):
        k1 = linear.project(c1.constraint, ren.keys())
        k2 = linear.project(c2.constraint, ren.values())
        if linear.equivalent(k1.substitute(ren), k2):
            return ren
    return None


def is_variant(c1: Clause, c2: Clause) -> bool:
    return variant_renaming(c1, c2) is not None


def canonical(c: Clause) -> Clause:
    """Rename variables by order of first occurrence."""
    ren = {v: Var(f"V{i}", v.sort) for i, v in enumerate(c.vars())}
    return c.subst(ren)


def format_clause(c: Clause) -> str:
    head = str(c.head) if c.head else "false"
    parts = [] if c.constraint.is_true else [str(c.constraint)]
    parts += [str(a) for a in c.body]
    if not parts:
        return head + "."
    return f"{head} :- {', '.join(parts)}."
