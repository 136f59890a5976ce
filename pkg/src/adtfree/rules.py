"""The transformation rules, with their side conditions.

A :class:`Transformer` owns the mutable state of one transformation run: the
introduced definitions, the level constraints, the ledger of applied steps and
the supply of fresh names. Each rule method checks its applicability
conditions, records itself in the ledger and returns the derived clause(s).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from . import linear
from .clauses import (
    Atom,
    Clause,
    ClauseSet,
    Mode,
    Signature,
    adt_vars,
    bvars,
    format_clause,
    input_vars,
    normalize,
    output_vars,
    rename_apart,
    substitute_constraint,
)
from .linear import Sat
from .terms import FreshNames, Subst, Var, apply, is_strict_subterm, is_subterm, term_vars, unify_terms, unique


class RuleError(Exception):
    """A rule was applied outside its applicability conditions."""


class ConditionUViolation(AssertionError):
    """A definition was used for folding but never unfolded at its own level."""


# ---------------------------------------------------------------------------
# Levels

LevelCon = tuple[str, str, int]  # level(a) >= level(b) + w


def level_ge(p: str | None, q: str | None) -> list[LevelCon]:
    return [] if p is None or q is None else [(p, q, 0)]


def level_gt(p: str | None, q: str | None) -> list[LevelCon]:
    return [] if p is None or q is None else [(p, q, 1)]


def level_eq(p: str | None, q: str | None) -> list[LevelCon]:
    return level_ge(p, q) + level_ge(q, p)


class LevelStore:
    """Difference constraints over predicate levels, solved by longest paths.

    ``None`` stands for the head ``false``, whose level exceeds every other.
    """

    def __init__(self):
        self.constraints: list[LevelCon] = []

    @staticmethod
    def _solve(cons: Sequence[LevelCon]) -> dict[str, int] | None:
        nodes = {p for c in cons for p in c[:2]}
        level = {n: 0 for n in nodes}
        for _ in range(len(nodes) + 1):
            changed = False
            for a, b, w in cons:
                if level[a] < level[b] + w:
                    level[a] = level[b] + w
                    changed = True
            if not changed:
                return level
        return None

    def check(self, cons: Iterable[LevelCon]) -> bool:
        return self._solve(self.constraints + list(cons)) is not None

    def add(self, cons: Iterable[LevelCon]) -> bool:
        cons = [c for c in cons if c[0] != c[1] or c[2] > 0]
        new = [c for c in cons if c not in self.constraints]
        if not new:
            return True
        if not self.check(new):
            return False
        self.constraints.extend(new)
        return True

    def solution(self) -> dict[str, int] | None:
        return self._solve(self.constraints)

    def satisfiable(self) -> bool:
        return self.solution() is not None


# ---------------------------------------------------------------------------
# Ledger


@dataclass(frozen=True)
class Step:
    rule: str
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    info: dict = field(default_factory=dict, compare=False)


class Ledger:
    def __init__(self):
        self.steps: list[Step] = []
        self.clauses: dict[int, Clause] = {}
        self.marked: dict[int, str] = {}
        self.roots: set[int] = set()
        self.unfolded_at_level: set[str] = set()
        self.folded_with: dict[str, list[int]] = {}

    def root(self, c: Clause) -> None:
        self.roots.add(c.cid)
        self.clauses[c.cid] = c

    def record(self, rule: str, inputs: Sequence[Clause], outputs: Sequence[Clause], **info) -> Step:
        for c in outputs:
            self.clauses[c.cid] = c
        step = Step(rule, tuple(c.cid for c in inputs), tuple(c.cid for c in outputs), info)
        self.steps.append(step)
        inherited = [self.marked[i] for i in step.inputs if i in self.marked]
        if inherited:
            for o in step.outputs:
                self.marked.setdefault(o, inherited[0])
        return step

    def mark(self, c: Clause, reason: str) -> None:
        self.marked.setdefault(c.cid, reason)

    def parents(self) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {}
        for s in self.steps:
            for o in s.outputs:
                out.setdefault(o, set()).update(s.inputs)
        return out

    def traces_to_root(self, cid: int) -> bool:
        parents = self.parents()
        seen, todo = set(), [cid]
        while todo:
            x = todo.pop()
            if x in self.roots:
                return True
            if x in seen:
                continue
            seen.add(x)
            todo.extend(parents.get(x, ()))
        return False

    def to_json(self) -> str:
        def plain(v: Any):
            if isinstance(v, dict):
                return {str(k): plain(x) for k, x in v.items()}
            if isinstance(v, (list, tuple, set, frozenset)):
                return [plain(x) for x in v]
            if isinstance(v, (int, float, bool)) or v is None:
                return v
            return str(v)

        doc = {
            "clauses": {str(k): format_clause(c) for k, c in sorted(self.clauses.items())},
            "roots": sorted(self.roots),
            "steps": [
                {"rule": s.rule, "inputs": list(s.inputs), "outputs": list(s.outputs), **plain(s.info)}
                for s in self.steps
            ],
            "marked": {str(k): v for k, v in sorted(self.marked.items())},
        }
        return json.dumps(doc, indent=2)


# ---------------------------------------------------------------------------
# Definitions


class DefKind(enum.Enum):
    PROJECT = "projection"
    GENERALIZE = "generalization"
    DIFF = "difference"


_PREFIX = {DefKind.PROJECT: "new", DefKind.GENERALIZE: "gen", DefKind.DIFF: "diff"}


@dataclass(frozen=True)
class Definition:
    clause: Clause
    kind: DefKind

    @property
    def pred(self) -> str:
        return self.clause.head.pred

    @property
    def head(self) -> Atom:
        return self.clause.head

    @property
    def body(self) -> tuple[Atom, ...]:
        return self.clause.body

    @property
    def constraint(self) -> linear.Constraint:
        return self.clause.constraint


def _depends(sig_clauses: dict[str, list[Clause]]) -> dict[str, set[str]]:
    """Transitive closure of the immediate dependency relation."""
    direct = {p: {a.pred for c in cs for a in c.body} for p, cs in sig_clauses.items()}
    closure: dict[str, set[str]] = {}
    for p in direct:
        seen, todo = set(), list(direct[p])
        while todo:
            q = todo.pop()
            if q not in seen:
                seen.add(q)
                todo.extend(direct.get(q, ()))
        closure[p] = seen
    return closure


def tuple_precedes(us: Sequence, vs: Sequence) -> bool:
    """Well-founded subterm ordering on tuples of terms."""
    if not all(any(is_subterm(u, v) for v in vs) for u in us):
        return False
    return any(is_strict_subterm(u, v) for u in us for v in vs)


class Transformer:
    def __init__(self, problem: ClauseSet, ceiling: int = linear.DEFAULT_CEILING):
        self.problem = problem
        self.signature: Signature = problem.signature
        self.ceiling = ceiling
        self.ds: dict[str, list[Clause]] = {}
        for c in problem.definite():
            self.ds.setdefault(c.head.pred, []).append(c)
        self.fresh = FreshNames()
        self.fresh.reserve(self.signature.preds)
        self.fresh.reserve(v.name for c in problem.clauses for v in c.vars())
        self.levels = LevelStore()
        for c in problem.definite():
            for a in c.body:
                self.levels.add(level_ge(c.head.pred, a.pred))
        self.ledger = Ledger()
        for c in problem.clauses:
            self.ledger.root(c)
        self.defs: list[Definition] = []
        self._def_ids: dict[int, Definition] = {}
        self._next_id = max((c.cid for c in problem.clauses), default=0) + 1
        self._deps = _depends(self.ds)
        self._descending: dict[str, bool] = {}

    # -- helpers -------------------------------------------------------------

    def new_id(self) -> int:
        cid = self._next_id
        self._next_id += 1
        return cid

    def _finish(self, c: Clause) -> Clause:
        return normalize(c, self.fresh).with_id(self.new_id())

    def mode(self, pred: str) -> Mode:
        return self.signature.mode(pred)

    def is_marked(self, c: Clause) -> bool:
        return c.cid in self.ledger.marked

    def definition_of(self, c: Clause) -> Definition | None:
        return self._def_ids.get(c.cid)

    def is_total_functional(self, atoms: Sequence[Atom]) -> tuple[tuple[Var, ...], tuple[Var, ...]] | None:
        """Inputs and outputs of ``atoms`` viewed as one total functional
        conjunction F(X;Y), or None when the conjunction is not of that form."""
        outs: list[Var] = []
        produced: dict[Var, int] = {}
        for i, a in enumerate(atoms):
            m = self.signature.modes.get(a.pred)
            if m is None or not (m.total and m.functional):
                return None
            args = [a.args[j] for j in m.outputs]
            if not all(isinstance(t, Var) for t in args) or len(set(args)) != len(args):
                return None
            if set(args) & set(input_vars(a, m)):
                return None
            for v in args:
                if v in produced:
                    return None
                produced[v] = i
            outs.extend(args)
        # outputs feeding inputs must form an acyclic dataflow
        edges = {
            i: {produced[v] for v in input_vars(a, self.mode(a.pred)) if v in produced}
            for i, a in enumerate(atoms)
        }
        state: dict[int, int] = {}

        def cyclic(i: int) -> bool:
            if state.get(i) == 1:
                return True
            if state.get(i) == 2:
                return False
            state[i] = 1
            if any(cyclic(j) for j in edges[i]):
                return True
            state[i] = 2
            return False

        if any(cyclic(i) for i in edges):
            return None
        ins = unique(v for a in atoms for v in input_vars(a, self.mode(a.pred)) if v not in produced)
        return ins, tuple(outs)

    # -- R1 ------------------------------------------------------------------

    def define(
        self,
        head_vars: Sequence[Var],
        constraint: linear.Constraint,
        body: Sequence[Atom],
        kind: DefKind,
        mode: Mode | None = None,
        name: str | None = None,
    ) -> Definition:
        name = name or self.fresh.pred(_PREFIX[kind])
        if name in self.signature.preds:
            raise RuleError(f"predicate {name} is not fresh")
        self.fresh.reserve([name])
        for a in body:
            if a.pred not in self.ds and a.pred not in self.problem.signature.preds:
                raise RuleError(f"definition body uses {a.pred}, which is not an input predicate")
        body_vars = set(constraint.vars()) | {v for a in body for v in a.vars()}
        if not set(head_vars) <= body_vars:
            raise RuleError("head variables must occur in the definition body")
        if mode is None:
            mode = Mode((), tuple(range(len(head_vars))))
        self.signature = self.signature.with_pred(name, tuple(v.sort for v in head_vars), mode)
        clause = Clause(Atom(name, tuple(head_vars)), constraint, tuple(body), self.new_id())
        d = Definition(clause, kind)
        for a in body:
            self.levels.add(level_ge(name, a.pred))
        self.defs.append(d)
        self._def_ids[clause.cid] = d
        self.ledger.root(clause)
        self.ledger.record("R1", [], [clause], kind=kind.value, pred=name)
        return d

    # -- R2 ------------------------------------------------------------------

    def resolvents(self, clause: Clause, pos: int) -> list[tuple[Clause, range]]:
        """Unfolded clauses, each paired with the body positions that came
        from the clause used for resolution. Nothing is recorded."""
        if not 0 <= pos < len(clause.body):
            raise RuleError(f"no body atom at position {pos}")
        atom = clause.body[pos]
        out = []
        for k in self.ds.get(atom.pred, []):
            kr = rename_apart(k, self.fresh)
            theta = unify_terms(zip(atom.args, kr.head.args))
            if theta is None:
                continue
            c = substitute_constraint(clause.constraint & kr.constraint, theta)
            if linear.is_satisfiable(c, self.ceiling) is Sat.UNSAT:
                continue
            body = clause.body[:pos] + kr.body + clause.body[pos + 1:]
            new = Clause(
                clause.head.subst(theta) if clause.head else None,
                c,
                tuple(a.subst(theta) for a in body),
            )
            out.append((self._finish(new), range(pos, pos + len(kr.body))))
        return out

    def unfold_with_positions(self, clause: Clause, pos: int) -> list[tuple[Clause, range]]:
        results = self.resolvents(clause, pos)
        atom = clause.body[pos]
        d = self.definition_of(clause)
        info = {"atom": str(atom)}
        if d is not None and self.levels.add(level_eq(d.pred, atom.pred)):
            self.ledger.unfolded_at_level.add(d.pred)
            info["condition_u"] = d.pred
        self.ledger.record("R2", [clause], [c for c, _ in results], **info)
        return results

    def unfold(self, clause: Clause, pos: int) -> list[Clause]:
        return [c for c, _ in self.unfold_with_positions(clause, pos)]

    # -- R3 ------------------------------------------------------------------

    def fold(self, clause: Clause, positions: Sequence[int], d: Definition, theta: Subst) -> Clause:
        positions = list(positions)
        if len(positions) != len(d.body) or len(set(positions)) != len(positions):
            raise RuleError("folding needs one clause atom per definition atom")
        for a, p in zip(d.body, positions):
            if a.subst(theta) != clause.body[p]:
                raise RuleError(f"{clause.body[p]} is not an instance of {a}")
        missing = set(d.constraint.vars()) - set(theta)
        if missing:
            raise RuleError("the substitution must cover the definition constraint")
        if not linear.entails(clause.constraint, substitute_constraint(d.constraint, theta), self.ceiling):
            raise RuleError("clause constraint does not entail the definition constraint")
        if not self.levels.add(level_ge(clause.head.pred if clause.head else None, d.pred)):
            raise RuleError("level condition for folding fails")
        k = d.head.subst(theta)
        first = min(positions)
        rest = [a for i, a in enumerate(clause.body) if i not in positions]
        body = [a for i, a in enumerate(clause.body) if i < first and i not in positions]
        body.append(k)
        body += [a for i, a in enumerate(clause.body) if i > first and i not in positions]
        new = self._finish(Clause(clause.head, clause.constraint, tuple(body)))
        violation = self._condition_e(clause, rest, d, theta)
        self.ledger.folded_with.setdefault(d.pred, []).append(new.cid)
        self.ledger.record(
            "R3", [clause], [new], definition=d.clause.cid, pred=d.pred,
            theta={str(v): str(t) for v, t in theta.items()},
        )
        if violation:
            self.ledger.mark(new, violation)
        return new

    def _condition_e(self, clause: Clause, rest: Sequence[Atom], d: Definition, theta: Subst) -> str | None:
        context = set(clause.constraint.vars()) | {v for a in rest for v in a.vars()}
        if clause.head:
            context |= set(clause.head.vars())
        head_vars = set(d.head.vars())
        local = [v for v in d.clause.vars() if v not in head_vars]
        for x in local:
            t = apply(x, theta)
            if not isinstance(t, Var) or t in context:
                return f"condition E1 fails for {x.name}"
            for y in d.clause.vars():
                if y != x and t in set(term_vars(apply(y, theta))):
                    return f"condition E2 fails for {x.name}"
        return None

    # -- R4 ------------------------------------------------------------------

    def delete(self, clause: Clause) -> bool:
        if linear.is_satisfiable(clause.constraint, self.ceiling) is not Sat.UNSAT:
            return False
        self.ledger.record("R4", [clause], [])
        return True

    # -- R5 ------------------------------------------------------------------

    def functionality_applies(self, clause: Clause, i: int, j: int) -> bool:
        a, b = clause.body[i], clause.body[j]
        if i == j or a.pred != b.pred:
            return False
        m = self.signature.modes.get(a.pred)
        if m is None or not m.functional:
            return False
        return all(a.args[k] == b.args[k] for k in m.inputs)

    def functionality(self, clause: Clause, i: int, j: int) -> Clause | None:
        """Merge two calls of a functional predicate on equal inputs.

        Returns None when the outputs cannot be equal, in which case the
        clause has an unsatisfiable body and is dropped."""
        if not self.functionality_applies(clause, i, j):
            raise RuleError("functionality rule not applicable")
        a, b = clause.body[i], clause.body[j]
        m = self.mode(a.pred)
        theta = unify_terms([(a.args[k], b.args[k]) for k in m.outputs])
        if theta is None:
            self.ledger.record("R5", [clause], [], atoms=[str(a), str(b)], outcome="clash")
            return None
        body = [x for k, x in enumerate(clause.body) if k != j]
        new = Clause(clause.head, clause.constraint, tuple(body)).subst(theta)
        new = self._finish(new)
        self.ledger.record("R5", [clause], [new], atoms=[str(a), str(b)])
        return new

    # -- R6 ------------------------------------------------------------------

    def totality_applies(self, clause: Clause, i: int) -> bool:
        a = clause.body[i]
        m = self.signature.modes.get(a.pred)
        if m is None or not m.total:
            return False
        outs = [a.args[k] for k in m.outputs]
        if not all(isinstance(t, Var) for t in outs) or len(set(outs)) != len(outs):
            return False
        if set(outs) & set(input_vars(a, m)):
            return False
        others = set(clause.constraint.vars())
        if clause.head:
            others |= set(clause.head.vars())
        for k, b in enumerate(clause.body):
            if k != i:
                others |= set(b.vars())
        return not (set(outs) & others)

    def totality(self, clause: Clause, i: int) -> Clause:
        if not self.totality_applies(clause, i):
            raise RuleError("totality rule not applicable")
        body = tuple(a for k, a in enumerate(clause.body) if k != i)
        new = self._finish(Clause(clause.head, clause.constraint, body))
        self.ledger.record("R6", [clause], [new], atom=str(clause.body[i]))
        return new

    # -- R7 ------------------------------------------------------------------

    def diff_replace(
        self, clause: Clause, f_positions: Sequence[int], d: Definition, theta: Subst
    ) -> tuple[Clause, Subst]:
        """Replace F(X;Y) in ``clause`` by R(V;W), diff(Z).

        ``theta`` renames ``d`` so that part of its body is the F conjunction;
        variables it leaves unbound are renamed apart. Returns the new clause
        and the completed renaming."""
        theta = dict(theta)
        for v in d.clause.vars():
            if v not in theta:
                theta[v] = self.fresh.var(v)
        images = list(theta.values())
        if not all(isinstance(t, Var) for t in images) or len(set(images)) != len(images):
            raise RuleError("difference definition must be used up to renaming")
        f_atoms = [clause.body[p] for p in f_positions]
        body = [a.subst(theta) for a in d.body]
        r_atoms = list(body)
        for fa in f_atoms:
            if fa not in r_atoms:
                raise RuleError(f"{fa} does not occur in the difference definition")
            r_atoms.remove(fa)
        f_io = self.is_total_functional(f_atoms)
        r_io = self.is_total_functional(r_atoms)
        if f_io is None or r_io is None:
            raise RuleError("replaced and replacing conjunctions must be total and functional")
        x, y = f_io
        v_in, w = r_io
        if set(w) & set(clause.vars()):
            raise RuleError("outputs of the replacing conjunction must be fresh")
        dtheta = substitute_constraint(d.constraint, theta)
        if not linear.entails(clause.constraint, dtheta, self.ceiling):
            raise RuleError("clause constraint does not entail the difference constraint")
        if not self.levels.add(level_gt(clause.head.pred if clause.head else None, d.pred)):
            raise RuleError("level condition for differential replacement fails")
        first = min(f_positions)
        rest = [a for i, a in enumerate(clause.body) if i not in f_positions]
        new_body = [a for i, a in enumerate(clause.body) if i < first and i not in f_positions]
        new_body += r_atoms + [d.head.subst(theta)]
        new_body += [a for i, a in enumerate(clause.body) if i > first and i not in f_positions]
        new = self._finish(Clause(clause.head, clause.constraint, tuple(new_body)))
        self.ledger.record("R7", [clause], [new], definition=d.clause.cid, pred=d.pred)
        # conditions F2 and F3 only affect completeness
        if set(y) & (set(v_in) | set(dtheta.vars())):
            self.ledger.mark(new, "condition F2 fails")
        else:
            context = set(clause.constraint.vars()) | {v for a in rest for v in a.vars()}
            if clause.head:
                context |= set(clause.head.vars())
            if set(adt_vars_of(y)) & context:
                self.ledger.mark(new, "condition F3 fails")
        return new, theta

    # -- queries used by the algorithm ------------------------------------

    def is_head_instance(self, clause: Clause, pos: int) -> bool:
        atom = clause.body[pos]
        m = self.signature.modes.get(atom.pred)
        if m is None:
            return False
        xs = input_vars(atom, m)
        for k in self.ds.get(atom.pred, []):
            kr = rename_apart(k, self.fresh)
            theta = unify_terms(zip(atom.args, kr.head.args))
            if theta is None:
                continue
            c = substitute_constraint(clause.constraint & kr.constraint, theta)
            if linear.is_satisfiable(c, self.ceiling) is Sat.UNSAT:
                continue
            images = [apply(x, theta) for x in xs]
            if not all(isinstance(t, Var) for t in images) or len(set(images)) != len(images):
                return False
        return True

    def is_descending(self, pred: str) -> bool:
        if pred not in self._descending:
            self._descending[pred] = self._compute_descending(pred)
        return self._descending[pred]

    def _compute_descending(self, pred: str) -> bool:
        m = self.signature.modes.get(pred)
        if m is None:
            return False
        for k in self.ds.get(pred, []):
            head_in = [k.head.args[i] for i in m.inputs]
            for a in k.body:
                if a.pred != pred and pred not in self._deps.get(a.pred, set()):
                    continue
                ma = self.signature.modes.get(a.pred)
                if ma is None:
                    return False
                if not tuple_precedes([a.args[i] for i in ma.inputs], head_in):
                    return False
        return True

    def audit_condition_u(self) -> None:
        """Every definition used for folding must have been unfolded with
        respect to an atom of its own level."""
        for pred in self.ledger.folded_with:
            if pred not in self.ledger.unfolded_at_level:
                raise ConditionUViolation(
                    f"definition {pred} was used for folding but never unfolded"
                )


def adt_vars_of(vs: Iterable[Var]) -> tuple[Var, ...]:
    return tuple(v for v in vs if not v.sort.is_basic)
