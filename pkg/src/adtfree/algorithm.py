"""The ADT removal loop: define/fold, unfold and replace until no clause
with ADT arguments is left."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

from . import linear
from .clauses import (
    Atom,
    Clause,
    ClauseSet,
    Mode,
    atomwise_subsumes,
    bvars,
    input_vars,
    is_connected,
    match_conj,
    sharing_block_indices,
    source_indices,
    source_vars,
    substitute_constraint,
    variant_renaming,
)
from .rules import (
    DefKind,
    Definition,
    Transformer,
    level_eq,
    level_ge,
    level_gt,
)
from .terms import Subst, Var, apply, unique


@dataclass(frozen=True)
class Config:
    max_iterations: int = 100
    fm_atom_ceiling: int = linear.DEFAULT_CEILING
    use_diff: bool = True
    max_unfold_steps: int = 2000


class RunStatus(enum.Enum):
    TRANSFORMED = "transformed"
    ITERATION_LIMIT = "iteration limit"
    LEVEL_UNSAT = "level constraints unsatisfiable"


class UnfoldLimit(Exception):
    pass


@dataclass
class RunResult:
    status: RunStatus
    transformer: Transformer
    iterations: int
    clauses: ClauseSet | None = None
    reason: str = ""

    @property
    def ledger(self):
        return self.transformer.ledger

    @property
    def definitions(self) -> list[Definition]:
        return self.transformer.defs

    @property
    def marked(self) -> frozenset[int]:
        return self.clauses.marked if self.clauses else frozenset()


def _shift_marks(marks: set[int], pos: int, width: int) -> set[int]:
    return {m if m < pos else m - 1 + width for m in marks if m != pos}


@dataclass
class _DiffCandidate:
    key: tuple
    definition: Definition
    m_idx: list[int]
    f_idx: list[int]
    subset: tuple[int, ...]
    theta: Subst


class AlgorithmR:
    def __init__(self, problem: ClauseSet, config: Config = Config()):
        self.config = config
        self.t = Transformer(problem, config.fm_atom_ceiling)
        self.pulled: set[str] = set()

    @property
    def sig(self):
        return self.t.signature

    # -- main loop -----------------------------------------------------------

    def run(self) -> RunResult:
        t = self.t
        in_cls = list(t.problem.goals())
        transf: list[Clause] = []
        iterations = 0
        while in_cls:
            if iterations >= self.config.max_iterations:
                return RunResult(RunStatus.ITERATION_LIMIT, t, iterations,
                                 reason="transformation did not terminate")
            iterations += 1
            new_defs, fld = self.diff_define_fold(in_cls)
            transf.extend(fld)
            try:
                unf = self.unfold_proc(new_defs)
            except UnfoldLimit:
                return RunResult(RunStatus.ITERATION_LIMIT, t, iterations,
                                 reason="transformation did not terminate")
            in_cls = self.replace_proc(unf)
        if not t.levels.satisfiable():
            return RunResult(RunStatus.LEVEL_UNSAT, t, iterations,
                             reason="level constraints are unsatisfiable")
        t.audit_condition_u()
        marked = frozenset(c.cid for c in transf if c.cid in t.ledger.marked)
        out = ClauseSet(t.signature, tuple(transf), marked)
        return RunResult(RunStatus.TRANSFORMED, t, iterations, out)

    def _pull_input_clauses(self, c: Clause) -> list[Clause]:
        """Input clauses for the input predicates that an output clause calls."""
        out = []
        for a in c.body:
            if a.pred in self.t.ds and a.pred not in self.pulled:
                self.pulled.add(a.pred)
                out.extend(self.t.ds[a.pred])
        return out

    # -- Diff-Define-Fold ------------------------------------------------------

    def diff_define_fold(self, in_cls: list[Clause]) -> tuple[list[Definition], list[Clause]]:
        new_defs: list[Definition] = []
        fld: list[Clause] = []
        work = list(in_cls)
        while work:
            c = work.pop(0)
            if c.has_basic_types():
                fld.append(c)
                work.extend(self._pull_input_clauses(c))
            else:
                work.insert(0, self.define_fold_block(c, new_defs))
        return new_defs, fld

    def define_fold_block(self, c: Clause, new_defs: list[Definition]) -> Clause:
        bidx = next(
            b for b in sharing_block_indices(c.body)
            if any(not c.body[i].has_basic_types() for i in b)
        )
        block = [c.body[i] for i in bidx]
        head = c.head.pred if c.head else None
        t = self.t
        full = [
            (d, [bidx[j] for j in tpos], theta)
            for d in reversed(t.defs) if len(d.body) == len(block)
            for tpos, theta in match_conj(d.body, block)
        ]
        full = [m for m in full if t.levels.check(level_ge(head, m[0].pred))]
        for d, positions, theta in full:
            if linear.entails(c.constraint, substitute_constraint(d.constraint, theta), t.ceiling):
                return t.fold(c, positions, d, theta)
        if full:
            d, positions, theta = full[0]
            gd, theta2 = self._generalized(d, theta, c, new_defs)
            return t.fold(c, positions, gd, theta2)
        if self.config.use_diff:
            cand = self._best_diff_candidate(c, bidx)
            if cand is not None:
                return self._diff_introduce(c, cand, new_defs)
        return self._project(c, bidx, new_defs)

    def _reuse(self, candidate: Clause) -> tuple[Definition, dict[Var, Var]] | None:
        for d in reversed(self.t.defs):
            ren = variant_renaming(d.clause, candidate, ignore_head_pred=True)
            if ren is not None:
                return d, ren
        return None

    def _introduce(self, head_vars, constraint, body, kind: DefKind, mode: Mode,
                   new_defs: list[Definition]) -> tuple[Definition, Subst]:
        """Introduce a definition, or reuse a variant of an existing one.

        The returned substitution maps the definition's variables onto
        ``head_vars`` and ``body``."""
        candidate = Clause(Atom("_", tuple(head_vars)), constraint, tuple(body))
        found = self._reuse(candidate)
        if found is not None:
            return found[0], dict(found[1])
        d = self.t.define(head_vars, constraint, body, kind, mode)
        new_defs.append(d)
        return d, {v: v for v in d.clause.vars()}

    def _generalized(self, d: Definition, theta: Subst, c: Clause,
                     new_defs: list[Definition]) -> tuple[Definition, Subst]:
        alpha = linear.widen(substitute_constraint(d.constraint, theta), c.constraint, self.t.ceiling)
        back = {apply(v, theta): v for v in d.clause.vars() if v.sort.is_basic and v in theta}
        alpha = alpha.substitute(back)
        gd, ren = self._introduce(d.head.args, alpha, d.body, DefKind.GENERALIZE,
                                  self.sig.mode(d.pred), new_defs)
        return gd, {v: apply(ren[v], theta) for v in gd.clause.vars()}

    def _project(self, c: Clause, bidx: list[int], new_defs: list[Definition]) -> Clause:
        block = [c.body[i] for i in bidx]
        z = unique(
            v for a in block for v in input_vars(a, self.sig.mode(a.pred)) if v.sort.is_basic
        )
        u = bvars(block)
        mode = Mode(tuple(i for i, v in enumerate(u) if v in z),
                    tuple(i for i, v in enumerate(u) if v not in z))
        d, theta = self._introduce(u, linear.project(c.constraint, z, self.t.ceiling), block,
                                   DefKind.PROJECT, mode, new_defs)
        return self.t.fold(c, bidx, d, theta)

    # -- Diff-Introduce ------------------------------------------------------

    def _best_diff_candidate(self, c: Clause, bidx: list[int]) -> _DiffCandidate | None:
        block = [c.body[i] for i in bidx]
        head = c.head.pred if c.head else None
        t = self.t
        best: _DiffCandidate | None = None
        for rank, d in enumerate(reversed(t.defs)):
            if atomwise_subsumes(d.body, block) is None:
                continue
            n = len(d.body)
            for size in range(min(n, len(block) - 1), 0, -1):
                if best is not None and size < -best.key[0]:
                    break
                for subset in itertools.combinations(range(n), size):
                    pats = [d.body[k] for k in subset]
                    for tpos, theta in match_conj(pats, block):
                        m_idx = sorted(bidx[j] for j in tpos)
                        cand = self._check_candidate(c, bidx, d, subset, m_idx, theta, head)
                        if cand is None:
                            continue
                        cand.key = (-size, rank, m_idx)
                        if best is None or cand.key < best.key:
                            best = cand
        return best

    def _check_candidate(self, c, bidx, d, subset, m_idx, theta, head) -> _DiffCandidate | None:
        t = self.t
        m_atoms = [c.body[i] for i in m_idx]
        if not is_connected(m_atoms):
            return None
        f_idx = [i for i in bidx if i not in m_idx]
        f_atoms = [c.body[i] for i in f_idx]
        if not f_atoms or t.is_total_functional(f_atoms) is None:
            return None
        # unmatched variables of R get placeholder names until committed
        clause_vars = set(c.vars())
        ren = dict(theta)
        for v in d.clause.vars():
            if v not in ren:
                ren[v] = Var(f"?{v.name}", v.sort)
        r_atoms = [d.body[k].subst(ren) for k in range(len(d.body)) if k not in subset]
        r_io = t.is_total_functional(r_atoms)
        if r_io is None or set(r_io[1]) & clause_vars:
            return None
        cons = level_ge(head, d.pred)
        for a in f_atoms + r_atoms:
            cons += level_gt(head, a.pred)
        if not t.levels.check(cons):
            return None
        return _DiffCandidate((), d, m_idx, f_idx, subset, theta)

    def _diff_introduce(self, c: Clause, cand: _DiffCandidate, new_defs: list[Definition]) -> Clause:
        t = self.t
        d = cand.definition
        theta = dict(cand.theta)
        for v in d.clause.vars():
            if v not in theta:
                theta[v] = t.fresh.var(v)
        f_atoms = [c.body[i] for i in cand.f_idx]
        r_atoms = [d.body[k].subst(theta) for k in range(len(d.body)) if k not in cand.subset]
        x, y = t.is_total_functional(f_atoms)
        v_in, w = t.is_total_functional(r_atoms)
        t_b = unique(v for v in list(x) + list(v_in) if v.sort.is_basic)
        w_b = tuple(v for v in w if v.sort.is_basic and v not in t_b)
        y_b = tuple(v for v in y if v.sort.is_basic and v not in t_b and v not in w_b)
        z = t_b + w_b + y_b
        mode = Mode(tuple(range(len(t_b) + len(w_b))),
                    tuple(range(len(t_b) + len(w_b), len(z))))
        x_b = [v for v in x if v.sort.is_basic]
        dhat, dtheta = self._introduce(z, linear.project(c.constraint, x_b, t.ceiling),
                                       f_atoms + r_atoms, DefKind.DIFF, mode, new_defs)
        c1, _ = t.diff_replace(c, cand.f_idx, dhat, dtheta)
        targets = [a.subst(theta) for a in d.body]
        positions: list[int] = []
        for a in targets:
            positions.append(next(
                j for j, b in enumerate(c1.body) if b == a and j not in positions
            ))
        if linear.entails(c.constraint, substitute_constraint(d.constraint, theta), t.ceiling):
            return t.fold(c1, positions, d, theta)
        gd, theta2 = self._generalized(d, theta, c1, new_defs)
        return t.fold(c1, positions, gd, theta2)

    # -- Unfold ----------------------------------------------------------------

    def unfold_proc(self, new_defs: list[Definition]) -> list[Clause]:
        out: list[Clause] = []
        for d in new_defs:
            out.extend(self._unfold_definition(d))
        return out

    def _phase1_atoms(self, d: Definition) -> list[int]:
        t = self.t
        body = d.body
        chosen = None
        for i, a in enumerate(body):
            cons = level_eq(d.pred, a.pred)
            for b in body:
                cons += level_ge(a.pred, b.pred)
            if t.levels.check(cons):
                t.levels.add(cons)
                chosen = i
                break
        if chosen is None:
            chosen = 0
        picked = [chosen]
        covered = set(body[chosen].vars())
        wanted = set(source_vars(body, self.sig))
        for i in source_indices(body, self.sig):
            if wanted <= covered:
                break
            if i not in picked and set(body[i].vars()) & (wanted - covered):
                picked.append(i)
                covered |= set(body[i].vars())
        return picked

    def _unfold_definition(self, d: Definition) -> list[Clause]:
        t = self.t
        steps = 0
        picked = self._phase1_atoms(d)
        first = picked[0]
        clauses: list[tuple[Clause, set[int]]] = [
            (c, _shift_marks(set(picked), first, len(r)))
            for c, r in t.unfold_with_positions(d.clause, first)
        ]
        # phase 1: unfold every marked atom
        while True:
            idx = next((k for k, (_, m) in enumerate(clauses) if m), None)
            if idx is None:
                break
            c, marks = clauses[idx]
            pos = min(marks)
            steps += 1
            if steps > self.config.max_unfold_steps:
                raise UnfoldLimit()
            clauses[idx:idx + 1] = [
                (c2, _shift_marks(marks, pos, len(r))) for c2, r in t.unfold_with_positions(c, pos)
            ]
        # phase 2: head-instances that are marked or descending
        clauses = [(c, set(range(len(c.body)))) for c, _ in clauses]
        while True:
            target = None
            for k, (c, marks) in enumerate(clauses):
                for pos, a in enumerate(c.body):
                    if (pos in marks or t.is_descending(a.pred)) and t.is_head_instance(c, pos):
                        target = (k, pos)
                        break
                if target:
                    break
            if target is None:
                break
            k, pos = target
            c, marks = clauses[k]
            steps += 1
            if steps > self.config.max_unfold_steps:
                raise UnfoldLimit()
            clauses[k:k + 1] = [
                (c2, _shift_marks(marks, pos, len(r))) for c2, r in t.unfold_with_positions(c, pos)
            ]
        return [c for c, _ in clauses]

    # -- Replace -----------------------------------------------------------------

    def replace_proc(self, cls: list[Clause]) -> list[Clause]:
        t = self.t
        cls = list(cls)
        while True:
            k = next((k for k, c in enumerate(cls) if t.delete(c)), None)
            if k is not None:
                del cls[k]
                continue
            hit = None
            for k, c in enumerate(cls):
                pair = next(
                    ((i, j) for i in range(len(c.body)) for j in range(i + 1, len(c.body))
                     if t.functionality_applies(c, i, j)),
                    None,
                )
                if pair:
                    hit = (k, pair)
                    break
            if hit:
                k, (i, j) = hit
                new = t.functionality(cls[k], i, j)
                cls[k:k + 1] = [new] if new is not None else []
                continue
            hit = None
            for k, c in enumerate(cls):
                i = next((i for i in range(len(c.body)) if t.totality_applies(c, i)), None)
                if i is not None:
                    hit = (k, i)
                    break
            if hit:
                k, i = hit
                cls[k] = t.totality(cls[k], i)
                continue
            return cls


def run(problem: ClauseSet, config: Config = Config()) -> RunResult:
    """Run the transformation on ``problem``."""
    return AlgorithmR(problem, config).run()
