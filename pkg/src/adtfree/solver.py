"""SMT-LIB emission, external Horn solver calls and the sat/unsat/unknown decision.

Only ADT-free clause sets are emitted.  The solver is any executable that reads
an SMT-LIB 2 HORN script, either from a file given through a ``{file}``
placeholder in the command template or from standard input, and prints
``sat``, ``unsat`` or ``unknown`` on a line of its own.

Counterexamples use a simple line format: after the ``unsat`` line, every line
consisting solely of an emitted clause name (``c<id>``) is one node of the
refutation.  Solvers that print nothing of the sort give no counterexample, and
the decision procedure then assumes every clause took part.
"""

from __future__ import annotations

import enum
import os
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import linear
from .algorithm import Config, RunResult, RunStatus, run
from .clauses import Atom, Clause, ClauseSet, ModelError
from .linear import LinAtom, Rel
from .rules import DefKind
from .terms import BOOL, INT, FreshNames, Var

_RESERVED = {
    "and", "or", "not", "xor", "ite", "true", "false", "forall", "exists", "let",
    "assert", "distinct", "declare-fun", "check-sat", "div", "mod", "abs", "par",
    "as", "_", "!",
}
_SIMPLE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class EmitError(ModelError):
    pass


class Answer(str, enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"
    ERROR = "error"


@dataclass(frozen=True)
class SolverVerdict:
    answer: Answer
    model: str = ""
    cex: tuple[int, ...] | None = None
    message: str = ""


@dataclass(frozen=True)
class Solver:
    """A command template plus a wall-clock limit in seconds."""

    command: str
    timeout: float = 300.0


# -- emission ------------------------------------------------------------------


class Mangler:
    """Deterministic renaming of predicates and variables into [A-Za-z0-9_]."""

    def __init__(self, prefix: str):
        self.prefix = prefix
        self.table: dict[str, str] = {}
        self.used: set[str] = set()

    def __call__(self, name: str) -> str:
        if name in self.table:
            return self.table[name]
        out = name
        if not _SIMPLE.match(name) or name in _RESERVED:
            out = self.prefix + re.sub(r"[^A-Za-z0-9_]", "_", name)
        base, k = out, 1
        while out in self.used:
            out = f"{base}_{k}"
            k += 1
        self.table[name] = out
        self.used.add(out)
        return out


def _num(k: int) -> str:
    return str(k) if k >= 0 else f"(- {-k})"


def _sort(s) -> str:
    if s == INT:
        return "Int"
    if s == BOOL:
        return "Bool"
    raise EmitError(f"cannot emit sort {s.name}")


def _arith(v: Var, names: Mangler) -> str:
    if v.sort == BOOL:
        return f"(ite {names(v.name)} 1 0)"
    return names(v.name)


def _lin_atom(a: LinAtom, names: Mangler) -> str:
    terms = []
    for v, c in a.coeffs:
        x = _arith(v, names)
        terms.append(x if c == 1 else f"(* {_num(c)} {x})")
    lhs = terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})" if terms else "0"
    rhs = _num(-a.const)
    if a.rel is Rel.LE:
        return f"(<= {lhs} {rhs})"
    if a.rel is Rel.EQ:
        return f"(= {lhs} {rhs})"
    return f"(not (= {lhs} {rhs}))"


def _pred_atom(a: Atom, preds: Mangler, names: Mangler) -> str:
    if not a.args:
        return preds(a.pred)
    return f"({preds(a.pred)} {' '.join(names(v.name) for v in a.args)})"


def clause_name(c: Clause) -> str:
    return f"c{c.cid}"


def emit_clause(c: Clause, preds: Mangler, names: Mangler) -> str:
    if not c.has_basic_types():
        raise EmitError(f"clause {c.cid} has ADT-typed arguments")
    for a in c.atoms():
        if any(not isinstance(t, Var) for t in a.args):
            raise EmitError(f"clause {c.cid} is not in normal form")
    parts = [_lin_atom(a, names) for a in c.constraint.atoms]
    parts += [_pred_atom(a, preds, names) for a in c.body]
    if not parts:
        body = "true"
    elif len(parts) == 1:
        body = parts[0]
    else:
        body = f"(and {' '.join(parts)})"
    head = "false" if c.head is None else _pred_atom(c.head, preds, names)
    vs = sorted(c.vars(), key=lambda v: v.name)
    if not vs:
        return f"(assert (=> {body} {head}))"
    binders = " ".join(f"({names(v.name)} {_sort(v.sort)})" for v in vs)
    return f"(assert (forall ({binders}) (=> {body} {head})))"


def emit_smtlib(cls: ClauseSet, get_model: bool = False) -> str:
    preds = Mangler("p_")
    names = Mangler("v_")
    used = sorted({a.pred for c in cls.clauses for a in c.atoms()})
    lines = ["(set-logic HORN)"]
    for p in used:
        sorts = cls.signature.preds.get(p)
        if sorts is None:
            raise EmitError(f"undeclared predicate {p}")
        lines.append(f"(declare-fun {preds(p)} ({' '.join(_sort(s) for s in sorts)}) Bool)")
    for c in cls.clauses:
        lines.append(f"; clause {clause_name(c)}")
        lines.append(emit_clause(c, preds, names))
    renamed = [(k, v) for k, v in preds.table.items() if k != v]
    renamed += [(k, v) for k, v in names.table.items() if k != v]
    for k, v in renamed:
        lines.append(f"; mangled {k} -> {v}")
    lines.append("(check-sat)")
    if get_model:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# -- solving -------------------------------------------------------------------


def parse_clause_lines(lines: Sequence[str]) -> tuple[int, ...] | None:
    """Default counterexample parser: one ``c<id>`` per line after the verdict."""
    ids = []
    for ln in lines:
        m = re.fullmatch(r"c(\d+)", ln.strip())
        if m:
            ids.append(int(m.group(1)))
    return tuple(ids) if ids else None


CexParser = Callable[[Sequence[str]], "tuple[int, ...] | None"]


def solve(
    script: str,
    solver: Solver,
    cex_parser: CexParser = parse_clause_lines,
) -> SolverVerdict:
    argv = shlex.split(solver.command)
    if not argv:
        return SolverVerdict(Answer.ERROR, message="empty solver command")
    path = None
    stdin = None
    if any("{file}" in a for a in argv):
        fd, path = tempfile.mkstemp(suffix=".smt2", prefix="adtfree_")
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(script)
        argv = [a.replace("{file}", path) for a in argv]
    else:
        stdin = script
    try:
        proc = subprocess.run(
            argv, input=stdin, capture_output=True, text=True, timeout=solver.timeout
        )
    except subprocess.TimeoutExpired:
        return SolverVerdict(Answer.TIMEOUT, message=f"no answer within {solver.timeout}s")
    except OSError as e:
        return SolverVerdict(Answer.ERROR, message=f"cannot run solver: {e}")
    finally:
        if path:
            os.unlink(path)
    lines = proc.stdout.splitlines()
    for i, ln in enumerate(lines):
        tok = ln.strip()
        if tok == "sat":
            return SolverVerdict(Answer.SAT, model="\n".join(lines[i + 1:]))
        if tok == "unsat":
            return SolverVerdict(Answer.UNSAT, cex=cex_parser(lines[i + 1:]))
        if tok == "unknown":
            return SolverVerdict(Answer.UNKNOWN)
    if proc.returncode < 0:
        return SolverVerdict(Answer.ERROR, message=f"solver killed by signal {-proc.returncode}")
    msg = (proc.stderr or proc.stdout).strip().splitlines()
    return SolverVerdict(Answer.ERROR, message=msg[-1] if msg else f"exit status {proc.returncode}")


# -- functionality of difference predicates -------------------------------------


class F1(str, enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


def _closure(preds: Iterable[str], by_pred: dict[str, list[Clause]]) -> set[str]:
    seen: set[str] = set()
    todo = list(preds)
    while todo:
        p = todo.pop()
        if p in seen:
            continue
        seen.add(p)
        for c in by_pred.get(p, ()):
            todo.extend(a.pred for a in c.body)
    return seen


def fun_diff_goals(pred: str, pn: ClauseSet, fresh: FreshNames) -> list[Clause]:
    """``false :- Yk != Zk, d(I,Y), d(I,Z)``, one goal per output position k."""
    sorts = pn.signature.preds[pred]
    mode = pn.signature.mode(pred)
    ins = {i: fresh.var(f"I{i}", sorts[i]) for i in mode.inputs}
    ys = {o: fresh.var(f"Y{o}", sorts[o]) for o in mode.outputs}
    zs = {o: fresh.var(f"Z{o}", sorts[o]) for o in mode.outputs}
    a1 = Atom(pred, tuple(ins.get(i, ys.get(i)) for i in range(len(sorts))))
    a2 = Atom(pred, tuple(ins.get(i, zs.get(i)) for i in range(len(sorts))))
    return [
        Clause(None, linear.conj(linear.ne(ys[o], zs[o])), (a1, a2))
        for o in mode.outputs
    ]


def f1_script(diffs: Iterable[str], pn: ClauseSet) -> tuple[str, ClauseSet]:
    diffs = sorted(set(diffs))
    defining = _closure(diffs, pn.by_pred())
    dn = [c for c in pn.definite() if c.head.pred in defining]
    fresh = FreshNames()
    for c in pn.clauses:
        fresh.reserve(v.name for v in c.vars())
    top = max((c.cid for c in pn.clauses), default=0)
    goals = []
    for d in diffs:
        for g in fun_diff_goals(d, pn, fresh):
            top += 1
            goals.append(g.with_id(top))
    cs = ClauseSet(pn.signature, tuple(dn + goals))
    return emit_smtlib(cs), cs


def check_f1(diffs: Iterable[str], pn: ClauseSet, solver: Solver) -> F1:
    diffs = set(diffs)
    if not diffs:
        return F1.HOLDS
    script, _ = f1_script(diffs, pn)
    v = solve(script, solver)
    if v.answer is Answer.SAT:
        return F1.HOLDS
    if v.answer is Answer.UNSAT:
        return F1.FAILS
    return F1.UNKNOWN


# -- decision --------------------------------------------------------------------


@dataclass(frozen=True)
class Decision:
    answer: Answer
    reason: str = ""
    result: RunResult | None = field(default=None, compare=False, repr=False)
    script: str | None = field(default=None, compare=False, repr=False)
    verdict: SolverVerdict | None = field(default=None, compare=False)

    def __str__(self) -> str:
        if self.answer is Answer.UNKNOWN:
            return f"unknown: {self.reason}"
        return self.answer.value


def _unknown(reason: str, **kw) -> Decision:
    return Decision(Answer.UNKNOWN, reason, **kw)


def diff_predicates(result: RunResult) -> set[str]:
    return {d.pred for d in result.definitions if d.kind is DefKind.DIFF}


def conclude(result: RunResult, solver: Solver | None) -> Decision:
    if result.status is not RunStatus.TRANSFORMED:
        return _unknown(result.reason or result.status.value, result=result)
    pn = result.clauses
    try:
        script = emit_smtlib(pn)
    except EmitError as e:
        return _unknown(f"cannot emit clauses: {e}", result=result)
    if solver is None:
        return _unknown("no solver configured", result=result, script=script)
    v = solve(script + "(get-model)\n", solver)
    kw = dict(result=result, script=script, verdict=v)
    if v.answer is Answer.SAT:
        return Decision(Answer.SAT, **kw)
    if v.answer is not Answer.UNSAT:
        return _unknown(f"solver answered {v.answer.value}" + (f" ({v.message})" if v.message else ""), **kw)

    emitted = {c.cid: c for c in pn.clauses}
    if v.cex is None:
        used = list(emitted.values())
    else:
        used = [emitted[i] for i in v.cex if i in emitted]
    if any(c.cid in pn.marked for c in used):
        return _unknown("a marked clause may take part in the refutation", **kw)
    diffs = diff_predicates(result) & {a.pred for c in used for a in c.atoms()}
    if v.cex is None:
        diffs = diff_predicates(result) & {a.pred for c in pn.clauses for a in c.atoms()}
    f1 = check_f1(diffs, pn, solver)
    if f1 is F1.HOLDS:
        return Decision(Answer.UNSAT, **kw)
    if f1 is F1.FAILS:
        return _unknown("a difference predicate is not functional", **kw)
    return _unknown("functionality of difference predicates not established", **kw)


def decide(problem: ClauseSet, config: Config = Config(), solver: Solver | None = None) -> Decision:
    return conclude(run(problem, config), solver)
