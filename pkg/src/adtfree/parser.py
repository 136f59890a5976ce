"""Reader and printer for the Prolog-like problem dialect.

A problem file holds directives and clauses::

    :- adt list = nil | cons(int, list).
    :- pred len(list, int).
    :- mode len(in, out).
    :- total_functional len/2.
    len([], N) :- N = 0.
    len([X|Xs], N1) :- N1 = N0 + 1, len(Xs, N0).
    false :- N < 0, len(Xs, N).

Comments start with ``%`` and run to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from . import linear
from .clauses import Atom, Clause, ClauseSet, Mode, Signature, format_clause, normalize
from .linear import LinExpr
from .terms import BOOL, INT, AdtDecl, App, Const, Constructor, FreshNames, Sort, Term, Var


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


@dataclass
class ProblemFile:
    clause_set: ClauseSet
    expect: str | None = None
    names: dict[str, Any] = field(default_factory=dict)

    @property
    def signature(self) -> Signature:
        return self.clause_set.signature

    @property
    def clauses(self) -> tuple[Clause, ...]:
        return self.clause_set.clauses


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<op>:-|=\\=|=<|>=|[=<>()\[\]|,.+\-*/])
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<int>\d+)
    """,
    re.VERBOSE,
)

RELOPS = ("=", "=\\=", "<", "=<", ">", ">=")


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(Tok(kind, m.group(), line, pos - line_start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


# Untyped syntax trees: ("var", name), ("int", n), ("app", name, args),
# ("list", items, tail), ("arith", op, lhs, rhs), ("neg", e).
# Every node carries its token as the last element for error positions.


class _Reader:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: Tok | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def next(self) -> Tok:
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if not (self.tok.kind == "op" and self.tok.text == text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    def name(self) -> Tok:
        if self.tok.kind != "name":
            self.error(f"expected a name, found {self.tok.text or 'end of input'!r}")
        return self.next()

    # terms and arithmetic share one expression grammar
    def expr(self):
        left = self.product()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.next()
            left = ("arith", op.text, left, self.product(), op)
        return left

    def product(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text == "*":
            op = self.next()
            left = ("arith", "*", left, self.unary(), op)
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            op = self.next()
            return ("neg", self.unary(), op)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "var":
            self.next()
            return ("var", t.text, t)
        if t.kind == "int":
            self.next()
            return ("int", int(t.text), t)
        if t.kind == "name":
            self.next()
            args = []
            if self.accept("("):
                args.append(self.expr())
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
            return ("app", t.text, args, t)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("["):
            items, tail = [], None
            if not self.accept("]"):
                items.append(self.expr())
                while self.accept(","):
                    items.append(self.expr())
                if self.accept("|"):
                    tail = self.expr()
                self.expect("]")
            return ("list", items, tail, t)
        self.error(f"unexpected {t.text or 'end of input'!r}")

    def literal(self):
        left = self.expr()
        if self.tok.kind == "op" and self.tok.text in RELOPS:
            op = self.next()
            return ("rel", op.text, left, self.expr(), op)
        return left

    def items(self):
        out = []
        while self.tok.kind != "eof":
            start = self.tok
            if self.accept(":-"):
                out.append(("directive", self.directive(), start))
            else:
                out.append(("clause", self.clause(), start))
        return out

    def clause(self):
        head = self.literal()
        body = []
        if self.accept(":-"):
            body.append(self.literal())
            while self.accept(","):
                body.append(self.literal())
        self.expect(".")
        return head, body

    def directive(self):
        kw = self.name()
        if kw.text == "adt":
            name = self.name()
            self.expect("=")
            ctors = [self.ctor_decl()]
            while self.accept("|"):
                ctors.append(self.ctor_decl())
            self.expect(".")
            return ("adt", name, ctors)
        if kw.text in ("pred", "mode"):
            name = self.name()
            args = []
            if self.accept("("):
                args.append(self.name())
                while self.accept(","):
                    args.append(self.name())
                self.expect(")")
            self.expect(".")
            return (kw.text, name, args)
        if kw.text in ("total_functional", "total", "functional"):
            name = self.name()
            self.expect("/")
            if self.tok.kind != "int":
                self.error("expected an arity")
            arity = int(self.next().text)
            self.expect(".")
            return (kw.text, name, arity)
        if kw.text == "expect":
            verdict = self.name()
            if verdict.text not in ("sat", "unsat"):
                self.error("expected sat or unsat", verdict)
            self.expect(".")
            return ("expect", verdict)
        self.error(f"unknown directive {kw.text!r}", kw)

    def ctor_decl(self):
        name = self.name()
        args = []
        if self.accept("("):
            args.append(self.name())
            while self.accept(","):
                args.append(self.name())
            self.expect(")")
        return name, args


def _pos(node) -> Tok:
    return node[-1]


class _Builder:
    def __init__(self):
        self.sorts: dict[str, Sort] = {"int": INT, "bool": BOOL}
        self.adts: dict[str, AdtDecl] = {}
        self.ctors: dict[str, Constructor] = {}
        self.preds: dict[str, tuple[Sort, ...]] = {}
        self.modes: dict[str, Mode] = {}
        self.expect: str | None = None

    def sort(self, tok: Tok) -> Sort:
        s = self.sorts.get(tok.text)
        if s is None:
            raise ParseError(f"unknown type {tok.text!r}", tok.line, tok.col)
        return s

    def declare(self, directives) -> None:
        adts = [d for d, _ in directives if d[0] == "adt"]
        for _, name, _ in adts:
            if name.text in self.sorts:
                raise ParseError(f"type {name.text!r} declared twice", name.line, name.col)
            self.sorts[name.text] = Sort(name.text)
        for _, name, ctors in adts:
            sort = self.sorts[name.text]
            built = []
            for cname, args in ctors:
                if cname.text in self.ctors:
                    raise ParseError(f"constructor {cname.text!r} declared twice", cname.line, cname.col)
                c = Constructor(cname.text, tuple(self.sort(a) for a in args), sort)
                self.ctors[c.name] = c
                built.append(c)
            decl = AdtDecl(sort, tuple(built))
            if not decl.is_well_founded():
                raise ParseError(f"type {name.text!r} has no base constructor", name.line, name.col)
            self.adts[name.text] = decl
        flags: dict[str, set[str]] = {}
        raw_modes = {}
        for d, tok in directives:
            kind = d[0]
            if kind == "pred":
                _, name, args = d
                if name.text in self.preds:
                    raise ParseError(f"predicate {name.text!r} declared twice", name.line, name.col)
                self.preds[name.text] = tuple(self.sort(a) for a in args)
            elif kind == "mode":
                _, name, args = d
                if name.text in raw_modes:
                    raise ParseError(f"conflicting modes for {name.text!r}", name.line, name.col)
                for a in args:
                    if a.text not in ("in", "out"):
                        raise ParseError("mode arguments must be in or out", a.line, a.col)
                raw_modes[name.text] = (name, [a.text for a in args])
            elif kind in ("total_functional", "total", "functional"):
                _, name, arity = d
                flags.setdefault(name.text, set()).update(
                    ("total", "functional") if kind == "total_functional" else (kind,)
                )
            elif kind == "expect":
                self.expect = d[1].text
        for pname, (tok, args) in raw_modes.items():
            sorts = self.preds.get(pname)
            if sorts is None:
                raise ParseError(f"mode for undeclared predicate {pname!r}", tok.line, tok.col)
            if len(sorts) != len(args):
                raise ParseError(f"mode arity mismatch for {pname!r}", tok.line, tok.col)
            f = flags.get(pname, set())
            self.modes[pname] = Mode(
                tuple(i for i, a in enumerate(args) if a == "in"),
                tuple(i for i, a in enumerate(args) if a == "out"),
                "total" in f,
                "functional" in f,
            )
        for pname in flags:
            if pname not in self.modes:
                raise ParseError(f"totality declared for {pname!r} without a mode", 1, 1)

    # -- clauses -----------------------------------------------------------

    def clause(self, head, body, cid: int) -> Clause:
        env: dict[str, Var] = {}
        fresh = FreshNames()
        extra: list = []
        anon = [0]

        def var(node, sort: Sort) -> Var:
            name = node[1]
            if name == "_":
                anon[0] += 1
                name = f"_G{anon[0]}"
            v = env.get(name)
            if v is None:
                v = env[name] = Var(name, sort)
            elif v.sort != sort:
                t = _pos(node)
                raise ParseError(f"variable {name} used as {v.sort} and {sort}", t.line, t.col)
            return v

        def term(node, sort: Sort) -> Term:
            kind = node[0]
            t = _pos(node)
            if kind == "var":
                return var(node, sort)
            if sort.is_basic:
                if kind == "app" and node[1] in ("true", "false") and not node[2] and sort == BOOL:
                    return Const(node[1] == "true", BOOL)
                if kind == "int" and sort == INT:
                    return Const(node[1], INT)
                if kind in ("arith", "neg") and sort == INT:
                    v = Var(fresh.name("E"), INT)
                    extra.append(linear.eq(v, arith(node)))
                    return v
                raise ParseError(f"expected a term of type {sort}", t.line, t.col)
            if kind == "list":
                nil, cons = self.ctors.get("nil"), self.ctors.get("cons")
                if nil is None or cons is None or nil.sort != sort or cons.sort != sort:
                    raise ParseError(f"list notation used for type {sort}", t.line, t.col)
                tail = term(node[2], sort) if node[2] is not None else App(nil)
                for item in reversed(node[1]):
                    tail = App(cons, (term(item, cons.arg_sorts[0]), tail))
                return tail
            if kind == "app":
                c = self.ctors.get(node[1])
                if c is None:
                    raise ParseError(f"unknown constructor {node[1]!r}", t.line, t.col)
                if c.sort != sort:
                    raise ParseError(f"constructor {c.name} builds {c.sort}, expected {sort}", t.line, t.col)
                if len(node[2]) != c.arity:
                    raise ParseError(f"constructor {c.name} expects {c.arity} arguments", t.line, t.col)
                return App(c, tuple(term(a, s) for a, s in zip(node[2], c.arg_sorts)))
            raise ParseError(f"expected a term of type {sort}", t.line, t.col)

        def atom(node) -> Atom:
            t = _pos(node)
            if node[0] != "app":
                raise ParseError("expected an atom", t.line, t.col)
            name, args = node[1], node[2]
            sorts = self.preds.get(name)
            if sorts is None:
                raise ParseError(f"undeclared predicate {name!r}", t.line, t.col)
            if len(sorts) != len(args):
                raise ParseError(f"{name} expects {len(sorts)} arguments", t.line, t.col)
            return Atom(name, tuple(term(a, s) for a, s in zip(args, sorts)))

        def arith(node) -> LinExpr:
            kind = node[0]
            t = _pos(node)
            if kind == "int":
                return LinExpr({}, node[1])
            if kind == "var":
                v = env.get(node[1])
                if v is None:
                    v = env[node[1]] = Var(node[1], INT)
                if not v.sort.is_basic:
                    raise ParseError(f"ADT variable {v.name} in arithmetic", t.line, t.col)
                return LinExpr({v: 1})
            if kind == "app" and node[1] in ("true", "false") and not node[2]:
                return LinExpr({}, 1 if node[1] == "true" else 0)
            if kind == "neg":
                return -arith(node[1])
            if kind == "arith":
                a, b = arith(node[2]), arith(node[3])
                if node[1] == "+":
                    return a + b
                if node[1] == "-":
                    return a - b
                if not a.coeffs:
                    return b * a.const
                if not b.coeffs:
                    return a * b.const
                raise ParseError("nonlinear product", t.line, t.col)
            raise ParseError("expected an arithmetic expression", t.line, t.col)

        def is_bool_lit(node) -> bool:
            return node[0] == "app" and node[1] in ("true", "false") and not node[2]

        # atoms first so that variable types come from predicate signatures
        if head[0] == "rel":
            t = _pos(head)
            raise ParseError("constraint in clause head", t.line, t.col)
        h = None if head[0] == "app" and head[1] == "false" and not head[2] else atom(head)
        atoms, rels = [], []
        for lit in body:
            if lit[0] == "rel":
                rels.append(lit)
            elif lit[0] == "app" and lit[1] == "true" and not lit[2]:
                continue
            elif lit[0] == "app" and lit[1] == "false" and not lit[2]:
                extra.append(False)
            else:
                atoms.append(atom(lit))
        for _, op, lhs, rhs, _tok in rels:
            for a, b in ((lhs, rhs), (rhs, lhs)):
                if a[0] == "var" and a[1] not in env and is_bool_lit(b):
                    env[a[1]] = Var(a[1], BOOL)
            x, y = arith(lhs), arith(rhs)
            extra.append({
                "=": linear.eq, "=\\=": linear.ne, "<": linear.lt,
                "=<": linear.le, ">": linear.gt, ">=": linear.ge,
            }[op](x, y))
        fresh.reserve(env)
        c = Clause(h, linear.conj(*extra), tuple(atoms), cid)
        return normalize(c, fresh)


def parse_problem(text: str) -> ProblemFile:
    reader = _Reader(text)
    items = reader.items()
    b = _Builder()
    b.declare([(d, tok) for kind, d, tok in items if kind == "directive"])
    clauses = []
    for kind, d, tok in items:
        if kind == "clause":
            clauses.append(b.clause(d[0], d[1], len(clauses) + 1))
    sig = Signature(b.adts, b.preds, b.modes)
    return ProblemFile(ClauseSet(sig, tuple(clauses)), b.expect)


def parse_file(path) -> ProblemFile:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


def format_problem(problem: ProblemFile | ClauseSet) -> str:
    cs = problem.clause_set if isinstance(problem, ProblemFile) else problem
    sig = cs.signature
    lines = []
    if isinstance(problem, ProblemFile) and problem.expect:
        lines.append(f":- expect {problem.expect}.")
    for decl in sig.adts.values():
        ctors = " | ".join(
            c.name + (f"({', '.join(s.name for s in c.arg_sorts)})" if c.arg_sorts else "")
            for c in decl.constructors
        )
        lines.append(f":- adt {decl.sort.name} = {ctors}.")
    for name, sorts in sig.preds.items():
        lines.append(f":- pred {name}({', '.join(s.name for s in sorts)})." if sorts else f":- pred {name}.")
    for name, mode in sig.modes.items():
        n = len(mode.inputs) + len(mode.outputs)
        kinds = ", ".join("in" if i in mode.inputs else "out" for i in range(n))
        lines.append(f":- mode {name}({kinds}).")
        if mode.total and mode.functional:
            lines.append(f":- total_functional {name}/{n}.")
        elif mode.total:
            lines.append(f":- total {name}/{n}.")
        elif mode.functional:
            lines.append(f":- functional {name}/{n}.")
    lines.extend(format_clause(c) for c in cs.clauses)
    return "\n".join(lines) + "\n"
