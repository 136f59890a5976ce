"""Typed first-order terms, substitutions and unification."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union


@dataclass(frozen=True)
class Sort:
    name: str

    @property
    def is_basic(self) -> bool:
        return self.name in ("int", "bool")

    def __str__(self) -> str:
        return self.name


INT = Sort("int")
BOOL = Sort("bool")


@dataclass(frozen=True)
class Constructor:
    name: str
    arg_sorts: tuple[Sort, ...]
    sort: Sort

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)


@dataclass(frozen=True)
class AdtDecl:
    sort: Sort
    constructors: tuple[Constructor, ...]

    def is_well_founded(self) -> bool:
        return any(self.sort not in c.arg_sorts for c in self.constructors)


@dataclass(frozen=True, order=True)
class Var:
    name: str
    sort: Sort

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: int | bool
    sort: Sort

    def __str__(self) -> str:
        if self.sort == BOOL:
            return "true" if self.value else "false"
        return str(self.value)


@dataclass(frozen=True)
class App:
    ctor: Constructor
    args: tuple["Term", ...] = ()

    @property
    def sort(self) -> Sort:
        return self.ctor.sort

    def __str__(self) -> str:
        return format_term(self)


Term = Union[Var, Const, App]
Subst = dict[Var, Term]


def format_term(t: Term) -> str:
    if isinstance(t, App):
        items = []
        cur: Term = t
        # print lists built from nil/cons in bracket notation
        while isinstance(cur, App) and cur.ctor.name == "cons" and len(cur.args) == 2:
            items.append(format_term(cur.args[0]))
            cur = cur.args[1]
        if items:
            if isinstance(cur, App) and cur.ctor.name == "nil" and not cur.args:
                return "[" + ",".join(items) + "]"
            return "[" + ",".join(items) + "|" + format_term(cur) + "]"
        if t.ctor.name == "nil" and not t.args:
            return "[]"
        if not t.args:
            return t.ctor.name
        return f"{t.ctor.name}({','.join(format_term(a) for a in t.args)})"
    return str(t)


def term_vars(t: Term) -> Iterator[Var]:
    """Variables of ``t`` in left-to-right occurrence order (with repeats)."""
    if isinstance(t, Var):
        yield t
    elif isinstance(t, App):
        for a in t.args:
            yield from term_vars(a)


def unique(items: Iterable[Var]) -> tuple[Var, ...]:
    return tuple(dict.fromkeys(items))


def occurs(v: Var, t: Term) -> bool:
    return any(v == x for x in term_vars(t))


def apply(t: Term, s: Mapping[Var, Term]) -> Term:
    if isinstance(t, Var):
        return s.get(t, t)
    if isinstance(t, App) and t.args:
        return App(t.ctor, tuple(apply(a, s) for a in t.args))
    return t


def compose(s1: Mapping[Var, Term], s2: Mapping[Var, Term]) -> Subst:
    """The substitution ``s1`` followed by ``s2``."""
    out = {v: apply(t, s2) for v, t in s1.items()}
    for v, t in s2.items():
        out.setdefault(v, t)
    return {v: t for v, t in out.items() if t != v}


def _walk(t: Term, s: Mapping[Var, Term]) -> Term:
    while isinstance(t, Var) and t in s:
        t = s[t]
    return t


def _resolve(t: Term, s: Mapping[Var, Term]) -> Term:
    t = _walk(t, s)
    if isinstance(t, App) and t.args:
        return App(t.ctor, tuple(_resolve(a, s) for a in t.args))
    return t


def unify_terms(pairs: Iterable[tuple[Term, Term]], subst: Subst | None = None) -> Subst | None:
    """Most general unifier of the equations in ``pairs``, with occurs-check.

    When two variables meet, the right-hand one is bound to the left-hand one,
    so variables of the left side survive in the result.
    """
    s: Subst = dict(subst or {})
    stack = list(pairs)
    while stack:
        a, b = stack.pop()
        a, b = _walk(a, s), _walk(b, s)
        if a == b:
            continue
        if isinstance(b, Var):
            if b.sort != a.sort or occurs(b, _resolve(a, s)):
                return None
            s[b] = a
        elif isinstance(a, Var):
            if a.sort != b.sort or occurs(a, _resolve(b, s)):
                return None
            s[a] = b
        elif isinstance(a, App) and isinstance(b, App):
            if a.ctor != b.ctor:
                return None
            stack.extend(zip(a.args, b.args))
        else:
            return None
    return {v: _resolve(t, s) for v, t in s.items()}


def match_terms(pairs: Iterable[tuple[Term, Term]], subst: Subst | None = None) -> Subst | None:
    """One-way matching: find ``s`` with ``pattern s == target`` for every pair."""
    s: Subst = dict(subst or {})
    stack = list(pairs)
    while stack:
        p, t = stack.pop()
        if isinstance(p, Var):
            if p.sort != t.sort:
                return None
            bound = s.get(p)
            if bound is None:
                s[p] = t
            elif bound != t:
                return None
        elif isinstance(p, App):
            if not isinstance(t, App) or p.ctor != t.ctor:
                return None
            stack.extend(zip(p.args, t.args))
        elif p != t:
            return None
    return s


def is_subterm(u: Term, v: Term) -> bool:
    if u == v:
        return True
    return isinstance(v, App) and any(is_subterm(u, a) for a in v.args)


def is_strict_subterm(u: Term, v: Term) -> bool:
    return u != v and is_subterm(u, v)


_SUFFIX = re.compile(r"_\d+$")


class FreshNames:
    """Generates variable and predicate names not used so far."""

    def __init__(self, taken: Iterable[str] = ()):
        self._taken = set(taken)
        self._counter: dict[str, int] = {}

    def reserve(self, names: Iterable[str]) -> None:
        self._taken.update(names)

    def name(self, base: str) -> str:
        base = _SUFFIX.sub("", base) or "V"
        n = self._counter.get(base, 0)
        while True:
            n += 1
            cand = f"{base}_{n}"
            if cand not in self._taken:
                break
        self._counter[base] = n
        self._taken.add(cand)
        return cand

    def var(self, like: Var | str, sort: Sort | None = None) -> Var:
        if isinstance(like, Var):
            return Var(self.name(like.name), like.sort)
        return Var(self.name(like), sort or INT)

    def pred(self, base: str) -> str:
        n = self._counter.get("#" + base, 0)
        while True:
            n += 1
            cand = f"{base}{n}"
            if cand not in self._taken:
                break
        self._counter["#" + base] = n
        self._taken.add(cand)
        return cand
