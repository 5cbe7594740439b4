"""Boolean expressions used as automaton transition labels."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import AbstractSet, Iterable, Mapping


class BoolExpr:
    """Base class. Subclasses are immutable and compare structurally."""

    __slots__ = ()

    def evaluate(self, true_props: AbstractSet[str]) -> bool:
        """Evaluate under the total assignment where exactly ``true_props`` hold."""
        raise NotImplementedError

    def restrict(self, partial: Mapping[str, bool]) -> "BoolExpr":
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        raise NotImplementedError

    def to_text(self) -> str:
        return _text(self, 0)

    def __str__(self) -> str:
        return self.to_text()

    def satisfiable(self, partial: Mapping[str, bool] | None = None) -> bool:
        e = self.restrict(partial) if partial else self
        return _sat(e)

    def dnf(self) -> list[dict[str, bool]]:
        """Irredundant-ish DNF: contradictory cubes pruned, subsumed cubes dropped."""
        return [dict(c) for c in _dnf(self)]


@dataclass(frozen=True)
class Const(BoolExpr):
    value: bool

    def evaluate(self, true_props):
        return self.value

    def restrict(self, partial):
        return self

    def variables(self):
        return frozenset()


@dataclass(frozen=True)
class Var(BoolExpr):
    name: str

    def evaluate(self, true_props):
        return self.name in true_props

    def restrict(self, partial):
        if self.name in partial:
            return TRUE if partial[self.name] else FALSE
        return self

    def variables(self):
        return frozenset((self.name,))


@dataclass(frozen=True)
class Not(BoolExpr):
    arg: BoolExpr

    def evaluate(self, true_props):
        return not self.arg.evaluate(true_props)

    def restrict(self, partial):
        return neg(self.arg.restrict(partial))

    def variables(self):
        return self.arg.variables()


@dataclass(frozen=True)
class And(BoolExpr):
    args: tuple[BoolExpr, ...]

    def evaluate(self, true_props):
        return all(a.evaluate(true_props) for a in self.args)

    def restrict(self, partial):
        return conj(a.restrict(partial) for a in self.args)

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))


@dataclass(frozen=True)
class Or(BoolExpr):
    args: tuple[BoolExpr, ...]

    def evaluate(self, true_props):
        return any(a.evaluate(true_props) for a in self.args)

    def restrict(self, partial):
        return disj(a.restrict(partial) for a in self.args)

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))


TRUE = Const(True)
FALSE = Const(False)


def lit(name: str, positive: bool = True) -> BoolExpr:
    return Var(name) if positive else Not(Var(name))


def neg(e: BoolExpr) -> BoolExpr:
    if isinstance(e, Const):
        return FALSE if e.value else TRUE
    if isinstance(e, Not):
        return e.arg
    return Not(e)


def conj(args: Iterable[BoolExpr]) -> BoolExpr:
    out: list[BoolExpr] = []
    seen = set()
    for a in args:
        if a == FALSE:
            return FALSE
        if a == TRUE:
            continue
        parts = a.args if isinstance(a, And) else (a,)
        for p in parts:
            if p not in seen:
                seen.add(p)
                out.append(p)
    for p in out:
        if neg(p) in seen:
            return FALSE
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(args: Iterable[BoolExpr]) -> BoolExpr:
    out: list[BoolExpr] = []
    seen = set()
    for a in args:
        if a == TRUE:
            return TRUE
        if a == FALSE:
            continue
        parts = a.args if isinstance(a, Or) else (a,)
        for p in parts:
            if p not in seen:
                seen.add(p)
                out.append(p)
    for p in out:
        if neg(p) in seen:
            return TRUE
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def cube_expr(cube: Mapping[str, bool]) -> BoolExpr:
    return conj(lit(n, v) for n, v in sorted(cube.items()))


def from_cubes(cubes: Iterable[Mapping[str, bool]]) -> BoolExpr:
    return disj(cube_expr(c) for c in cubes)


# -- text ------------------------------------------------------------------

_PREC = {Or: 1, And: 2}


def _text(e: BoolExpr, parent: int) -> str:
    if isinstance(e, Const):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Not):
        inner = _text(e.arg, 3)
        return "!" + inner
    prec = _PREC[type(e)]
    sep = " | " if isinstance(e, Or) else " & "
    s = sep.join(_text(a, prec + 1) for a in e.args)
    return f"({s})" if prec < parent else s


def parse_bool(text: str) -> BoolExpr:
    """Parse the label syntax written by :meth:`BoolExpr.to_text`."""
    import re

    toks = re.findall(r"[A-Za-z_][A-Za-z0-9_.]*|[!&|()]", text)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take(expected=None):
        nonlocal pos
        t = peek()
        if t is None or (expected is not None and t != expected):
            raise ValueError(f"bad label {text!r} at token {pos}")
        pos += 1
        return t

    def p_or():
        args = [p_and()]
        while peek() == "|":
            take()
            args.append(p_and())
        return disj(args) if len(args) > 1 else args[0]

    def p_and():
        args = [p_not()]
        while peek() == "&":
            take()
            args.append(p_not())
        return conj(args) if len(args) > 1 else args[0]

    def p_not():
        if peek() == "!":
            take()
            return neg(p_not())
        if peek() == "(":
            take()
            e = p_or()
            take(")")
            return e
        t = take()
        if t == "true":
            return TRUE
        if t == "false":
            return FALSE
        return Var(t)

    e = p_or()
    if peek() is not None:
        raise ValueError(f"trailing input in label {text!r}")
    return e


# -- satisfiability and DNF -------------------------------------------------


def _components(args: tuple[BoolExpr, ...]) -> list[list[BoolExpr]]:
    groups: list[tuple[set[str], list[BoolExpr]]] = []
    for a in args:
        vs = set(a.variables())
        merged_vars, merged = vs, [a]
        rest = []
        for gv, ga in groups:
            if gv & merged_vars:
                merged_vars |= gv
                merged = ga + merged
            else:
                rest.append((gv, ga))
        groups = rest + [(merged_vars, merged)]
    return [g for _, g in groups]


def _sat(e: BoolExpr) -> bool:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, (Var, Not)) and isinstance(getattr(e, "arg", e), Var):
        return True
    if isinstance(e, Or):
        return any(_sat(a) for a in e.args)
    if isinstance(e, And):
        comps = _components(e.args)
        if len(comps) > 1:
            return all(_sat(conj(c)) for c in comps)
    v = min(e.variables())
    return _sat(e.restrict({v: True})) or _sat(e.restrict({v: False}))


Cube = frozenset  # of (name, value) pairs


def _minimize(cubes: Iterable[Cube]) -> list[Cube]:
    uniq = sorted(set(cubes), key=lambda c: (len(c), sorted(c)))
    kept: list[Cube] = []
    for c in uniq:
        if not any(k <= c for k in kept):
            kept.append(c)
    return kept


def _consistent(c: Cube) -> bool:
    names = [n for n, _ in c]
    return len(names) == len(set(names))


def _dnf(e: BoolExpr) -> list[Cube]:
    if isinstance(e, Const):
        return [frozenset()] if e.value else []
    if isinstance(e, Var):
        return [frozenset({(e.name, True)})]
    if isinstance(e, Not):
        a = e.arg
        if isinstance(a, Var):
            return [frozenset({(a.name, False)})]
        if isinstance(a, Not):
            return _dnf(a.arg)
        if isinstance(a, And):
            return _dnf(disj(neg(x) for x in a.args))
        if isinstance(a, Or):
            return _dnf(conj(neg(x) for x in a.args))
        return _dnf(neg(a))
    if isinstance(e, Or):
        return _minimize(c for a in e.args for c in _dnf(a))
    acc: list[Cube] = [frozenset()]
    for a in e.args:
        part = _dnf(a)
        acc = _minimize(x | y for x, y in product(acc, part) if _consistent(x | y))
        if not acc:
            return []
    return acc
