"""Untimed LTL: formula AST, text syntax, negation normal form and lasso semantics.

Words are sequences of letters; a letter is the set of propositions that hold.
A lasso ``(prefix, cycle)`` denotes the ultimately periodic word
``prefix . cycle . cycle ...``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import AbstractSet, Sequence


class Ltl:
    def to_text(self) -> str:
        return _text(self, 0)

    def __str__(self) -> str:
        return self.to_text()

    def props(self) -> frozenset[str]:
        out: set[str] = set()
        for f in walk(self):
            if isinstance(f, Prop):
                out.add(f.name)
        return frozenset(out)


@dataclass(frozen=True)
class Const(Ltl):
    value: bool


@dataclass(frozen=True)
class Prop(Ltl):
    name: str


@dataclass(frozen=True)
class Not(Ltl):
    arg: Ltl


@dataclass(frozen=True)
class And(Ltl):
    args: tuple[Ltl, ...]


@dataclass(frozen=True)
class Or(Ltl):
    args: tuple[Ltl, ...]


@dataclass(frozen=True)
class Implies(Ltl):
    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Next(Ltl):
    arg: Ltl


@dataclass(frozen=True)
class Eventually(Ltl):
    arg: Ltl


@dataclass(frozen=True)
class Always(Ltl):
    arg: Ltl


@dataclass(frozen=True)
class Until(Ltl):
    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Release(Ltl):
    left: Ltl
    right: Ltl


TRUE = Const(True)
FALSE = Const(False)


def children(f: Ltl) -> tuple[Ltl, ...]:
    if isinstance(f, (And, Or)):
        return f.args
    if isinstance(f, (Not, Next, Eventually, Always)):
        return (f.arg,)
    if isinstance(f, (Implies, Until, Release)):
        return (f.left, f.right)
    return ()


def walk(f: Ltl):
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(children(g))


def postorder(f: Ltl) -> list[Ltl]:
    """Distinct subformulas, children before parents."""
    seen: set[Ltl] = set()
    out: list[Ltl] = []

    def visit(g):
        if g in seen:
            return
        for c in children(g):
            visit(c)
        seen.add(g)
        out.append(g)

    visit(f)
    return out


def temporal_depth_count(f: Ltl) -> int:
    return sum(isinstance(g, (Next, Eventually, Always, Until, Release)) for g in walk(f))


# -- negation normal form ----------------------------------------------------


def nnf(f: Ltl, negate: bool = False) -> Ltl:
    """Negation normal form over {const, literal, and, or, X, U, R}.

    F and G are rewritten as ``true U a`` and ``false R a``.
    """
    if isinstance(f, Const):
        return Const(f.value != negate)
    if isinstance(f, Prop):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return nnf(f.arg, not negate)
    if isinstance(f, And):
        args = tuple(nnf(a, negate) for a in f.args)
        return Or(args) if negate else And(args)
    if isinstance(f, Or):
        args = tuple(nnf(a, negate) for a in f.args)
        return And(args) if negate else Or(args)
    if isinstance(f, Implies):
        return nnf(Or((Not(f.left), f.right)), negate)
    if isinstance(f, Next):
        return Next(nnf(f.arg, negate))
    if isinstance(f, Eventually):
        if negate:
            return Release(FALSE, nnf(f.arg, True))
        return Until(TRUE, nnf(f.arg))
    if isinstance(f, Always):
        if negate:
            return Until(TRUE, nnf(f.arg, True))
        return Release(FALSE, nnf(f.arg))
    if isinstance(f, Until):
        if negate:
            return Release(nnf(f.left, True), nnf(f.right, True))
        return Until(nnf(f.left), nnf(f.right))
    if isinstance(f, Release):
        if negate:
            return Until(nnf(f.left, True), nnf(f.right, True))
        return Release(nnf(f.left), nnf(f.right))
    raise TypeError(f"not an LTL formula: {f!r}")


# -- text syntax ---------------------------------------------------------------
#
#   impl  := or ('->' impl)?
#   or    := and ('|' and)*
#   and   := until ('&' until)*
#   until := unary (('U' | 'R') until)?
#   unary := ('!' | 'X' | 'F' | 'G') unary | atom
#   atom  := 'true' | 'false' | IDENT | '(' impl ')'

_KEYWORDS = {"X", "F", "G", "U", "R", "true", "false"}
_TOKEN = re.compile(r"\s*(->|[!&|()]|[A-Za-z_][A-Za-z0-9_]*)")


class LtlSyntaxError(ValueError):
    pass


def _tokenize(text: str) -> list[tuple[str, int]]:
    toks = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise LtlSyntaxError(f"unexpected character {text[pos:pos + 1]!r} at {pos}")
        toks.append((m.group(1), m.start(1)))
        pos = m.end()
    return toks


def parse_ltl(text: str) -> Ltl:
    toks = _tokenize(text)
    i = 0

    def peek():
        return toks[i][0] if i < len(toks) else None

    def take(expected=None):
        nonlocal i
        if i >= len(toks):
            raise LtlSyntaxError(f"unexpected end of input, expected {expected or 'token'}")
        tok, at = toks[i]
        if expected is not None and tok != expected:
            raise LtlSyntaxError(f"expected {expected!r} at {at}, got {tok!r}")
        i += 1
        return tok

    def p_impl():
        left = p_or()
        if peek() == "->":
            take()
            return Implies(left, p_impl())
        return left

    def p_or():
        args = [p_and()]
        while peek() == "|":
            take()
            args.append(p_and())
        return Or(tuple(args)) if len(args) > 1 else args[0]

    def p_and():
        args = [p_until()]
        while peek() == "&":
            take()
            args.append(p_until())
        return And(tuple(args)) if len(args) > 1 else args[0]

    def p_until():
        left = p_unary()
        if peek() in ("U", "R"):
            op = take()
            right = p_until()
            return Until(left, right) if op == "U" else Release(left, right)
        return left

    def p_unary():
        tok = peek()
        if tok in ("!", "X", "F", "G"):
            take()
            arg = p_unary()
            return {"!": Not, "X": Next, "F": Eventually, "G": Always}[tok](arg)
        return p_atom()

    def p_atom():
        tok = take()
        if tok == "(":
            f = p_impl()
            take(")")
            return f
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if tok in _KEYWORDS or not re.match(r"[A-Za-z_]", tok):
            raise LtlSyntaxError(f"unexpected token {tok!r}")
        return Prop(tok)

    f = p_impl()
    if i != len(toks):
        raise LtlSyntaxError(f"trailing input at {toks[i][1]}")
    return f


_PREC = {Implies: 1, Or: 2, And: 3, Until: 4, Release: 4}


def _text(f: Ltl, parent: int) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, (Not, Next, Eventually, Always)):
        op = {Not: "!", Next: "X", Eventually: "F", Always: "G"}[type(f)]
        inner = _text(f.arg, 5)
        return f"{op}{inner}" if op == "!" else f"{op}{inner}" if inner.startswith("(") else f"{op} {inner}"
    prec = _PREC[type(f)]
    if isinstance(f, Implies):
        s = f"{_text(f.left, prec + 1)} -> {_text(f.right, prec)}"
    elif isinstance(f, (Until, Release)):
        op = "U" if isinstance(f, Until) else "R"
        s = f"{_text(f.left, 5)} {op} {_text(f.right, 5)}"
    else:
        sep = " | " if isinstance(f, Or) else " & "
        s = sep.join(_text(a, prec + 1) for a in f.args)
    return f"({s})" if prec < parent else s


# -- semantics on lassos -------------------------------------------------------


def _local(f: Ltl, here: dict, nxt: dict, letter: AbstractSet[str]) -> bool:
    """Truth of ``f`` at a position from its subformulas here and at the successor."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Prop):
        return f.name in letter
    if isinstance(f, Not):
        return not here[f.arg]
    if isinstance(f, And):
        return all(here[a] for a in f.args)
    if isinstance(f, Or):
        return any(here[a] for a in f.args)
    if isinstance(f, Implies):
        return (not here[f.left]) or here[f.right]
    if isinstance(f, Next):
        return nxt[f.arg]
    if isinstance(f, Eventually):
        return here[f.arg] or nxt[f]
    if isinstance(f, Always):
        return here[f.arg] and nxt[f]
    if isinstance(f, Until):
        return here[f.right] or (here[f.left] and nxt[f])
    if isinstance(f, Release):
        return here[f.right] and (here[f.left] or nxt[f])
    raise TypeError(f)


_LEAST = (Eventually, Until)


def _valuate(f: Ltl, letters: Sequence[AbstractSet[str]], loop: int) -> list[dict]:
    """Truth of every subformula at every position of a lasso graph.

    Position ``i`` has successor ``i + 1``, except the last, which loops back to
    ``loop``. Fixpoint operators are solved by iteration from their extremal
    values (least for F/U, greatest for G/R), which is exact on a single path.
    """
    n = len(letters)
    succ = [i + 1 if i + 1 < n else loop for i in range(n)]
    vals: list[dict] = [dict() for _ in range(n)]
    for g in postorder(f):
        if isinstance(g, (Eventually, Until, Always, Release)):
            init = not isinstance(g, _LEAST)
            for i in range(n):
                vals[i][g] = init
            changed = True
            while changed:
                changed = False
                for i in reversed(range(n)):
                    v = _local(g, vals[i], vals[succ[i]], letters[i])
                    if v != vals[i][g]:
                        vals[i][g] = v
                        changed = True
        else:
            for i in range(n):
                vals[i][g] = _local(g, vals[i], vals[succ[i]], letters[i])
    return vals


def ltl_holds_on_lasso(formula: Ltl, prefix: Sequence[AbstractSet[str]], cycle: Sequence[AbstractSet[str]]) -> bool:
    """Direct LTL semantics on ``prefix . cycle^omega``. Independent of any automaton."""
    if not cycle:
        raise ValueError("cycle must be nonempty")
    letters = [frozenset(a) for a in prefix] + [frozenset(a) for a in cycle]
    return bool(_valuate(formula, letters, len(prefix))[0][formula])


class LassoOracle:
    """Batched form of :func:`ltl_holds_on_lasso` for exhaustive lasso suites.

    The valuation at the start of a cycle is computed once per cycle; prefixes
    are then folded backwards one letter at a time with memoisation.
    """

    def __init__(self, formula: Ltl):
        self.formula = formula
        self.order = postorder(formula)
        self._step_cache: dict = {}

    def cycle_start(self, cycle: Sequence[AbstractSet[str]]) -> tuple:
        vals = _valuate(self.formula, [frozenset(a) for a in cycle], 0)[0]
        return tuple(vals[g] for g in self.order)

    def step(self, letter: frozenset, after: tuple) -> tuple:
        key = (letter, after)
        hit = self._step_cache.get(key)
        if hit is not None:
            return hit
        nxt = dict(zip(self.order, after))
        here: dict = {}
        for g in self.order:
            here[g] = _local(g, here, nxt, letter)
        out = tuple(here[g] for g in self.order)
        self._step_cache[key] = out
        return out

    def holds(self, prefix: Sequence[frozenset], start: tuple) -> bool:
        vals = start
        for letter in reversed(prefix):
            vals = self.step(letter, vals)
        return vals[-1]
