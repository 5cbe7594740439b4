"""Predicates, Event-based STL formulas, their text syntax and an offline monitor.

Concrete syntax::

    spec     := item ('&' item)*
    item     := 'G' interval '(' preds ')'
              | 'G' '(' antecedent '->' spec ')'
              | 'G' '(' preds ')'                     -- untimed, [0, inf)
              | 'F' interval '(' preds ')'
              | group 'U' interval group
              | '(' spec ')'
    group    := '(' preds ')' | literal
    preds    := literal ('&' literal)*
    literal  := ['!'] PREDICATE
    antecedent := boolean formula over EVENTS using ! & | and parentheses,
                  or a conjunction of predicate literals
    interval := '[' number ',' (number | 'inf') ']'

Identifiers are resolved against a :class:`Declarations` table, so the parser
never needs to know any geometry.
"""
from __future__ import annotations

import enum
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

INF = math.inf

KINDS = ("sphere-inner", "sphere-outer", "pair-distance-min", "angle-abs-target", "halfspace")


# -- predicate functions ---------------------------------------------------------


@dataclass(frozen=True)
class PredicateFunction:
    """A scalar function h(x) whose sign decides a predicate.

    ``dims`` are indices into the joint state. For ``pair-distance-min`` the
    first half of ``dims`` belongs to the first robot of ``subject`` and the
    second half to the other robot.

    ``params`` by kind: sphere kinds ``(*center, radius)``; pair-distance-min
    ``(min_distance,)``; angle-abs-target ``(target, tolerance)``; halfspace
    ``(*normal, offset)``.
    """

    kind: str
    subject: tuple[int, ...]
    dims: tuple[int, ...]
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown predicate kind {self.kind!r}")
        nd = len(self.dims)
        if self.kind in ("sphere-inner", "sphere-outer"):
            if len(self.params) != nd + 1 or self.params[-1] <= 0:
                raise ValueError(f"{self.kind} needs a center of dimension {nd} and a positive radius")
        elif self.kind == "pair-distance-min":
            if nd % 2 or nd == 0 or len(self.params) != 1 or self.params[0] <= 0:
                raise ValueError("pair-distance-min needs paired dims and a positive distance")
        elif self.kind == "angle-abs-target":
            if nd != 1 or len(self.params) != 2 or self.params[1] <= 0:
                raise ValueError("angle-abs-target reads one dim and needs a positive tolerance")
        elif len(self.params) != nd + 1:
            raise ValueError("halfspace needs a normal of the dims' size and an offset")

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.params[:-1], dtype=float)

    @property
    def radius(self) -> float:
        return self.params[-1]

    def target_point(self, x: np.ndarray) -> np.ndarray | None:
        """Where a robot should head to make h nonnegative, on ``dims``; None if no attraction."""
        if self.kind == "sphere-inner":
            return self.center
        if self.kind == "angle-abs-target":
            theta = x[self.dims[0]]
            return np.array([self.params[0] if theta >= 0 else -self.params[0]])
        return None


def sphere_inner(dims, center, radius, subject=(0,)) -> PredicateFunction:
    return PredicateFunction("sphere-inner", tuple(subject), tuple(dims), (*map(float, center), float(radius)))


def sphere_outer(dims, center, radius, subject=(0,)) -> PredicateFunction:
    return PredicateFunction("sphere-outer", tuple(subject), tuple(dims), (*map(float, center), float(radius)))


def pair_distance_min(dims_i, dims_j, distance, subject=(0, 1)) -> PredicateFunction:
    return PredicateFunction("pair-distance-min", tuple(subject), tuple(dims_i) + tuple(dims_j), (float(distance),))


def angle_abs_target(dim, target, tolerance, subject=(0,)) -> PredicateFunction:
    return PredicateFunction("angle-abs-target", tuple(subject), (dim,), (float(target), float(tolerance)))


def halfspace(dims, normal, offset, subject=(0,)) -> PredicateFunction:
    return PredicateFunction("halfspace", tuple(subject), tuple(dims), (*map(float, normal), float(offset)))


def h_value(func: PredicateFunction, x) -> float:
    x = np.asarray(x, dtype=float)
    xd = x[list(func.dims)]
    kind = func.kind
    if kind == "sphere-inner":
        return func.radius - float(np.linalg.norm(xd - func.center))
    if kind == "sphere-outer":
        return float(np.linalg.norm(xd - func.center)) - func.radius
    if kind == "pair-distance-min":
        half = len(xd) // 2
        return float(np.linalg.norm(xd[:half] - xd[half:])) - func.params[0]
    if kind == "angle-abs-target":
        target, tol = func.params
        return tol - abs(abs(xd[0]) - target)
    a = np.asarray(func.params[:-1])
    return float(a @ xd) - func.params[-1]


def h_series(func: PredicateFunction, states: np.ndarray) -> np.ndarray:
    """h evaluated on every row of ``states``."""
    xd = np.asarray(states, dtype=float)[:, list(func.dims)]
    kind = func.kind
    if kind == "sphere-inner":
        return func.radius - np.linalg.norm(xd - func.center, axis=1)
    if kind == "sphere-outer":
        return np.linalg.norm(xd - func.center, axis=1) - func.radius
    if kind == "pair-distance-min":
        half = xd.shape[1] // 2
        return np.linalg.norm(xd[:, :half] - xd[:, half:], axis=1) - func.params[0]
    if kind == "angle-abs-target":
        target, tol = func.params
        return tol - np.abs(np.abs(xd[:, 0]) - target)
    return xd @ np.asarray(func.params[:-1]) - func.params[-1]


class SingularGradient(ValueError):
    """h is not differentiable at this state (norm kinds at their center)."""


SINGULAR_RADIUS = 1e-6


def h_gradient(func: PredicateFunction, x) -> np.ndarray:
    """dh/dx over the full joint state."""
    x = np.asarray(x, dtype=float)
    dims = list(func.dims)
    xd = x[dims]
    g = np.zeros_like(x)
    kind = func.kind
    if kind in ("sphere-inner", "sphere-outer"):
        diff = xd - func.center
        n = np.linalg.norm(diff)
        if n < SINGULAR_RADIUS:
            raise SingularGradient(f"{kind} gradient undefined at its center")
        g[dims] = diff / n if kind == "sphere-outer" else -diff / n
    elif kind == "pair-distance-min":
        half = len(dims) // 2
        diff = xd[:half] - xd[half:]
        n = np.linalg.norm(diff)
        if n < SINGULAR_RADIUS:
            raise SingularGradient("pair distance gradient undefined for coincident robots")
        g[dims[:half]] = diff / n
        g[dims[half:]] = -diff / n
    elif kind == "angle-abs-target":
        theta = xd[0]
        side = 1.0 if theta >= 0 else -1.0
        g[dims[0]] = -np.sign(abs(theta) - func.params[0]) * side
    else:
        g[dims] = np.asarray(func.params[:-1])
    return g


# -- formula AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class TimeInterval:
    a: float
    b: float

    def __post_init__(self):
        if not (0 <= self.a <= self.b):
            raise ValueError(f"bad interval [{self.a}, {self.b}]")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.b)


ALWAYS = TimeInterval(0.0, INF)


@dataclass(frozen=True)
class Predicate:
    name: str
    func: PredicateFunction
    negated: bool = False

    def h(self, x) -> float:
        v = h_value(self.func, x)
        return -v if self.negated else v

    def grad(self, x) -> np.ndarray:
        g = h_gradient(self.func, x)
        return -g if self.negated else g

    def series(self, states) -> np.ndarray:
        v = h_series(self.func, states)
        return -v if self.negated else v

    @property
    def label(self) -> str:
        return ("!" if self.negated else "") + self.name


def eval_h(pred: Predicate, x) -> float:
    """h(x) for the literal, sign-flipped when negated. The literal holds iff the result is >= 0."""
    return pred.h(x)


class StlFormula:
    def to_text(self) -> str:
        return print_spec(self)

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class PredConj(StlFormula):
    literals: tuple[Predicate, ...]


class EnvBool(StlFormula):
    pass


@dataclass(frozen=True)
class EvProp(EnvBool):
    name: str


@dataclass(frozen=True)
class EvNot(EnvBool):
    arg: EnvBool


@dataclass(frozen=True)
class EvAnd(EnvBool):
    args: tuple[EnvBool, ...]


@dataclass(frozen=True)
class EvOr(EnvBool):
    """Disjunction, definable from the grammar's negation and conjunction."""

    args: tuple[EnvBool, ...]


@dataclass(frozen=True)
class TimedG(StlFormula):
    interval: TimeInterval
    body: PredConj


@dataclass(frozen=True)
class TimedF(StlFormula):
    interval: TimeInterval
    body: PredConj


@dataclass(frozen=True)
class TimedU(StlFormula):
    interval: TimeInterval
    left: PredConj
    right: PredConj


@dataclass(frozen=True)
class ImplG(StlFormula):
    antecedent: EnvBool | PredConj
    body: StlFormula


@dataclass(frozen=True)
class SpecAnd(StlFormula):
    args: tuple[StlFormula, ...]


def env_holds(alpha: EnvBool, sigma) -> bool:
    if isinstance(alpha, EvProp):
        return alpha.name in sigma
    if isinstance(alpha, EvNot):
        return not env_holds(alpha.arg, sigma)
    if isinstance(alpha, EvAnd):
        return all(env_holds(a, sigma) for a in alpha.args)
    return any(env_holds(a, sigma) for a in alpha.args)


def predicates_of(f: StlFormula) -> list[Predicate]:
    """Predicate literal occurrences in traversal order."""
    if isinstance(f, PredConj):
        return list(f.literals)
    if isinstance(f, (TimedG, TimedF)):
        return list(f.body.literals)
    if isinstance(f, TimedU):
        return list(f.left.literals) + list(f.right.literals)
    if isinstance(f, ImplG):
        ant = predicates_of(f.antecedent) if isinstance(f.antecedent, PredConj) else []
        return ant + predicates_of(f.body)
    if isinstance(f, SpecAnd):
        return [p for a in f.args for p in predicates_of(a)]
    return []


def events_of(f: StlFormula) -> set[str]:
    if isinstance(f, EvProp):
        return {f.name}
    if isinstance(f, EvNot):
        return events_of(f.arg)
    if isinstance(f, (EvAnd, EvOr, SpecAnd)):
        return set().union(*(events_of(a) for a in f.args))
    if isinstance(f, ImplG):
        return events_of(f.antecedent) | events_of(f.body)
    return set()


def intervals_of(f: StlFormula) -> list[TimeInterval]:
    if isinstance(f, (TimedG, TimedF, TimedU)):
        return [f.interval]
    if isinstance(f, ImplG):
        return intervals_of(f.body)
    if isinstance(f, SpecAnd):
        return [i for a in f.args for i in intervals_of(a)]
    return []


# -- declarations and parsing ---------------------------------------------------------


@dataclass
class Declarations:
    predicates: Mapping[str, PredicateFunction]
    events: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        self.events = frozenset(self.events)
        clash = set(self.predicates) & self.events
        if clash:
            raise ValueError(f"names declared as both predicate and event: {sorted(clash)}")
        for name in list(self.predicates) + list(self.events):
            if name in _RESERVED or not _IDENT.fullmatch(name):
                raise ValueError(f"invalid identifier {name!r}")


class StlSyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


_RESERVED = {"G", "F", "U", "inf"}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TOKEN = re.compile(r"\s*(->|[\[\](),!&|]|\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+|[A-Za-z_][A-Za-z0-9_]*)")


class _Parser:
    def __init__(self, text: str, decls: Declarations):
        self.text = text
        self.decls = decls
        self.toks: list[tuple[str, int]] = []
        pos = 0
        stripped = text.rstrip()
        while pos < len(stripped):
            m = _TOKEN.match(stripped, pos)
            if not m:
                raise StlSyntaxError(f"unexpected character {stripped[pos]!r}", pos)
            self.toks.append((m.group(1), m.start(1)))
            pos = m.end()
        self.i = 0

    # token helpers
    def peek(self, k: int = 0):
        j = self.i + k
        return self.toks[j][0] if j < len(self.toks) else None

    def here(self) -> int:
        return self.toks[self.i][1] if self.i < len(self.toks) else len(self.text)

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None:
            raise StlSyntaxError(f"unexpected end of input, expected {expected or 'more'}", len(self.text))
        if expected is not None and tok != expected:
            raise StlSyntaxError(f"expected {expected!r}, found {tok!r}", self.here())
        self.i += 1
        return tok

    def parse(self) -> StlFormula:
        f = self.spec()
        if self.peek() is not None:
            if self.peek() == "|":
                raise StlSyntaxError("disjunction is only allowed between environment events", self.here())
            raise StlSyntaxError(f"unexpected {self.peek()!r}", self.here())
        return f

    def spec(self) -> StlFormula:
        items = [self.item()]
        while self.peek() == "&":
            self.take()
            items.append(self.item())
        return items[0] if len(items) == 1 else SpecAnd(tuple(items))

    def item(self) -> StlFormula:
        tok = self.peek()
        if tok == "G":
            self.take()
            if self.peek() == "[":
                iv = self.interval()
                return TimedG(iv, self.paren_preds())
            self.take("(")
            save = self.i
            ant_err = None
            try:
                ant = self.antecedent()
                if self.peek() == "->":
                    self.take()
                    body = self.spec()
                    self.take(")")
                    return ImplG(ant, body)
            except StlSyntaxError as exc:
                ant_err = exc
            self.i = save
            try:
                body = self.preds()
            except StlSyntaxError:
                # the implication reading got further; its message is the useful one
                raise ant_err or sys.exc_info()[1] from None
            if self.peek() != ")":
                raise StlSyntaxError("G(...) must hold a predicate conjunction or an implication", self.here())
            self.take(")")
            return TimedG(ALWAYS, body)
        if tok == "F":
            self.take()
            if self.peek() != "[":
                raise StlSyntaxError("F needs a time interval", self.here())
            iv = self.interval()
            return TimedF(iv, self.paren_preds())
        if tok == "(" or tok == "!" or (tok is not None and tok in self.decls.predicates):
            save = self.i
            try:
                left = self.group()
                if self.peek() == "U":
                    self.take()
                    iv = self.interval()
                    return TimedU(iv, left, self.group())
                err = None
            except StlSyntaxError as e:
                err = e
            self.i = save
            if tok == "(":
                self.take("(")
                f = self.spec()
                self.take(")")
                return f
            if err:
                raise err
            raise StlSyntaxError("a bare predicate must sit under a temporal operator", self.here())
        if tok is not None and tok in self.decls.events:
            raise StlSyntaxError(f"event {tok!r} may only appear as an implication antecedent", self.here())
        if tok is not None and _IDENT.fullmatch(tok) and tok not in _RESERVED:
            raise StlSyntaxError(f"unknown identifier {tok!r}", self.here())
        raise StlSyntaxError(f"unexpected {tok!r}", self.here())

    def interval(self) -> TimeInterval:
        at = self.here()
        self.take("[")
        a = self.number()
        self.take(",")
        b = INF if self.peek() == "inf" and self.take() else self.number()
        self.take("]")
        if a > b:
            raise StlSyntaxError(f"interval lower bound {a} exceeds upper bound {b}", at)
        return TimeInterval(a, b)

    def number(self) -> float:
        tok = self.peek()
        if tok is None or not re.fullmatch(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+", tok):
            raise StlSyntaxError("expected a number", self.here())
        self.take()
        return float(tok)

    def group(self) -> PredConj:
        if self.peek() == "(":
            return self.paren_preds()
        return PredConj((self.literal(),))

    def paren_preds(self) -> PredConj:
        self.take("(")
        body = self.preds()
        if self.peek() == "|":
            raise StlSyntaxError("disjunction over predicates is not allowed", self.here())
        if self.peek() in ("G", "F", "U") or self.peek() == "[":
            raise StlSyntaxError("temporal operators cannot be nested here", self.here())
        self.take(")")
        return body

    def preds(self) -> PredConj:
        lits = list(self.pred_atom())
        while self.peek() == "&" and self._pred_follows():
            self.take()
            lits += self.pred_atom()
        return PredConj(tuple(lits))

    def _pred_follows(self) -> bool:
        j = 1
        while self.peek(j) in ("!", "("):
            j += 1
        return self.peek(j) in self.decls.predicates

    def pred_atom(self) -> list[Predicate]:
        if self.peek() == "(":
            self.take()
            inner = self.preds()
            if self.peek() == "|":
                raise StlSyntaxError("disjunction over predicates is not allowed", self.here())
            self.take(")")
            return list(inner.literals)
        return [self.literal()]

    def literal(self) -> Predicate:
        negated = False
        if self.peek() == "!":
            self.take()
            negated = True
            if self.peek() == "!":
                raise StlSyntaxError("double negation of a predicate is not allowed", self.here())
        at = self.here()
        tok = self.take()
        if tok in self.decls.events:
            raise StlSyntaxError(f"event {tok!r} used where a predicate is required", at)
        if tok not in self.decls.predicates:
            raise StlSyntaxError(f"unknown predicate {tok!r}", at)
        return Predicate(tok, self.decls.predicates[tok], negated)

    # antecedents: parse a generic boolean formula then classify it
    def antecedent(self) -> EnvBool | PredConj:
        at = self.here()
        tree = self.b_or()
        names = _tree_names(tree)
        if names <= self.decls.events:
            return _tree_env(tree)
        if names <= set(self.decls.predicates):
            lits = _tree_conj(tree)
            if lits is None:
                raise StlSyntaxError("a predicate antecedent must be a conjunction of literals", at)
            return PredConj(tuple(Predicate(n, self.decls.predicates[n], neg) for n, neg in lits))
        unknown = names - self.decls.events - set(self.decls.predicates)
        if unknown:
            raise StlSyntaxError(f"unknown identifier {sorted(unknown)[0]!r}", at)
        raise StlSyntaxError("an antecedent cannot mix events and predicates", at)

    def b_or(self):
        args = [self.b_and()]
        while self.peek() == "|":
            self.take()
            args.append(self.b_and())
        return ("or", args) if len(args) > 1 else args[0]

    def b_and(self):
        args = [self.b_not()]
        while self.peek() == "&":
            self.take()
            args.append(self.b_not())
        return ("and", args) if len(args) > 1 else args[0]

    def b_not(self):
        if self.peek() == "!":
            self.take()
            return ("not", self.b_not())
        if self.peek() == "(":
            self.take()
            t = self.b_or()
            self.take(")")
            return ("group", t)
        tok = self.peek()
        if tok is None or not _IDENT.fullmatch(tok) or tok in _RESERVED:
            raise StlSyntaxError(f"unexpected {tok!r} in antecedent", self.here())
        self.take()
        return ("id", tok)


def _tree_names(t) -> set[str]:
    kind = t[0]
    if kind == "id":
        return {t[1]}
    if kind in ("not", "group"):
        return _tree_names(t[1])
    return set().union(*(_tree_names(a) for a in t[1]))


def _tree_env(t) -> EnvBool:
    kind = t[0]
    if kind == "id":
        return EvProp(t[1])
    if kind == "group":
        return _tree_env(t[1])
    if kind == "not":
        return EvNot(_tree_env(t[1]))
    args = tuple(_tree_env(a) for a in t[1])
    return EvAnd(args) if kind == "and" else EvOr(args)


def _tree_conj(t):
    kind = t[0]
    if kind == "id":
        return [(t[1], False)]
    if kind == "not" and t[1][0] == "id":
        return [(t[1][1], True)]
    if kind == "group":
        return _tree_conj(t[1])
    if kind == "and":
        out = []
        for a in t[1]:
            sub = _tree_conj(a)
            if sub is None:
                return None
            out += sub
        return out
    return None


def parse(text: str, decls: Declarations) -> StlFormula:
    """Parse a specification; raises :class:`StlSyntaxError` with the offending offset."""
    return _Parser(text, decls).parse()


# -- printing ----------------------------------------------------------------------------


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _interval(iv: TimeInterval) -> str:
    return f"[{_num(iv.a)},{_num(iv.b)}]"


def _preds(p: PredConj) -> str:
    return " & ".join(lit.label for lit in p.literals)


def _env(e: EnvBool, parent: int = 0) -> str:
    if isinstance(e, EvProp):
        return e.name
    if isinstance(e, EvNot):
        inner = _env(e.arg, 3)
        return "!" + inner
    prec = 1 if isinstance(e, EvOr) else 2
    sep = " | " if prec == 1 else " & "
    # same-operator children are parenthesised so nesting survives a round trip
    s = sep.join(_env(a, prec + 1 if type(a) is type(e) else prec) for a in e.args)
    return f"({s})" if prec < parent else s


def print_spec(f: StlFormula, nested: bool = False) -> str:
    if isinstance(f, SpecAnd):
        s = " & ".join(print_spec(a, nested=True) for a in f.args)
        return f"({s})" if nested else s
    if isinstance(f, TimedG):
        if f.interval == ALWAYS:
            return f"G({_preds(f.body)})"
        return f"G{_interval(f.interval)}({_preds(f.body)})"
    if isinstance(f, TimedF):
        return f"F{_interval(f.interval)}({_preds(f.body)})"
    if isinstance(f, TimedU):
        return f"({_preds(f.left)}) U{_interval(f.interval)} ({_preds(f.right)})"
    if isinstance(f, ImplG):
        ant = _preds(f.antecedent) if isinstance(f.antecedent, PredConj) else _env(f.antecedent)
        return f"G({ant} -> {print_spec(f.body)})"
    if isinstance(f, PredConj):
        return _preds(f)
    if isinstance(f, EnvBool):
        return _env(f)
    raise TypeError(f)


# -- offline monitor ----------------------------------------------------------------------


@dataclass
class Trace:
    dt: float
    states: np.ndarray
    events: list[frozenset]

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.events = [frozenset(e) for e in self.events]
        if self.dt <= 0:
            raise ValueError("sample period must be positive")
        if len(self.states) != len(self.events):
            raise ValueError("states and events must have equal length")

    def __len__(self) -> int:
        return len(self.events)


class Verdict(enum.Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"


@dataclass
class MonitorResult:
    verdict: Verdict
    time: float | None = None
    node: StlFormula | None = None

    @property
    def satisfied(self) -> bool:
        return self.verdict is Verdict.SATISFIED


class _Monitor:
    """Finite-trace evaluation of the Event-based STL semantics.

    Interval clocks of an implication body restart at every rising edge of the
    antecedent. Untimed G is judged over the recorded trace; a bounded
    obligation reaching past the last sample is inconclusive unless already
    decided by the samples present.
    """

    def __init__(self, trace: Trace):
        self.trace = trace
        self.n = len(trace)
        self._cache: dict[int, np.ndarray] = {}

    def steps(self, t: float) -> int | None:
        if math.isinf(t):
            return None
        k = t / self.trace.dt
        r = round(k)
        if abs(k - r) > 1e-6:
            raise ValueError(f"time {t} is not a multiple of the sample period {self.trace.dt}")
        return int(r)

    def truth(self, f: PredConj | EnvBool) -> np.ndarray:
        key = id(f)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if isinstance(f, PredConj):
            out = np.ones(self.n, dtype=bool)
            for lit in f.literals:
                out &= lit.series(self.trace.states) >= 0
        else:
            out = np.array([env_holds(f, s) for s in self.trace.events], dtype=bool)
        self._cache[key] = out
        return out

    def at(self, f: StlFormula, k: int) -> tuple[Verdict, int | None, StlFormula | None]:
        last = self.n - 1
        if isinstance(f, SpecAnd):
            return _combine([self.at(a, k) for a in f.args])
        if isinstance(f, PredConj):
            ok = self.truth(f)[k]
            return (Verdict.SATISFIED, None, None) if ok else (Verdict.VIOLATED, k, f)
        if isinstance(f, (TimedF, TimedG, TimedU)):
            lo = k + self.steps(f.interval.a)
            up = self.steps(f.interval.b)
            hi = None if up is None else k + up
            beyond = hi is None or hi > last
            stop = last if beyond else hi
            if isinstance(f, TimedF):
                vals = self.truth(f.body)[lo:stop + 1] if lo <= last else np.zeros(0, bool)
                if vals.any():
                    return Verdict.SATISFIED, None, None
                return (Verdict.INCONCLUSIVE, k, f) if beyond else (Verdict.VIOLATED, k, f)
            if isinstance(f, TimedG):
                vals = self.truth(f.body)[lo:stop + 1] if lo <= last else np.zeros(0, bool)
                bad = np.flatnonzero(~vals)
                if bad.size:
                    return Verdict.VIOLATED, lo + int(bad[0]), f
                if beyond and hi is not None:
                    return Verdict.INCONCLUSIVE, k, f
                return Verdict.SATISFIED, None, None
            left, right = self.truth(f.left), self.truth(f.right)
            for j in range(lo, stop + 1):
                if not left[j]:
                    return Verdict.VIOLATED, k, f
                if right[j]:
                    return Verdict.SATISFIED, None, None
            return (Verdict.INCONCLUSIVE, k, f) if beyond else (Verdict.VIOLATED, k, f)
        if isinstance(f, ImplG):
            ant = self.truth(f.antecedent)
            results = []
            for j in range(k, self.n):
                if ant[j] and (j == k or not ant[j - 1]):
                    results.append(self.at(f.body, j))
            return _combine(results)
        raise TypeError(f"cannot monitor {type(f).__name__} at the top level")


def _combine(results) -> tuple[Verdict, int | None, StlFormula | None]:
    bad = [r for r in results if r[0] is Verdict.VIOLATED]
    if bad:
        return min(bad, key=lambda r: r[1])
    unk = [r for r in results if r[0] is Verdict.INCONCLUSIVE]
    if unk:
        return min(unk, key=lambda r: r[1])
    return Verdict.SATISFIED, None, None


def monitor(trace: Trace, formula: StlFormula) -> MonitorResult:
    """Verdict of ``formula`` at time 0 of ``trace``.

    On violation, ``time`` and ``node`` locate the earliest failing obligation:
    the activation time for F and U, the first failing sample for G.
    """
    m = _Monitor(trace)
    verdict, k, node = m.at(formula, 0)
    t = None if k is None else k * trace.dt
    return MonitorResult(verdict, t, node)
