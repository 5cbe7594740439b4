"""Abstraction of an Event-based STL formula into untimed LTL.

Every predicate literal under a timed operator becomes a controllable
proposition that remembers its interval and the operator it sat under. Events
stay as they are. The resulting LTL formula is what the automaton is built from;
the proposition table is what the controller builds barrier functions from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import ltl
from .formula import (
    ALWAYS,
    EnvBool,
    EvAnd,
    EvNot,
    EvProp,
    ImplG,
    PredConj,
    Predicate,
    SpecAnd,
    StlFormula,
    TimedF,
    TimedG,
    TimedU,
    TimeInterval,
    events_of,
)

F_KIND = "F"
G_KIND = "G"
U_LEFT = "U-left"
U_RIGHT = "U-right"

_SUFFIX = {F_KIND: "", G_KIND: "_G", U_LEFT: "_UL", U_RIGHT: "_UR"}


@dataclass(frozen=True)
class ControlledProp:
    name: str
    pred: Predicate
    interval: TimeInterval
    kind: str
    # for U-left props: the U-right props whose satisfaction ends the obligation
    partners: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "predicate": self.pred.name,
            "negated": self.pred.negated,
            "interval": [self.interval.a, None if math.isinf(self.interval.b) else self.interval.b],
            "kind": self.kind,
            "partners": list(self.partners),
        }


@dataclass
class Abstraction:
    ltl: ltl.Ltl
    props: dict[str, ControlledProp]
    events: frozenset[str]


def _tag(v: float) -> str:
    if math.isinf(v):
        return "inf"
    s = str(int(v)) if float(v).is_integer() else repr(float(v))
    return s.replace(".", "p").replace("-", "m")


def _env(alpha: EnvBool) -> ltl.Ltl:
    if isinstance(alpha, EvProp):
        return ltl.Prop(alpha.name)
    if isinstance(alpha, EvNot):
        return ltl.Not(_env(alpha.arg))
    args = tuple(_env(a) for a in alpha.args)
    return ltl.And(args) if isinstance(alpha, EvAnd) else ltl.Or(args)


class _Abstractor:
    def __init__(self):
        self.props: dict[str, ControlledProp] = {}

    def prop(self, lit: Predicate, iv: TimeInterval, kind: str) -> str:
        stem = ("not_" if lit.negated else "") + lit.name
        base = f"p_{stem}_{_tag(iv.a)}_{_tag(iv.b)}{_SUFFIX[kind]}"
        name, k = base, 1
        while name in self.props:
            k += 1
            name = f"{base}_{k}"
        self.props[name] = ControlledProp(name, lit, iv, kind)
        return name

    def conj(self, p: PredConj, iv: TimeInterval, kind: str) -> tuple[ltl.Ltl, list[str]]:
        names = [self.prop(lit, iv, kind) for lit in p.literals]
        atoms = tuple(ltl.Prop(n) for n in names)
        return (atoms[0] if len(atoms) == 1 else ltl.And(atoms)), names

    def visit(self, f: StlFormula) -> ltl.Ltl:
        if isinstance(f, TimedF):
            return ltl.Eventually(self.conj(f.body, f.interval, F_KIND)[0])
        if isinstance(f, TimedG):
            return ltl.Always(self.conj(f.body, f.interval, G_KIND)[0])
        if isinstance(f, TimedU):
            left, lnames = self.conj(f.left, f.interval, U_LEFT)
            right, rnames = self.conj(f.right, f.interval, U_RIGHT)
            for n in lnames:
                p = self.props[n]
                self.props[n] = ControlledProp(p.name, p.pred, p.interval, p.kind, tuple(rnames))
            return ltl.Until(left, right)
        if isinstance(f, ImplG):
            if isinstance(f.antecedent, PredConj):
                ant = self.conj(f.antecedent, ALWAYS, G_KIND)[0]
            else:
                ant = _env(f.antecedent)
            return ltl.Always(ltl.Implies(ant, self.visit(f.body)))
        if isinstance(f, SpecAnd):
            return ltl.And(tuple(self.visit(a) for a in f.args))
        raise TypeError(f"not a specification node: {type(f).__name__}")


def abstract(spec: StlFormula) -> Abstraction:
    """Rewrite ``spec`` into untimed LTL plus the table of controllable propositions.

    Proposition names are ``p_<predicate>_<a>_<b>`` with a kind suffix for
    anything but F (``_G``, ``_UL``, ``_UR``); a repeated occurrence gets
    ``_2``, ``_3``... Names depend only on the formula, so abstracting twice
    yields the same table.
    """
    ab = _Abstractor()
    f = ab.visit(spec)
    return Abstraction(f, ab.props, frozenset(events_of(spec)))
