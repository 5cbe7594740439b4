"""Symbolic planning over the automaton: which transition to take next and
which controllable propositions must be made true to take it."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import AbstractSet, Iterable, Mapping

from . import boolexpr as bx
from ._graph import backward_distances, on_accepting_cycle
from .abstraction import ControlledProp
from .buchi import BuchiAutomaton, Transition


class PlanningError(RuntimeError):
    pass


class InadmissibleEnvironment(PlanningError):
    """No outgoing transition of the current state agrees with the sensed events."""

    def __init__(self, state: str, sigma: AbstractSet[str]):
        super().__init__(f"no transition out of {state} is allowed when events are {sorted(sigma)}")
        self.state = state
        self.sigma = frozenset(sigma)


class SpecificationUnrealizable(PlanningError):
    """No accepting state with a cycle is reachable from the current state."""

    def __init__(self, state: str):
        super().__init__(f"no accepting cycle is reachable from {state}")
        self.state = state


def eval_props(x, sigma: AbstractSet[str], props: Mapping[str, ControlledProp]) -> frozenset[str]:
    """Propositions true at ``(x, sigma)``: the sensed events plus every
    controllable proposition whose predicate is nonnegative. Timing is ignored."""
    return frozenset(sigma) | frozenset(n for n, p in props.items() if p.pred.h(x) >= 0)


def minimal_true_sets(label: bx.BoolExpr, env: Mapping[str, bool]) -> list[frozenset[str]]:
    """Minimal sets of the remaining propositions that, made true with all
    others false, satisfy ``label`` under ``env``. Smallest first, then by name."""
    cubes = label.restrict(env).dnf()
    if not cubes:
        raise ValueError(f"label {label} is unsatisfiable under {dict(env)}")
    sets = {frozenset(n for n, v in c.items() if v) for c in cubes}
    kept: list[frozenset[str]] = []
    for s in sorted(sets, key=lambda s: (len(s), sorted(s))):
        if not any(k <= s for k in kept):
            kept.append(s)
    return kept


@dataclass
class PlannerState:
    curr: str
    transition: Transition | None = None
    active: frozenset[str] = frozenset()
    sigma_prev: frozenset[str] | None = None


@dataclass
class Planner:
    """Chooses transitions of ``aut`` for the sensed events and the current state.

    The chosen transition starts the shortest path, through transitions the
    current events allow, to an accepting state that lies on a cycle. Ties go
    to the transition needing fewer controllable propositions, then to the
    earlier target state.
    """

    aut: BuchiAutomaton
    props: Mapping[str, ControlledProp]
    events: frozenset[str]
    state: PlannerState = field(init=False)

    def __post_init__(self):
        self.events = frozenset(self.events) | (self.aut.props() - set(self.props))
        self._order = {s: i for i, s in enumerate(self.aut.states)}
        succ = {s: [t.dst for t in self.aut.out(s)] for s in self.aut.states}
        self.good = frozenset(on_accepting_cycle(self.aut.states, succ, set(self.aut.accepting)))
        self._dist_cache: dict[frozenset, dict] = {}
        self._sets_cache: dict = {}
        self._sat_cache: dict = {}
        self._holds_cache: dict = {}
        self.state = PlannerState(self.aut.initial)

    def reset(self) -> None:
        self.state = PlannerState(self.aut.initial)

    def env(self, sigma: AbstractSet[str]) -> dict[str, bool]:
        return {e: e in sigma for e in self.events}

    def _satisfiable(self, label: bx.BoolExpr, env_key: frozenset) -> bool:
        key = (label, env_key)
        hit = self._sat_cache.get(key)
        if hit is None:
            hit = self._sat_cache[key] = label.satisfiable({e: e in env_key for e in self.events})
        return hit

    def _allowed(self, t: Transition, env_key: frozenset) -> list[frozenset[str]] | None:
        if not self._satisfiable(t.label, env_key):
            return None
        key = (t.label, env_key)
        if key not in self._sets_cache:
            self._sets_cache[key] = minimal_true_sets(t.label, {e: e in env_key for e in self.events})
        return self._sets_cache[key]

    def _distances(self, env_key: frozenset) -> dict[str, int]:
        """Steps to a good state using only transitions the events allow."""
        hit = self._dist_cache.get(env_key)
        if hit is None:
            pred: dict[str, list[str]] = {}
            for t in self.aut.transitions:
                if self._satisfiable(t.label, env_key):
                    pred.setdefault(t.dst, []).append(t.src)
            hit = self._dist_cache[env_key] = backward_distances(self.good, pred)
        return hit

    def _structural(self) -> dict[str, int]:
        hit = self._dist_cache.get(None)
        if hit is None:
            pred: dict[str, list[str]] = {}
            for t in self.aut.transitions:
                pred.setdefault(t.dst, []).append(t.src)
            hit = self._dist_cache[None] = backward_distances(self.good, pred)
        return hit

    def choose(self, curr: str, sigma: AbstractSet[str]) -> tuple[Transition, frozenset[str]]:
        env_key = frozenset(sigma) & self.events
        options = [(t, sets) for t in self.aut.out(curr) if (sets := self._allowed(t, env_key)) is not None]
        if not options:
            raise InadmissibleEnvironment(curr, env_key)
        # events may change later, so after the first step fall back to any path
        for dist in (self._distances(env_key), self._structural()):
            ranked = [
                (1 + dist[t.dst], len(sets[0]), self._order[t.dst], i)
                for i, (t, sets) in enumerate(options)
                if t.dst in dist
            ]
            if ranked:
                i = min(ranked)[3]
                t, sets = options[i]
                return t, sets[0]
        raise SpecificationUnrealizable(curr)

    def label_holds(self, x_props: AbstractSet[str], sigma: AbstractSet[str]) -> bool:
        """Whether the active transition is taken by the observed letter.

        Every proposition takes its observed value, activated or not, so the
        tracked state is always the state of a real run of the automaton.
        """
        st = self.state
        if st.transition is None:
            return False
        letter = (frozenset(sigma) & self.events) | (frozenset(x_props) - self.events)
        key = (st.transition.label, letter)
        hit = self._holds_cache.get(key)
        if hit is None:
            hit = self._holds_cache[key] = st.transition.label.evaluate(letter)
        return hit

    def needs_replan(self, x, sigma: AbstractSet[str]) -> bool:
        sigma = frozenset(sigma)
        if self.state.transition is None or sigma != self.state.sigma_prev:
            return True
        return self.label_holds(eval_props(x, sigma, self.props), sigma)

    def find_transition(self, sigma: AbstractSet[str], x) -> tuple[Transition, frozenset[str], str]:
        """Advance along the active transition if it holds, then pick the next one."""
        sigma = frozenset(sigma)
        st = self.state
        if st.transition is not None and self.label_holds(eval_props(x, sigma, self.props), sigma):
            st.curr = st.transition.dst
        t, active = self.choose(st.curr, sigma)
        st.transition, st.active, st.sigma_prev = t, active, sigma
        return t, active, st.curr

    @property
    def accepting(self) -> bool:
        return self.state.curr in self.good


def admissible_start(aut: BuchiAutomaton, props: Mapping[str, ControlledProp], events: Iterable[str], x, sigma) -> bool:
    """Whether some transition out of the initial state agrees with the initial
    events and the initial values of the controllable propositions."""
    true = eval_props(x, sigma, props)
    fixed = {e: e in true for e in set(events) | (aut.props() - set(props))}
    fixed.update({p: p in true for p in props})
    return any(t.label.satisfiable(fixed) for t in aut.out(aut.initial))
