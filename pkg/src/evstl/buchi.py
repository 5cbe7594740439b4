"""LTL to nondeterministic Buchi automata, and lasso acceptance.

The translation is a tableau expansion in the style of Gerth, Peled, Vardi and
Wolper. States of the intermediate automaton are sets of pending obligations;
an expanded tableau node becomes a transition labelled with the conjunction of
its literals and marked with the until-formulas it fulfils (transition-based
generalized acceptance). A counter product then turns that into an automaton
with a single set of accepting states.

Obligations that share no subformula and no proposition are expanded
independently and combined as a product, so conjunctions of unrelated tasks do
not pay for each other's branching.
"""
from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from itertools import product
from typing import AbstractSet, Iterable, Sequence

from . import boolexpr as bx
from . import ltl
from ._graph import can_reach, on_accepting_cycle

log = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 100_000


class BuchiBlowUp(RuntimeError):
    """The automaton exceeded the configured state cap."""


@dataclass(frozen=True)
class Transition:
    src: str
    label: bx.BoolExpr
    dst: str


@dataclass
class BuchiAutomaton:
    states: list[str]
    initial: str
    transitions: list[Transition]
    accepting: frozenset[str]
    _out: dict = field(default=None, init=False, repr=False, compare=False)

    def out(self, state: str) -> list[Transition]:
        if self._out is None:
            table = defaultdict(list)
            for t in self.transitions:
                table[t.src].append(t)
            self._out = dict(table)
        return self._out.get(state, [])

    def props(self) -> frozenset[str]:
        return frozenset().union(*(t.label.variables() for t in self.transitions)) if self.transitions else frozenset()

    def dump(self) -> str:
        lines = [
            f"states {len(self.states)}",
            f"initial {self.initial}",
            "accepting " + " ".join(s for s in self.states if s in self.accepting),
        ]
        lines += [f"{t.src} -- {t.label.to_text()} --> {t.dst}" for t in self.transitions]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "initial": self.initial,
            "accepting": [s for s in self.states if s in self.accepting],
            "transitions": [[t.src, t.label.to_text(), t.dst] for t in self.transitions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BuchiAutomaton":
        labels: dict[str, bx.BoolExpr] = {}
        trans = []
        for src, text, dst in d["transitions"]:
            if text not in labels:
                labels[text] = bx.parse_bool(text)
            trans.append(Transition(src, labels[text], dst))
        return cls(list(d["states"]), d["initial"], trans, frozenset(d["accepting"]))


# -- tableau -------------------------------------------------------------------


class _Tableau:
    def __init__(self, formula: ltl.Ltl):
        self.nodes: list[tuple] = []
        self._ids: dict[ltl.Ltl, int] = {}
        self.root = self._intern(ltl.nnf(formula))
        self.untils = [i for i, n in enumerate(self.nodes) if n[0] == "U"]
        self._keys: dict[int, frozenset] = {}
        self._group_cache: dict[frozenset, list] = {}
        self._succ_cache: dict[frozenset, list] = {}

    def _intern(self, f: ltl.Ltl) -> int:
        if f in self._ids:
            return self._ids[f]
        if isinstance(f, ltl.Const):
            node = ("T",) if f.value else ("F",)
        elif isinstance(f, ltl.Prop):
            node = ("L", f.name, True)
        elif isinstance(f, ltl.Not):
            node = ("L", f.arg.name, False)
        elif isinstance(f, ltl.And):
            node = ("A", tuple(self._intern(a) for a in f.args))
        elif isinstance(f, ltl.Or):
            node = ("O", tuple(self._intern(a) for a in f.args))
        elif isinstance(f, ltl.Next):
            node = ("X", self._intern(f.arg))
        elif isinstance(f, ltl.Until):
            node = ("U", self._intern(f.left), self._intern(f.right))
        elif isinstance(f, ltl.Release):
            node = ("R", self._intern(f.left), self._intern(f.right))
        else:
            raise TypeError(f"unexpected node after NNF: {f!r}")
        self._ids[f] = len(self.nodes)
        self.nodes.append(node)
        return self._ids[f]

    def _key(self, i: int) -> frozenset:
        """Subformula ids and proposition names reachable from ``i``."""
        hit = self._keys.get(i)
        if hit is not None:
            return hit
        node = self.nodes[i]
        kind = node[0]
        # constants are shared by unrelated obligations and carry no state
        out = set() if kind in ("T", "F") else {i}
        if kind == "L":
            out.add(("v", node[1]))
        elif kind in ("A", "O"):
            for c in node[1]:
                out |= self._key(c)
        elif kind == "X":
            out |= self._key(node[1])
        elif kind in ("U", "R"):
            out |= self._key(node[1]) | self._key(node[2])
        key = frozenset(out)
        self._keys[i] = key
        return key

    def _components(self, obligations: frozenset) -> list[frozenset]:
        groups: list[tuple[set, set]] = []
        for f in sorted(obligations):
            key = set(self._key(f))
            members = {f}
            rest = []
            for gk, gm in groups:
                if gk & key:
                    key |= gk
                    members |= gm
                else:
                    rest.append((gk, gm))
            groups = rest + [(key, members)]
        return sorted((frozenset(m) for _, m in groups), key=min)

    def _expand(self, obligations: frozenset) -> list[tuple[dict, frozenset, frozenset]]:
        nodes = self.nodes
        out = []
        stack = [(list(sorted(obligations)), frozenset(), {}, frozenset())]
        while stack:
            todo, old, cube, nxt = stack.pop()
            alive = True
            while todo:
                f = todo.pop()
                if f in old:
                    continue
                old = old | {f}
                node = nodes[f]
                kind = node[0]
                if kind == "T":
                    continue
                if kind == "F":
                    alive = False
                    break
                if kind == "L":
                    _, name, pos = node
                    if cube.get(name, pos) != pos:
                        alive = False
                        break
                    if name not in cube:
                        cube = {**cube, name: pos}
                elif kind == "A":
                    todo = todo + list(node[1])
                elif kind == "X":
                    child = node[1]
                    if nodes[child][0] == "F":
                        alive = False
                        break
                    if nodes[child][0] != "T":
                        nxt = nxt | {child}
                elif kind == "O":
                    for c in reversed(node[1]):
                        stack.append((todo + [c], old, cube, nxt))
                    alive = False
                    break
                elif kind == "U":
                    _, left, right = node
                    stack.append((todo + [left], old, cube, nxt | {f}))
                    stack.append((todo + [right], old, cube, nxt))
                    alive = False
                    break
                elif kind == "R":
                    _, left, right = node
                    stack.append((todo + [right], old, cube, nxt | {f}))
                    stack.append((todo + [left, right], old, cube, nxt))
                    alive = False
                    break
            if alive:
                out.append((cube, old, nxt))
        return out

    def _groups(self, component: frozenset) -> list[tuple[frozenset, frozenset, bx.BoolExpr]]:
        hit = self._group_cache.get(component)
        if hit is not None:
            return hit
        by_target: dict[tuple, list] = defaultdict(list)
        for cube, old, nxt in self._expand(component):
            unfulfilled = frozenset(u for u in old if self.nodes[u][0] == "U" and self.nodes[u][2] not in old)
            by_target[(nxt, unfulfilled)].append(frozenset(cube.items()))
        groups = []
        for (nxt, unf), cubes in by_target.items():
            label = bx.from_cubes(dict(c) for c in bx._minimize(cubes))
            if label != bx.FALSE:
                groups.append((nxt, unf, label))
        groups.sort(key=lambda g: (len(g[0]), sorted(g[0]), sorted(g[1])))
        self._group_cache[component] = groups
        return groups

    def successors(self, obligations: frozenset) -> list[tuple[frozenset, frozenset, bx.BoolExpr]]:
        hit = self._succ_cache.get(obligations)
        if hit is not None:
            return hit
        per = [self._groups(c) for c in self._components(obligations)]
        out = []
        for combo in product(*per):
            nxt = frozenset().union(*(g[0] for g in combo))
            unf = frozenset().union(*(g[1] for g in combo))
            label = bx.conj(g[2] for g in combo)
            if label != bx.FALSE:
                out.append((nxt, unf, label))
        self._succ_cache[obligations] = out
        return out


def translate(formula: ltl.Ltl, state_cap: int = DEFAULT_STATE_CAP) -> BuchiAutomaton:
    """Build a Buchi automaton accepting exactly the models of ``formula``."""
    tab = _Tableau(formula)
    untils = tab.untils
    k = len(untils)
    start = (frozenset((tab.root,)), 0)
    names: dict[tuple, str] = {start: "s0"}
    order = [start]
    edges: dict[tuple[str, str], list[bx.BoolExpr]] = {}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        obligations, count = node
        src = names[node]
        for nxt, unf, label in tab.successors(obligations):
            j = 0 if count == k else count
            while j < k and untils[j] not in unf:
                j += 1
            target = (nxt, j)
            if target not in names:
                if len(names) >= state_cap:
                    raise BuchiBlowUp(f"automaton exceeds {state_cap} states; simplify the formula or raise the cap")
                names[target] = f"s{len(names)}"
                order.append(target)
                queue.append(target)
            edges.setdefault((src, names[target]), []).append(label)
    accepting = frozenset(names[n] for n in order if k == 0 or n[1] == k)
    transitions = [Transition(s, bx.disj(ls) if len(ls) > 1 else ls[0], d) for (s, d), ls in edges.items()]
    log.debug("translated %s: %d states, %d transitions", formula, len(order), len(transitions))
    return BuchiAutomaton([names[n] for n in order], "s0", transitions, accepting)


# -- lasso acceptance ----------------------------------------------------------


def _product_good(aut: BuchiAutomaton, letters: Sequence[frozenset], loop: int, cache: dict) -> set:
    """Product nodes (position, state) from which an accepting run exists."""
    n = len(letters)
    succ_pos = [i + 1 if i + 1 < n else loop for i in range(n)]
    succ: dict = {}
    pred: dict = defaultdict(list)
    nodes = [(i, s) for i in range(n) for s in aut.states]
    for i, s in nodes:
        letter = letters[i]
        outs = []
        for t in aut.out(s):
            key = (id(t.label), letter)
            ok = cache.get(key)
            if ok is None:
                ok = cache[key] = t.label.evaluate(letter)
            if ok:
                w = (succ_pos[i], t.dst)
                outs.append(w)
                pred[w].append((i, s))
        succ[(i, s)] = outs
    accepting = {v for v in nodes if v[1] in aut.accepting}
    fair = on_accepting_cycle(nodes, succ, accepting)
    return can_reach(fair, pred)


def accepts_lasso(aut: BuchiAutomaton, prefix: Sequence[AbstractSet[str]], cycle: Sequence[AbstractSet[str]]) -> bool:
    """True iff ``prefix . cycle^omega`` has an accepting run."""
    if not cycle:
        raise ValueError("cycle must be nonempty")
    letters = [frozenset(a) for a in prefix] + [frozenset(a) for a in cycle]
    good = _product_good(aut, letters, len(prefix), {})
    return (0, aut.initial) in good


class LassoAcceptor:
    """Batched :func:`accepts_lasso` for exhaustive suites.

    ``prefix . cycle^omega`` is accepted iff some state reached after reading
    ``prefix`` has an accepting run on ``cycle^omega``.
    """

    def __init__(self, aut: BuchiAutomaton):
        self.aut = aut
        self._cache: dict = {}

    def good_states(self, cycle: Sequence[frozenset]) -> frozenset[str]:
        good = _product_good(self.aut, [frozenset(a) for a in cycle], 0, self._cache)
        return frozenset(s for i, s in good if i == 0)

    def post(self, states: Iterable[str], letter: frozenset) -> frozenset[str]:
        out = set()
        for s in states:
            for t in self.aut.out(s):
                key = (id(t.label), letter)
                ok = self._cache.get(key)
                if ok is None:
                    ok = self._cache[key] = t.label.evaluate(letter)
                if ok:
                    out.add(t.dst)
        return frozenset(out)
