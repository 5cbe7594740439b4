"""Shared test utilities: random LTL, a reference lasso evaluator, lasso suites."""
from __future__ import annotations

import itertools
import random
from functools import lru_cache

from evstl import ltl
from evstl.buchi import LassoAcceptor, translate

PROPS = ("p", "q", "r")
LETTERS = [frozenset(c) for k in range(len(PROPS) + 1) for c in itertools.combinations(PROPS, k)]


def words(max_len, min_len=0, letters=LETTERS):
    for n in range(min_len, max_len + 1):
        yield from itertools.product(letters, repeat=n)


def random_ltl(rng: random.Random, props=PROPS, max_temporal=2, max_depth=4) -> ltl.Ltl:
    """Random formula with at most ``max_temporal`` temporal operators."""
    budget = [rng.randint(1, max_temporal)]

    def gen(depth):
        if depth == 0 or rng.random() < 0.25:
            if rng.random() < 0.08:
                return ltl.Const(rng.random() < 0.5)
            return ltl.Prop(rng.choice(props))
        ops = ["not", "and", "or", "implies"]
        if budget[0] > 0:
            ops += ["X", "F", "G", "U", "R"] * 2
        op = rng.choice(ops)
        if op in ("X", "F", "G", "U", "R"):
            budget[0] -= 1
        if op == "not":
            return ltl.Not(gen(depth - 1))
        if op == "and":
            return ltl.And((gen(depth - 1), gen(depth - 1)))
        if op == "or":
            return ltl.Or((gen(depth - 1), gen(depth - 1)))
        if op == "implies":
            return ltl.Implies(gen(depth - 1), gen(depth - 1))
        if op == "X":
            return ltl.Next(gen(depth - 1))
        if op == "F":
            return ltl.Eventually(gen(depth - 1))
        if op == "G":
            return ltl.Always(gen(depth - 1))
        if op == "U":
            return ltl.Until(gen(depth - 1), gen(depth - 1))
        return ltl.Release(gen(depth - 1), gen(depth - 1))

    return gen(max_depth)


def reference_holds(f: ltl.Ltl, prefix, cycle) -> bool:
    """LTL on ``prefix . cycle^omega`` by walking the lasso explicitly.

    Every position reachable from ``i`` shows up within ``n`` steps of the walk,
    so eventualities only need to look that far ahead.
    """
    letters = [frozenset(a) for a in prefix] + [frozenset(a) for a in cycle]
    n, loop = len(letters), len(prefix)

    def nxt(i):
        return i + 1 if i + 1 < n else loop

    def walk(i):
        out = []
        for _ in range(n):
            out.append(i)
            i = nxt(i)
        return out

    @lru_cache(maxsize=None)
    def sat(g, i):
        if isinstance(g, ltl.Const):
            return g.value
        if isinstance(g, ltl.Prop):
            return g.name in letters[i]
        if isinstance(g, ltl.Not):
            return not sat(g.arg, i)
        if isinstance(g, ltl.And):
            return all(sat(a, i) for a in g.args)
        if isinstance(g, ltl.Or):
            return any(sat(a, i) for a in g.args)
        if isinstance(g, ltl.Implies):
            return not sat(g.left, i) or sat(g.right, i)
        if isinstance(g, ltl.Next):
            return sat(g.arg, nxt(i))
        if isinstance(g, ltl.Eventually):
            return any(sat(g.arg, j) for j in walk(i))
        if isinstance(g, ltl.Always):
            return all(sat(g.arg, j) for j in walk(i))
        if isinstance(g, ltl.Until):
            for j in walk(i):
                if sat(g.right, j):
                    return True
                if not sat(g.left, j):
                    return False
            return False
        if isinstance(g, ltl.Release):
            # right holds until and including the first point where left holds
            for j in walk(i):
                if not sat(g.right, j):
                    return False
                if sat(g.left, j):
                    return True
            return True
        raise TypeError(g)

    return sat(f, 0)


def exhaustive_disagreements(f: ltl.Ltl, max_prefix=3, max_cycle=3, limit=5):
    """Compare the automaton of ``f`` with the direct semantics on every lasso.

    Returns (number of lassos checked, list of up to ``limit`` counterexamples).
    Prefixes are folded through the automaton once; cycles are grouped by the
    pair (states accepting on the cycle, oracle valuation at the cycle start).
    """
    aut = translate(f)
    acc = LassoAcceptor(aut)
    orc = ltl.LassoOracle(f)
    prefixes = list(words(max_prefix))
    after = {(): frozenset([aut.initial])}
    for w in prefixes:
        if w:
            after[w] = acc.post(after[w[:-1]], w[-1])
    groups: dict = {}
    for cyc in words(max_cycle, 1):
        key = (acc.good_states(cyc), orc.cycle_start(cyc))
        groups.setdefault(key, []).append(cyc)
    checked, bad = 0, []
    for (good, start), cycles in groups.items():
        for w in prefixes:
            expect = orc.holds(w, start)
            got = bool(after[w] & good)
            checked += len(cycles)
            if got != expect and len(bad) < limit:
                bad.append((str(f), w, cycles[0], got, expect))
    return checked, bad


def formula_suite(n: int, seed: int = 0, min_temporal: int = 1) -> list[ltl.Ltl]:
    """``n`` distinct random formulas with 1 or 2 temporal operators."""
    rng = random.Random(seed)
    seen, out = set(), []
    while len(out) < n:
        f = random_ltl(rng)
        text = str(f)
        if text in seen or ltl.temporal_depth_count(f) < min_temporal:
            continue
        seen.add(text)
        out.append(f)
    return out
