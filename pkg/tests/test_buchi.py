import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evstl import boolexpr as bx
from evstl import ltl
from evstl.abstraction import abstract
from evstl.buchi import BuchiAutomaton, BuchiBlowUp, LassoAcceptor, Transition, accepts_lasso, translate
from evstl.ltl import LassoOracle, ltl_holds_on_lasso, parse_ltl

from helpers import LETTERS, exhaustive_disagreements, formula_suite, random_ltl, reference_holds, words

P = "p_near55_0_10"
ALPHA = [frozenset(c) for k in range(3) for c in itertools.combinations(("alarm", P), k)]


def _hand_automaton():
    """Three-state automaton for G(alarm -> F goal): s1 accepting, s2 waits for the goal."""
    ok = bx.parse_bool(f"!alarm | {P}")
    pending = bx.parse_bool(f"alarm & !{P}")
    trans = [
        Transition("s0", bx.parse_bool(f"!alarm & !{P}"), "s1"),
        Transition("s0", bx.parse_bool(P), "s1"),
        Transition("s0", pending, "s2"),
        Transition("s1", ok, "s1"),
        Transition("s1", pending, "s2"),
        Transition("s2", bx.parse_bool(f"!{P}"), "s2"),
        Transition("s2", bx.parse_bool(P), "s1"),
    ]
    return BuchiAutomaton(["s0", "s1", "s2"], "s0", trans, frozenset({"s1"}))


def _lassos(alphabet, max_total):
    for total in range(1, max_total + 1):
        for cut in range(total):
            for w in itertools.product(alphabet, repeat=total):
                yield w[:cut], w[cut:]


def test_single_robot_language_matches_hand_automaton(alarm_formula):
    ours = translate(abstract(alarm_formula).ltl)
    hand = _hand_automaton()
    a, b = LassoAcceptor(ours), LassoAcceptor(hand)
    pre_a, pre_b = {(): frozenset([ours.initial])}, {(): frozenset([hand.initial])}
    good_a, good_b = {}, {}
    n = 0
    for prefix, cycle in _lassos(ALPHA, 6):
        for i in range(len(prefix)):
            key = prefix[: i + 1]
            if key not in pre_a:
                pre_a[key] = a.post(pre_a[prefix[:i]], prefix[i])
                pre_b[key] = b.post(pre_b[prefix[:i]], prefix[i])
        if cycle not in good_a:
            good_a[cycle], good_b[cycle] = a.good_states(cycle), b.good_states(cycle)
        assert bool(pre_a[prefix] & good_a[cycle]) == bool(pre_b[prefix] & good_b[cycle]), (prefix, cycle)
        n += 1
    assert n == sum(t * 4**t for t in range(1, 7))


def test_hand_automaton_is_a_model_of_the_formula(alarm_formula):
    f = abstract(alarm_formula).ltl
    hand = _hand_automaton()
    for prefix, cycle in _lassos(ALPHA, 4):
        assert accepts_lasso(hand, prefix, cycle) == ltl_holds_on_lasso(f, prefix, cycle)


@pytest.mark.parametrize(
    "text, prefix, cycle, expect",
    [
        ("G p", [], [{"p"}], True),
        ("G p", [{"p"}], [{}], False),
        ("F p", [{"p"}], [{}], True),
        ("F p", [], [{}], False),
        ("G F p", [{}], [{}, {"p"}], True),
        ("F G p", [{}], [{}, {"p"}], False),
        ("p U q", [{"p"}, {"p"}], [{"q"}], True),
        ("p U q", [{"p"}, {}], [{"q"}], False),
        ("X p", [{}], [{"p"}], True),
        ("G(p & !p)", [], [{"p"}], False),
        ("true", [], [{}], True),
    ],
)
def test_acceptance_examples(text, prefix, cycle, expect):
    f = parse_ltl(text)
    assert accepts_lasso(translate(f), prefix, cycle) is expect
    assert ltl_holds_on_lasso(f, prefix, cycle) is expect


def test_contradiction_has_no_accepting_run():
    aut = translate(parse_ltl("G(p & !p)"))
    for prefix, cycle in _lassos([frozenset(), frozenset({"p"})], 4):
        assert not accepts_lasso(aut, prefix, cycle)


def test_empty_cycle_rejected():
    with pytest.raises(ValueError):
        accepts_lasso(translate(parse_ltl("F p")), [], [])
    with pytest.raises(ValueError):
        ltl_holds_on_lasso(parse_ltl("F p"), [], [])


def test_labels_use_formula_props_and_are_satisfiable():
    for f in formula_suite(60, seed=7):
        aut = translate(f)
        assert aut.props() <= f.props()
        assert all(t.label.satisfiable() for t in aut.transitions)
        assert aut.initial in aut.states
        assert aut.accepting <= set(aut.states)


def test_state_cap():
    f = parse_ltl(" & ".join(f"F p{i}" for i in range(8)))
    with pytest.raises(BuchiBlowUp):
        translate(f, state_cap=20)


def test_round_trip_and_dump():
    aut = translate(parse_ltl("G(a -> F b) & G F c"))
    back = BuchiAutomaton.from_dict(aut.to_dict())
    assert back.to_dict() == aut.to_dict()
    assert back.dump() == aut.dump()
    head = aut.dump().splitlines()
    assert head[0] == f"states {len(aut.states)}" and head[1] == "initial s0"
    assert len(head) == 3 + len(aut.transitions)


def test_pruning_is_sound():
    """Adding transitions with contradictory labels never changes acceptance."""
    rng = random.Random(3)
    for f in formula_suite(20, seed=11):
        aut = translate(f)
        junk = [
            Transition(rng.choice(aut.states), bx.parse_bool("p & !p"), rng.choice(aut.states)) for _ in range(5)
        ]
        padded = BuchiAutomaton(aut.states, aut.initial, aut.transitions + junk, aut.accepting)
        for prefix, cycle in _lassos(LETTERS[:4], 3):
            assert accepts_lasso(aut, prefix, cycle) == accepts_lasso(padded, prefix, cycle)


def test_oracles_agree():
    """The library oracle and the test-side walk evaluator agree."""
    rng = random.Random(5)
    for _ in range(80):
        f = random_ltl(rng)
        orc = LassoOracle(f)
        for prefix, cycle in _lassos(LETTERS[::2], 3):
            expect = reference_holds(f, prefix, cycle)
            assert ltl_holds_on_lasso(f, prefix, cycle) == expect, (str(f), prefix, cycle)
            assert orc.holds(prefix, orc.cycle_start(cycle)) == expect


def test_translation_small_random_suite():
    for f in formula_suite(40, seed=99):
        checked, bad = exhaustive_disagreements(f)
        assert checked == sum(8**k for k in range(4)) * sum(8**k for k in range(1, 4))
        assert not bad, bad


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_translation_agrees_on_random_lassos(seed):
    rng = random.Random(seed)
    f = random_ltl(rng)
    aut = translate(f)
    for _ in range(10):
        prefix = [rng.choice(LETTERS) for _ in range(rng.randint(0, 4))]
        cycle = [rng.choice(LETTERS) for _ in range(rng.randint(1, 4))]
        assert accepts_lasso(aut, prefix, cycle) == reference_holds(f, prefix, cycle)


def test_words_helper():
    assert sum(1 for _ in words(2)) == 1 + 8 + 64
    assert ltl.temporal_depth_count(parse_ltl("G(a -> F b)")) == 2
