import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from evstl.abstraction import F_KIND, G_KIND, ControlledProp
from evstl.cbf import instantiate
from evstl.controller import QpInfeasible, Robot, solve_qp
from evstl.feedback import (
    FATAL,
    INADMISSIBLE_ENV,
    POSSIBLE_CONFLICT,
    QP_INFEASIBLE,
    UNREACHABLE,
    WARNING,
    FeedbackEvent,
    apriori_conflicts,
    apriori_inadmissible_env,
    disjoint,
    inadmissible_events,
    report_infeasible,
    runtime_check,
    speed_limit,
)
from evstl.formula import (
    Predicate,
    TimeInterval,
    Verdict,
    angle_abs_target,
    halfspace,
    monitor,
    pair_distance_min,
    sphere_inner,
    sphere_outer,
)
from evstl.sim import compile_scenario, run
from evstl.sim.engine import STOPPED
from evstl.sim.scenario import from_dict

from test_buchi import _hand_automaton
from test_planner import aut


def ball(c, r, neg=False, dims=(0, 1), name="b"):
    return Predicate(name, sphere_inner(list(dims), c, r), neg)


def test_disjoint_table():
    assert disjoint(ball([0, 0], 1), ball([3, 0], 1))
    assert disjoint(ball([0, 0], 1), ball([2, 0], 1))  # touching counts as disjoint
    assert not disjoint(ball([0, 0], 1), ball([1.9, 0], 1))
    # inner inside a forbidden ball
    assert disjoint(ball([0, 0], 1), ball([0.5, 0], 2, neg=True))
    assert not disjoint(ball([0, 0], 1), ball([1.5, 0], 2, neg=True))
    outer = Predicate("o", sphere_outer([0, 1], [0, 0], 3.0))
    assert disjoint(ball([0, 0], 1), outer) is True  # ball inside the excluded disc
    assert disjoint(ball([0, 0], 1), Predicate("o", outer.func, True)) is False
    assert disjoint(ball([5, 0], 1), Predicate("o", outer.func, True))
    # identical and other-robot pairs
    assert disjoint(ball([0, 0], 1), ball([0, 0], 1)) is False
    assert disjoint(ball([0, 0], 1), ball([9, 9], 1, dims=(2, 3))) is False
    assert disjoint(ball([0, 0], 1), Predicate("s", pair_distance_min([0, 1], [2, 3], 0.3))) is None


def test_disjoint_halfspaces_and_angles():
    right = Predicate("r", halfspace([0, 1], [1, 0], 1.0))  # x >= 1
    left = Predicate("l", halfspace([0, 1], [-1, 0], 0.0))  # x <= 0
    assert disjoint(right, left)
    assert not disjoint(right, Predicate("l2", halfspace([0, 1], [-1, 0], -2.0)))
    assert disjoint(right, ball([-2, 0], 1))
    assert not disjoint(right, ball([0.5, 0], 1))
    a = Predicate("a", angle_abs_target(2, 0.0, 0.2))
    b = Predicate("b", angle_abs_target(2, math.pi, 0.2))
    c = Predicate("c", angle_abs_target(2, 0.1, 0.2))
    assert disjoint(a, b) and not disjoint(a, c)


coord = st.floats(-5, 5, allow_nan=False)
radius = st.floats(0.1, 4)


@settings(max_examples=400)
@given(coord, coord, coord, coord, radius, radius, st.booleans())
def test_disjoint_flags_exactly_the_empty_pairs(x1, y1, x2, y2, r1, r2, outer):
    c1, c2 = np.array([x1, y1]), np.array([x2, y2])
    p, q = ball(c1, r1), ball(c2, r2, neg=outer)
    d = float(np.linalg.norm(c1 - c2))
    verdict = disjoint(p, q)
    if not outer:
        assert verdict == (d >= r1 + r2)
    else:
        assert verdict == (d + r1 <= r2)
    u = (c2 - c1) / d if d > 0 else np.array([1.0, 0.0])
    assume(abs(d - (r1 + r2)) > 1e-9 and abs(d + r1 - r2) > 1e-9)
    if not verdict:
        # a witness on the line through both centers
        s = min(r1, max(-r1, d - r2)) if not outer else -r1
        w = c1 + s * u
        assert p.h(w) >= -1e-9 and q.h(w) >= -1e-9
    else:
        # no sample of p's ball lies in q
        rng = np.random.default_rng(0)
        pts = c1 + r1 * np.sqrt(rng.random((500, 1))) * np.stack([np.cos(a := rng.uniform(0, 2 * np.pi, 500)), np.sin(a)], 1)
        assert all(q.h(x) < 1e-9 for x in pts)


def test_physical_demo_conflict(compiled):
    sc, c = compiled("physical_demo")
    conflicts = [e for e in c.feedback if e.kind == POSSIBLE_CONFLICT]
    assert len(conflicts) == 1
    e = conflicts[0]
    assert e.detail["predicates"] == ["alarm_goal", "goal1"] and e.severity == WARNING
    assert e.location["transitions"] and e.detail["conditions"]
    g1, ag = (sc.predicates[n] for n in ("goal1", "alarm_goal"))
    d = math.dist(g1.center, ag.center)
    assert d == pytest.approx(2 * math.sqrt(2)) and d > g1.radius + ag.radius
    assert ("goal1", "sep") in c.unchecked


def test_four_robot_conflicts(compiled):
    _, c = compiled("four_robot")
    pairs = sorted(tuple(e.detail["predicates"]) for e in c.feedback if e.kind == POSSIBLE_CONFLICT)
    assert pairs == [("approach_goal1", "goal1"), ("approach_goal3", "goal3")]
    assert all(any("approach" in cond for cond in e.detail["conditions"]) for e in c.feedback)


def test_no_conflict_for_same_or_separate_goals():
    func = sphere_inner([0, 1], [0, 0], 1)
    props = {
        "p": ControlledProp("p", Predicate("g", func), TimeInterval(0, 5), F_KIND),
        "q": ControlledProp("q", Predicate("g", func), TimeInterval(1, 6), F_KIND),
        "r": ControlledProp("r", ball([9, 9], 1, dims=(2, 3), name="far"), TimeInterval(0, 5), F_KIND),
    }
    a = aut([("s0", "p & q & r", "s0")], {"s0"})
    assert apriori_conflicts(a, props) == []


def test_conflict_lists_transitions_and_conditions():
    props = {
        "p": ControlledProp("p", ball([0, 0], 1, name="g1"), TimeInterval(0, 5), F_KIND),
        "q": ControlledProp("q", ball([5, 0], 1, name="g2"), TimeInterval(0, 5), F_KIND),
        "s": ControlledProp("s", Predicate("sep", pair_distance_min([0, 1], [2, 3], 0.3)), TimeInterval(0, 5), G_KIND),
    }
    a = aut([("s0", "(e & p & q) | (!e & p)", "s1"), ("s1", "p & q & s", "s1")], {"s1"})
    unchecked = []
    (e,) = apriori_conflicts(a, props, unchecked)
    assert e.location["transitions"] == ["s0->s1", "s1->s1"]
    assert e.detail["conditions"] == ["e", "true"]
    assert unchecked == [("g1", "sep"), ("g2", "sep")]


def test_inadmissible_env():
    assert apriori_inadmissible_env(_hand_automaton(), ["alarm"]) == {}
    a = aut([("s0", "true", "s1"), ("s1", "!e & p", "s1")], {"s1"})
    assert apriori_inadmissible_env(a, ["e"]) == {"s1": [frozenset({"e"})]}
    (ev,) = inadmissible_events(a, ["e"])
    assert ev.kind == INADMISSIBLE_ENV and ev.location == {"state": "s1"} and ev.detail["events"] == [["e"]]
    with pytest.raises(ValueError):
        apriori_inadmissible_env(a, [f"e{i}" for i in range(13)])
    assert apriori_inadmissible_env(a, [f"e{i}" for i in range(3)], cap=3) == {}


def _robot(dims=(0, 1), u=(0.7, 0.7)):
    return Robot("r", dims, -np.array(u), np.array(u))


def _active(func, a, b, t_int, x, kind=F_KIND):
    return instantiate(ControlledProp("goal", Predicate("goal", func), TimeInterval(a, b), kind), t_int, x)


def test_runtime_unreachable():
    c = _active(sphere_inner([0, 1], [20, 20], 1), 0, 10, 0.0, [0, 0])
    (e,) = runtime_check([c], np.zeros(2), 0.0, [_robot()])
    assert e.kind == UNREACHABLE and e.fatal and e.time == 0.0
    assert e.detail["distance"] == pytest.approx(math.sqrt(800) - 1)
    assert round(e.detail["distance"], 2) == 27.28
    assert e.detail["budget"] == pytest.approx(0.7 * math.sqrt(2) * 10)


def test_runtime_inside_and_boundary():
    c = _active(sphere_inner([0, 1], [20, 20], 1), 0, 10, 0.0, [0, 0])
    assert runtime_check([c], np.array([20.0, 20.5]), 1.0, [_robot()]) == []
    # distance exactly equal to the budget is still reachable
    c = _active(sphere_inner([0], [4.0], 1.0), 0, 3, 0.0, [0.0])
    r = Robot("r", (0,), [-1.0], [1.0])
    assert runtime_check([c], np.array([0.0]), 0.0, [r]) == []
    assert runtime_check([c], np.array([-1e-9]), 0.0, [r])[0].kind == UNREACHABLE
    # invariant kinds and discharged obligations are not checked
    g = _active(sphere_inner([0], [40.0], 1.0), 0, 3, 0.0, [0.0], G_KIND)
    assert runtime_check([g], np.array([0.0]), 0.0, [r]) == []
    far = _active(sphere_inner([0], [40.0], 1.0), 0, 3, 0.0, [0.0])
    assert runtime_check([far], np.array([0.0]), 0.0, [r], discharged={"goal"}) == []



def test_runtime_box_reach():
    # the straight-line budget allows it, but every point of the ball has y >= 3.25 > 0.625 * 5
    c = _active(sphere_inner([0, 1], [1.0, 4.5], 1.25), 0, 5, 0.0, [0, 0])
    r = _robot(u=(0.625, 0.625))
    (e,) = runtime_check([c], np.zeros(2), 0.0, [r])
    assert e.kind == UNREACHABLE and e.detail["distance"] < e.detail["budget"]
    assert e.detail["box_miss"] == pytest.approx(0.125)
    # a diagonal goal stays reachable while the corner of the box is inside it
    c = _active(sphere_inner([0, 1], [3.0, 3.0], 0.1), 0, 2.95, 0.0, [0, 0])
    assert runtime_check([c], np.zeros(2), 0.0, [_robot(u=(1, 1))]) == []
    assert runtime_check([c], np.zeros(2), 0.1, [_robot(u=(1, 1))])[0].kind == UNREACHABLE
    # negated goals have no single target, so only the straight-line budget applies
    far = instantiate(ControlledProp("goal", Predicate("goal", sphere_inner([0, 1], [0, 0], 1), True), TimeInterval(0, 2), F_KIND), 0.0, [0, 0])
    assert runtime_check([far], np.zeros(2), 0.0, [r]) == []


@settings(max_examples=200)
@given(
    st.tuples(st.floats(-8, 8), st.floats(-8, 8)),
    st.floats(0.1, 2),
    st.tuples(st.floats(0.1, 1.5), st.floats(0.1, 1.5)),
    st.floats(0.5, 8),
)
def test_runtime_box_reach_is_exact(center, radius, caps, horizon):
    """It fires exactly when no constant input in the box reaches the ball by the deadline."""
    c = _active(sphere_inner([0, 1], center, radius), 0, horizon, 0.0, [0, 0])
    r = _robot(u=caps)
    fired = bool(runtime_check([c], np.zeros(2), 0.0, [r]))
    # with no drift the best constant input heads for the nearest reachable point
    best = horizon * np.clip(np.array(center) / horizon, r.lower, r.upper)
    miss = np.linalg.norm(best - center) - radius
    assume(abs(miss) > 1e-9)
    assert fired == (miss > 0)
    if fired:
        rng = np.random.default_rng(0)
        ends = horizon * rng.uniform(r.lower, r.upper, (2000, 2))
        assert (np.linalg.norm(ends - center, axis=1) > radius).all()

def test_runtime_check_is_monotone(rng):
    robots = [_robot(u=(0.5, 0.9))]
    assert speed_limit((0, 1), robots) == pytest.approx(math.hypot(0.5, 0.9))
    for _ in range(50):
        c = _active(sphere_inner([0, 1], rng.uniform(-10, 10, 2), 1), 0, rng.uniform(1, 10), 0.0, [0, 0])
        x = rng.uniform(-10, 10, 2)
        fired = [bool(runtime_check([c], x, t, robots)) for t in np.linspace(0, c.end, 40)]
        assert all(b or not a for a, b in zip(fired, fired[1:]))


def test_report_infeasible():
    lo, hi = -np.ones(2), np.ones(2)
    # x >= 0.9 and x <= -0.9 folded into one demand that cannot be met
    with pytest.raises(QpInfeasible) as err:
        solve_qp([0, 0], (np.array([1.0, 1.0]), 2.5), lo, hi)
    e = report_infeasible(3.2, err.value)
    assert e.kind == QP_INFEASIBLE and e.severity == FATAL and e.time == 3.2
    assert e.detail["rhs"] == 2.5 and e.detail["upper"] == [1, 1]
    assert FeedbackEvent.from_dict(e.to_dict()) == e


def test_feasible_run_has_no_feedback(compiled):
    sc, c = compiled("single_robot")
    assert run(sc, c).feedback == []


def test_conflict_scenario_stops(compiled):
    """Raising the alarm before the first goal is reached asks for both distant goals at once."""
    sc, c = compiled("physical_demo")
    log = run(sc, c, lambda t: {"alarm"} if t >= 1.2 else set())
    assert log.status == STOPPED
    assert log.feedback[-1].fatal and log.feedback[-1].kind in (QP_INFEASIBLE, UNREACHABLE)


def _goal_scenario(goal, radius, speed, b):
    return from_dict({
        "name": "reach",
        "dt": 0.1,
        "horizon": b + 1,
        "robots": [{"name": "r1", "state": ["x", "y"], "x0": [0, 0], "u_max": [speed, speed]}],
        "predicates": {"goal": {"kind": "sphere-inner", "robot": "r1", "dims": ["x", "y"], "center": goal, "radius": radius}},
        "events": [],
        "formula": f"F[0,{b}](goal)",
    })


@settings(max_examples=20, deadline=None)
@given(st.tuples(st.floats(-8, 8), st.floats(-8, 8)), st.floats(0.3, 2), st.floats(0.2, 1.5), st.sampled_from([3, 6, 10]))
def test_runtime_soundness(goal, radius, speed, b):
    sc = _goal_scenario(list(goal), radius, speed, b)
    log = run(sc, compile_scenario(sc))
    if log.status != STOPPED:
        assert monitor(log.trace(), sc.formula).verdict is Verdict.SATISFIED
    else:
        assert log.feedback[-1].fatal
