"""Feasibility feedback: warnings before execution, fatal reports during it."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import boolexpr as bx
from .abstraction import ControlledProp
from .buchi import BuchiAutomaton
from .cbf import ActiveCbf, shrinks
from .controller import QpInfeasible, Robot
from .formula import Predicate

POSSIBLE_CONFLICT = "PossibleConflict"
INADMISSIBLE_ENV = "InadmissibleEnv"
UNREACHABLE = "Unreachable"
QP_INFEASIBLE = "QpInfeasible"

WARNING = "warning"
FATAL = "fatal"

DEFAULT_ENV_CAP = 12


@dataclass
class FeedbackEvent:
    kind: str
    severity: str
    location: dict
    detail: dict
    time: float | None = None

    @property
    def fatal(self) -> bool:
        return self.severity == FATAL

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "severity": self.severity, "location": self.location, "detail": self.detail}
        if self.time is not None:
            out["time"] = self.time
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackEvent":
        return cls(d["kind"], d["severity"], d["location"], d["detail"], d.get("time"))

    def summary(self) -> str:
        where = self.location.get("transitions") or self.location.get("state") or self.location.get("robot")
        at = "" if self.time is None else f" t={self.time:g}"
        return f"[{self.severity}] {self.kind}{at}: {self.detail.get('message', '')} {'' if where is None else where}".rstrip()


# -- pairwise emptiness of predicate sets ------------------------------------------


def _shape(pred: Predicate):
    """(kind, params) of the set {h >= 0} for the literal, negation folded in.

    Negations of norm kinds swap inner and outer; the boundary is ignored, which
    only matters for sets that touch.
    """
    f = pred.func
    kind = f.kind
    if not pred.negated:
        return kind, f.params
    if kind == "sphere-inner":
        return "sphere-outer", f.params
    if kind == "sphere-outer":
        return "sphere-inner", f.params
    if kind == "halfspace":
        return "halfspace", tuple(-v for v in f.params)
    return "negated-" + kind, f.params


def _angle_intervals(target: float, tol: float) -> list[tuple[float, float]]:
    lo, hi = target - tol, target + tol
    if lo <= 0:
        return [(-hi, hi)]
    return [(-hi, -lo), (lo, hi)]


def disjoint(p: Predicate, q: Predicate) -> bool | None:
    """True if the two literal sets provably never intersect, False if they do
    or may, None if the pair cannot be checked (pair-distance predicates)."""
    if "pair-distance-min" in (p.func.kind, q.func.kind):
        return None
    if not set(p.func.dims) & set(q.func.dims):
        return False
    if p == q or p.func.dims != q.func.dims:
        return False
    (k1, a), (k2, b) = _shape(p), _shape(q)
    if k1 > k2:
        (k1, a), (k2, b) = (k2, b), (k1, a)
    if k1 == "sphere-inner" and k2 == "sphere-inner":
        d = math.dist(a[:-1], b[:-1])
        return d >= a[-1] + b[-1]
    if k1 == "sphere-inner" and k2 == "sphere-outer":
        d = math.dist(a[:-1], b[:-1])
        return d + a[-1] <= b[-1]
    if k1 == "halfspace" and k2 == "sphere-inner":
        normal = np.asarray(a[:-1])
        return float(normal @ np.asarray(b[:-1])) + b[-1] * float(np.linalg.norm(normal)) < a[-1]
    if k1 == "halfspace" and k2 == "halfspace":
        n1, n2 = np.asarray(a[:-1]), np.asarray(b[:-1])
        l1, l2 = np.linalg.norm(n1), np.linalg.norm(n2)
        if l1 == 0 or l2 == 0 or not np.allclose(n1 / l1, -n2 / l2):
            return False
        return a[-1] / l1 + b[-1] / l2 > 0
    if k1 == "angle-abs-target" and k2 == "angle-abs-target":
        return not any(
            max(x0, y0) <= min(x1, y1)
            for (x0, x1), (y0, y1) in itertools.product(_angle_intervals(*a), _angle_intervals(*b))
        )
    return False


# -- a-priori checks -------------------------------------------------------------


def _required_sets(label: bx.BoolExpr, controlled: set[str]) -> list[tuple[frozenset[str], dict]]:
    """Per DNF cube: the controllable props it forces true and its event literals."""
    out = []
    for cube in label.dnf():
        need = frozenset(n for n, v in cube.items() if v and n in controlled)
        env = {n: v for n, v in cube.items() if n not in controlled}
        out.append((need, env))
    return out


def apriori_conflicts(aut: BuchiAutomaton, props: Mapping[str, ControlledProp], unchecked: list | None = None) -> list[FeedbackEvent]:
    """Warn about transitions whose required predicates cannot hold together.

    One event per predicate pair, listing every transition and event condition
    under which both are required. Timing is ignored, so the warning is
    conservative. Pairs involving pair-distance predicates are appended to
    ``unchecked`` instead.
    """
    controlled = set(props)
    hits: dict[tuple, dict] = {}
    skipped: set[tuple] = set()
    per_label: dict = {}
    for t in aut.transitions:
        if t.label not in per_label:
            per_label[t.label] = _required_sets(t.label, controlled)
        for need, env in per_label[t.label]:
            for n1, n2 in itertools.combinations(sorted(need), 2):
                p, q = props[n1].pred, props[n2].pred
                verdict = disjoint(p, q)
                key = tuple(sorted((p.label, q.label)))
                if verdict is None:
                    if set(p.func.dims) & set(q.func.dims):
                        skipped.add(key)
                    continue
                if not verdict:
                    continue
                entry = hits.setdefault(key, {"transitions": [], "conditions": [], "props": set()})
                edge = f"{t.src}->{t.dst}"
                if edge not in entry["transitions"]:
                    entry["transitions"].append(edge)
                cond = " & ".join(("" if v else "!") + n for n, v in sorted(env.items())) or "true"
                if cond not in entry["conditions"]:
                    entry["conditions"].append(cond)
                entry["props"].update((n1, n2))
    if unchecked is not None:
        unchecked.extend(sorted(skipped))
    events = []
    for (a, b), entry in sorted(hits.items()):
        events.append(FeedbackEvent(
            POSSIBLE_CONFLICT,
            WARNING,
            {"transitions": entry["transitions"]},
            {
                "predicates": [a, b],
                "props": sorted(entry["props"]),
                "conditions": entry["conditions"],
                "message": f"{a} and {b} cannot hold at the same time but some transitions require both",
            },
        ))
    return events


def apriori_inadmissible_env(aut: BuchiAutomaton, events: Iterable[str], cap: int = DEFAULT_ENV_CAP) -> dict[str, list[frozenset[str]]]:
    """Per state, the event sets under which no outgoing transition can be taken,
    whatever the controllable propositions do."""
    events = sorted(events)
    if len(events) > cap:
        raise ValueError(f"{len(events)} events exceed the enumeration cap of {cap}")
    out: dict[str, list[frozenset[str]]] = {}
    for s in aut.states:
        labels = [t.label for t in aut.out(s)]
        bad = []
        for bits in itertools.product((False, True), repeat=len(events)):
            env = dict(zip(events, bits))
            if not any(lab.satisfiable(env) for lab in labels):
                bad.append(frozenset(e for e, v in env.items() if v))
        if bad:
            out[s] = bad
    return out


def inadmissible_events(aut: BuchiAutomaton, events: Iterable[str], cap: int = DEFAULT_ENV_CAP) -> list[FeedbackEvent]:
    return [
        FeedbackEvent(
            INADMISSIBLE_ENV,
            WARNING,
            {"state": s},
            {"events": [sorted(c) for c in combos], "message": f"no transition out of {s} is allowed for these event sets"},
        )
        for s, combos in apriori_inadmissible_env(aut, events, cap).items()
    ]


# -- runtime checks --------------------------------------------------------------


def speed_limit(dims: Sequence[int], robots: Sequence[Robot]) -> float:
    """Euclidean norm of the largest input magnitude on ``dims``."""
    caps = {}
    for r in robots:
        for k, d in enumerate(r.dims):
            caps[d] = max(abs(r.lower[k]), abs(r.upper[k]))
    return float(np.linalg.norm([caps[d] for d in dims]))


def _box_miss(pred: Predicate, x, horizon: float, robots: Sequence[Robot]) -> float:
    """How far a ball goal stays outside everything reachable within ``horizon``; 0 if reachable.

    Only plain sphere-inner goals are checked. A dim with no declared bounds
    makes the reachable set unbounded.
    """
    func = pred.func
    if func.kind != "sphere-inner" or pred.negated:
        return 0.0
    lo, hi = {}, {}
    for r in robots:
        for k, d in enumerate(r.dims):
            lo[d], hi[d] = float(r.lower[k]), float(r.upper[k])
    if any(d not in lo for d in func.dims):
        return 0.0
    x = np.asarray(x, dtype=float)
    here = x[list(func.dims)]
    box_lo = here + horizon * np.array([lo[d] for d in func.dims])
    box_hi = here + horizon * np.array([hi[d] for d in func.dims])
    nearest = np.clip(func.center, box_lo, box_hi)
    return max(0.0, float(np.linalg.norm(nearest - func.center)) - func.radius)


def runtime_check(cbfs: Iterable[ActiveCbf], x, t: float, robots: Sequence[Robot], discharged: Iterable[str] = ()) -> list[FeedbackEvent]:
    """Report eventually-type obligations that can no longer be met in time.

    The distance to satisfaction is ``max(0, -h(x))``; it is compared with how
    far the robot can travel before the deadline at full speed. Ball goals are
    also checked against the exact reachable box ``x + T [lower, upper]``,
    which catches goals that only a diagonal move at full speed on every axis
    could reach.
    """
    done = set(discharged)
    out = []
    for c in cbfs:
        if not shrinks(c.prop.kind) or c.prop.name in done or t > c.end:
            continue
        gap = max(0.0, -c.prop.pred.h(x))
        budget = speed_limit(c.prop.pred.func.dims, robots) * (c.end - t)
        miss = _box_miss(c.prop.pred, x, c.end - t, robots)
        if gap > budget or miss > 0:
            out.append(FeedbackEvent(
                UNREACHABLE,
                FATAL,
                {"prop": c.prop.name},
                {
                    "distance": gap,
                    "budget": budget,
                    "box_miss": miss,
                    "deadline": c.end,
                    "message": f"{c.prop.pred.label} is {gap:.4g} away but at most {budget:.4g} can be covered by t={c.end:g}",
                },
                time=t,
            ))
    return out


def report_infeasible(t: float, exc: QpInfeasible) -> FeedbackEvent:
    return FeedbackEvent(
        QP_INFEASIBLE,
        FATAL,
        {"robot": exc.robot},
        {
            "gvec": exc.gvec.tolist(),
            "rhs": exc.rhs,
            "lower": exc.lower.tolist(),
            "upper": exc.upper.tolist(),
            "message": str(exc),
        },
        time=t,
    )
