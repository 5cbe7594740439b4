"""Scenario documents: robots, predicates, events, formula and event source.

A scenario is one JSON object::

    {
      "name": "single_robot",
      "dt": 0.1, "horizon": 20, "gamma": 1.0, "sharpness": 1.0,
      "robots": [{"name": "r1", "state": ["x", "y"], "x0": [0, 0], "u_max": [1, 1]}],
      "predicates": {
        "near55": {"kind": "sphere-inner", "robot": "r1", "dims": ["x", "y"],
                   "center": [5, 5], "radius": 1}
      },
      "events": ["alarm"],
      "formula": "G(alarm -> F[0,10](near55))",
      "event_source": {"type": "scripted", "changes": [[2.0, ["alarm"]]]}
    }

``gamma`` is the slope of the linear class-K function in the barrier condition
and ``sharpness`` the factor of the soft minimum that merges a robot's
barriers (both default to 1). Robots may give ``u_min`` (default ``-u_max``). Predicate fields by kind:
sphere kinds ``center``/``radius``; ``pair-distance-min`` ``robots`` (two
names), ``dims`` and ``distance``; ``angle-abs-target`` ``dim``, ``target``,
``tolerance``; ``halfspace`` ``normal``/``offset``. An optional ``drift``
object with ``matrix`` and ``offset`` gives f(x) = A x + c; the input map is
always the identity.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from ..controller import Dynamics, Robot
from ..formula import (
    Declarations,
    PredicateFunction,
    StlFormula,
    angle_abs_target,
    halfspace,
    intervals_of,
    pair_distance_min,
    parse,
    sphere_inner,
    sphere_outer,
)


class ScenarioError(ValueError):
    pass


@dataclass
class ScriptedEvents:
    """Piecewise-constant event sets given by (time, events) changepoints."""

    changes: list[tuple[float, frozenset[str]]] = field(default_factory=list)

    def __post_init__(self):
        self.changes = sorted((float(t), frozenset(ev)) for t, ev in self.changes)

    def at(self, t: float) -> frozenset[str]:
        current: frozenset[str] = frozenset()
        for when, ev in self.changes:
            if when <= t + 1e-9:
                current = ev
            else:
                break
        return current


@dataclass
class Scenario:
    name: str
    dt: float
    horizon: float
    gamma: float
    robots: list[Robot]
    x0: np.ndarray
    predicates: dict[str, PredicateFunction]
    events: frozenset[str]
    formula_text: str
    source: dict
    drift: tuple[np.ndarray, np.ndarray] | None = None
    sharpness: float = 1.0
    document: dict = field(default_factory=dict, repr=False)

    @property
    def decls(self) -> Declarations:
        return Declarations(self.predicates, self.events)

    @property
    def formula(self) -> StlFormula:
        return parse(self.formula_text, self.decls)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def interactive(self) -> bool:
        return self.source.get("type") == "interactive"

    def scripted(self) -> ScriptedEvents:
        return ScriptedEvents([(t, ev) for t, ev in self.source.get("changes", [])])

    def dynamics(self) -> Dynamics:
        if self.drift is None:
            return Dynamics(self.robots)
        a, c = self.drift
        return Dynamics(self.robots, drift=lambda x: a @ x + c)

    def content_hash(self) -> str:
        blob = json.dumps(self.document, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _pred(name: str, spec: dict, index: dict[str, dict[str, int]], robot_ids: dict[str, int]) -> PredicateFunction:
    def dims_of(robot: str, labels) -> list[int]:
        if robot not in index:
            raise ScenarioError(f"predicate {name}: unknown robot {robot!r}")
        try:
            return [index[robot][lab] for lab in labels]
        except KeyError as exc:
            raise ScenarioError(f"predicate {name}: robot {robot} has no state {exc.args[0]!r}") from None

    kind = spec.get("kind")
    try:
        if kind in ("sphere-inner", "sphere-outer"):
            make = sphere_inner if kind == "sphere-inner" else sphere_outer
            robot = spec["robot"]
            return make(dims_of(robot, spec["dims"]), spec["center"], spec["radius"], (robot_ids[robot],))
        if kind == "pair-distance-min":
            r1, r2 = spec["robots"]
            return pair_distance_min(dims_of(r1, spec["dims"]), dims_of(r2, spec["dims"]), spec["distance"], (robot_ids[r1], robot_ids[r2]))
        if kind == "angle-abs-target":
            robot = spec["robot"]
            return angle_abs_target(dims_of(robot, [spec["dim"]])[0], spec["target"], spec["tolerance"], (robot_ids[robot],))
        if kind == "halfspace":
            robot = spec["robot"]
            return halfspace(dims_of(robot, spec["dims"]), spec["normal"], spec["offset"], (robot_ids[robot],))
    except KeyError as exc:
        raise ScenarioError(f"predicate {name}: missing field {exc.args[0]!r}") from None
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"predicate {name}: {exc}") from None
    raise ScenarioError(f"predicate {name}: unknown kind {kind!r}")


def from_dict(doc: dict[str, Any]) -> Scenario:
    try:
        dt = float(doc.get("dt", 0.1))
        horizon = float(doc["horizon"])
        robots_doc = doc["robots"]
        formula_text = doc["formula"]
    except KeyError as exc:
        raise ScenarioError(f"scenario is missing {exc.args[0]!r}") from None
    if dt <= 0 or horizon <= 0:
        raise ScenarioError("dt and horizon must be positive")
    gamma = float(doc.get("gamma", 1.0))
    sharpness = float(doc.get("sharpness", 1.0))
    if gamma <= 0 or sharpness <= 0:
        raise ScenarioError("gamma and sharpness must be positive")

    robots: list[Robot] = []
    x0: list[float] = []
    index: dict[str, dict[str, int]] = {}
    robot_ids: dict[str, int] = {}
    offset = 0
    for k, r in enumerate(robots_doc):
        labels = list(r["state"])
        x = [float(v) for v in r["x0"]]
        if len(x) != len(labels):
            raise ScenarioError(f"robot {r['name']}: x0 has {len(x)} entries for {len(labels)} states")
        hi = np.asarray(r["u_max"], dtype=float)
        lo = np.asarray(r.get("u_min", -hi), dtype=float)
        dims = tuple(range(offset, offset + len(labels)))
        try:
            robots.append(Robot(r["name"], dims, lo, hi, tuple(labels)))
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        if r["name"] in index:
            raise ScenarioError(f"duplicate robot name {r['name']!r}")
        index[r["name"]] = {lab: offset + i for i, lab in enumerate(labels)}
        robot_ids[r["name"]] = k
        x0 += x
        offset += len(labels)

    predicates = {name: _pred(name, spec, index, robot_ids) for name, spec in doc.get("predicates", {}).items()}
    events = frozenset(doc.get("events", []))
    source = doc.get("event_source", {"type": "scripted", "changes": []})
    if source.get("type") not in ("scripted", "interactive"):
        raise ScenarioError(f"unknown event source {source.get('type')!r}")
    for _, ev in source.get("changes", []):
        unknown = set(ev) - events
        if unknown:
            raise ScenarioError(f"scripted events not declared: {sorted(unknown)}")

    drift = None
    if "drift" in doc:
        a = np.asarray(doc["drift"]["matrix"], dtype=float)
        c = np.asarray(doc["drift"].get("offset", np.zeros(offset)), dtype=float)
        if a.shape != (offset, offset) or c.shape != (offset,):
            raise ScenarioError("drift matrix/offset do not match the joint state dimension")
        drift = (a, c)

    sc = Scenario(
        name=doc.get("name", "scenario"),
        dt=dt,
        horizon=horizon,
        gamma=gamma,
        robots=robots,
        x0=np.asarray(x0),
        predicates=predicates,
        events=events,
        formula_text=formula_text,
        source=source,
        drift=drift,
        sharpness=sharpness,
        document=doc,
    )
    try:
        formula = sc.formula
    except ValueError as exc:
        raise ScenarioError(f"formula: {exc}") from None
    for iv in intervals_of(formula):
        for v in (iv.a, iv.b):
            if not math.isinf(v) and abs(v / dt - round(v / dt)) > 1e-6:
                raise ScenarioError(f"interval bound {v} is not a multiple of dt={dt}")
    return sc


def bundled_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("evstl.scenarios").iterdir() if p.name.endswith(".json"))


def resolve(path_or_name: str | Path) -> Path:
    """A scenario path, or the name of a bundled scenario."""
    p = Path(path_or_name)
    if p.exists():
        return p
    bundled = resources.files("evstl.scenarios") / f"{path_or_name}.json"
    if bundled.is_file():
        return Path(str(bundled))
    raise ScenarioError(f"no scenario file {path_or_name!r} (bundled: {', '.join(bundled_names())})")


def load(path_or_name: str | Path) -> Scenario:
    p = resolve(path_or_name)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}: {exc}") from None
    return from_dict(doc)
