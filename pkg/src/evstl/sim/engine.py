"""Compilation and the sampled execution loop."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from ..abstraction import ControlledProp, abstract
from ..buchi import DEFAULT_STATE_CAP, BuchiAutomaton, translate
from ..controller import CbfRegistry, QpInfeasible, control
from ..feedback import (
    FATAL,
    INADMISSIBLE_ENV,
    FeedbackEvent,
    apriori_conflicts,
    inadmissible_events,
    report_infeasible,
    runtime_check,
)
from ..formula import Trace
from ..planner import InadmissibleEnvironment, Planner, PlanningError, admissible_start, eval_props
from .scenario import Scenario, ScenarioError

log = logging.getLogger(__name__)

ACCEPTING = "horizon-reached-accepting"
NONACCEPTING = "horizon-reached-nonaccepting"
STOPPED = "stopped-fatal"

ARTIFACT_VERSION = 1


@dataclass
class CompiledSpec:
    scenario_hash: str
    formula: str
    ltl: str
    props: dict[str, ControlledProp]
    events: frozenset[str]
    automaton: BuchiAutomaton
    feedback: list[FeedbackEvent]
    unchecked: list[tuple[str, str]]
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "version": ARTIFACT_VERSION,
            "scenario_hash": self.scenario_hash,
            "formula": self.formula,
            "ltl": self.ltl,
            "props": [p.to_dict() for p in self.props.values()],
            "events": sorted(self.events),
            "automaton": self.automaton.to_dict(),
            "feedback": [e.to_dict() for e in self.feedback],
            "unchecked": [list(p) for p in self.unchecked],
            "seconds": self.seconds,
        }

    @classmethod
    def from_dict(cls, d: dict, scenario: Scenario) -> "CompiledSpec":
        if d.get("version") != ARTIFACT_VERSION or d.get("scenario_hash") != scenario.content_hash():
            raise ScenarioError("compiled artifact does not match the scenario")
        # the proposition table is rebuilt from the formula; names are deterministic
        ab = abstract(scenario.formula)
        if sorted(ab.props) != sorted(p["name"] for p in d["props"]):
            raise ScenarioError("compiled artifact propositions do not match the formula")
        return cls(
            d["scenario_hash"],
            d["formula"],
            d["ltl"],
            ab.props,
            frozenset(d["events"]),
            BuchiAutomaton.from_dict(d["automaton"]),
            [FeedbackEvent.from_dict(e) for e in d["feedback"]],
            [tuple(p) for p in d["unchecked"]],
            d.get("seconds", 0.0),
        )


def compile_scenario(scenario: Scenario, state_cap: int = DEFAULT_STATE_CAP) -> CompiledSpec:
    """Abstract, translate and run the a-priori checks."""
    t0 = time.perf_counter()
    formula = scenario.formula
    ab = abstract(formula)
    aut = translate(ab.ltl, state_cap)
    unchecked: list = []
    feedback = apriori_conflicts(aut, ab.props, unchecked)
    events = scenario.events | ab.events
    feedback += inadmissible_events(aut, events)
    if not admissible_start(aut, ab.props, events, scenario.x0, _initial_events(scenario)):
        feedback.append(FeedbackEvent(
            INADMISSIBLE_ENV,
            FATAL,
            {"state": aut.initial},
            {"events": [sorted(_initial_events(scenario))], "message": "the initial state and events already violate the specification"},
            time=0.0,
        ))
    spent = time.perf_counter() - t0
    log.info("compiled %s: %d props, %d states, %d transitions in %.2fs", scenario.name, len(ab.props), len(aut.states), len(aut.transitions), spent)
    return CompiledSpec(scenario.content_hash(), str(formula), str(ab.ltl), ab.props, events, aut, feedback, unchecked, spent)


def _initial_events(scenario: Scenario) -> frozenset[str]:
    return frozenset() if scenario.interactive else scenario.scripted().at(0.0)


def cache_path(scenario_path: str | Path, scenario: Scenario) -> Path:
    p = Path(scenario_path)
    return p.parent / ".evstl-cache" / f"{p.stem}-{scenario.content_hash()}.json"


def compile_cached(scenario_path: str | Path, scenario: Scenario) -> CompiledSpec:
    """Compile, reusing an artifact cached beside the scenario when its hash matches."""
    path = cache_path(scenario_path, scenario)
    if path.exists():
        try:
            return CompiledSpec.from_dict(json.loads(path.read_text()), scenario)
        except (ScenarioError, KeyError, ValueError):
            log.info("stale compiled artifact %s, rebuilding", path)
    compiled = compile_scenario(scenario)
    try:
        path.parent.mkdir(exist_ok=True)
        path.write_text(json.dumps(compiled.to_dict()))
    except OSError as exc:
        log.warning("could not cache compiled artifact: %s", exc)
    return compiled


# -- execution -----------------------------------------------------------------


@dataclass
class RunLog:
    dt: float
    records: list[dict] = field(default_factory=list)
    status: str | None = None
    feedback: list[FeedbackEvent] = field(default_factory=list)
    control_seconds: list[float] = field(default_factory=list)

    def trace(self) -> Trace:
        return Trace(self.dt, np.array([r["x"] for r in self.records]), [r["sigma"] for r in self.records])

    def extended(self, horizon: float) -> Trace:
        """The trace padded to ``horizon`` by holding the last state and events."""
        tr = self.trace()
        n = int(round(horizon / self.dt)) + 1
        extra = n - len(tr)
        if extra <= 0:
            return tr
        states = np.vstack([tr.states, np.repeat(tr.states[-1:], extra, axis=0)])
        return Trace(self.dt, states, tr.events + [tr.events[-1]] * extra)

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(r) + "\n")

    def write_csv(self, path: str | Path, scenario: Scenario) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "robot", "dim", "value"])
            for r in self.records:
                for robot in scenario.robots:
                    for d, lab in zip(robot.dims, robot.labels):
                        w.writerow([r["t"], robot.name, lab, r["x"][d]])

    @classmethod
    def read_jsonl(cls, path: str | Path, dt: float) -> "RunLog":
        out = cls(dt)
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    out.records.append(rec)
                    out.feedback += [FeedbackEvent.from_dict(e) for e in rec.get("feedback", [])]
        return out


class Simulation:
    """One execution, advanced a sample at a time.

    Each sample: read the events, re-plan if the active transition has been
    taken or the events changed, update the barrier registry, run the runtime
    reachability check, solve every robot's problem and integrate one Euler
    step. Fatal feedback stops the run.
    """

    def __init__(self, scenario: Scenario, compiled: CompiledSpec):
        self.scenario = scenario
        self.compiled = compiled
        self.dynamics = scenario.dynamics()
        self.planner = Planner(compiled.automaton, compiled.props, compiled.events)
        self.registry = CbfRegistry(compiled.props)
        self.reset()

    def reset(self) -> None:
        self.k = 0
        self.x = np.array(self.scenario.x0, dtype=float)
        self.planner.reset()
        self.registry.clear()
        self.log = RunLog(self.scenario.dt)

    @property
    def t(self) -> float:
        return self.k * self.scenario.dt

    @property
    def done(self) -> bool:
        return self.log.status is not None

    def _stop(self, event: FeedbackEvent, record: dict) -> dict:
        record["feedback"].append(event.to_dict())
        self.log.feedback.append(event)
        self.log.status = STOPPED
        self.log.records.append(record)
        return record

    def step(self, sigma: Iterable[str]) -> dict:
        if self.done:
            raise RuntimeError("simulation already finished")
        sigma = frozenset(sigma)
        t, x = self.t, self.x
        st = self.planner.state
        record = {
            "t": round(t, 10),
            "x": x.tolist(),
            "sigma": sorted(sigma),
            "state": st.curr,
            "active_props": sorted(st.active),
            "u": None,
            "cbf": None,
            "feedback": [],
        }
        try:
            if self.planner.needs_replan(x, sigma):
                self.planner.find_transition(sigma, x)
        except PlanningError as exc:
            state = getattr(exc, "state", st.curr)
            detail = {"message": str(exc), "events": [sorted(sigma)]}
            if not isinstance(exc, InadmissibleEnvironment):
                detail["reason"] = "no accepting cycle reachable"
            return self._stop(FeedbackEvent(INADMISSIBLE_ENV, FATAL, {"state": state}, detail, time=t), record)
        record["state"] = st.curr
        record["active_props"] = sorted(st.active)

        self.registry.update(st.active, t, x)
        problems = runtime_check(self.registry.live.values(), x, t, self.dynamics.robots, self.registry.discharged)
        if problems:
            for e in problems[1:]:
                record["feedback"].append(e.to_dict())
                self.log.feedback.append(e)
            return self._stop(problems[0], record)

        cbfs = self.registry.in_force(t)
        t0 = time.perf_counter()
        try:
            steps = control(self.dynamics, cbfs, x, t, self.scenario.gamma, self.scenario.dt, self.scenario.sharpness)
        except QpInfeasible as exc:
            return self._stop(report_infeasible(t, exc), record)
        self.log.control_seconds.append(time.perf_counter() - t0)
        record["u"] = [s.u.tolist() for s in steps]
        record["cbf"] = [s.cbf for s in steps]
        self.log.records.append(record)

        self.x = x + self.scenario.dt * self.dynamics.xdot(x, [s.u for s in steps])
        self.k += 1
        if self.k > self.scenario.steps:
            self.log.status = ACCEPTING if self.planner.accepting else NONACCEPTING
        return record

    def safe_sets(self) -> list[dict]:
        """Current safe-set circles of active sphere goals, for display."""
        out = []
        for c in self.registry.in_force(self.t):
            r = c.safe_radius(self.t)
            if r is not None:
                out.append({"prop": c.prop.name, "dims": list(c.prop.pred.func.dims), "center": c.prop.pred.func.center.tolist(), "radius": r})
        return out

    def props_now(self) -> frozenset[str]:
        return eval_props(self.x, frozenset(), self.compiled.props)


def run(scenario: Scenario, compiled: CompiledSpec, events: Callable[[float], Iterable[str]] | None = None) -> RunLog:
    """Execute to the horizon or the first fatal event."""
    source = events or scenario.scripted().at
    sim = Simulation(scenario, compiled)
    while not sim.done:
        sim.step(source(sim.t))
    return sim.log
