"""Scenarios, compilation, execution and the live service."""
from .engine import ACCEPTING, NONACCEPTING, STOPPED, CompiledSpec, RunLog, Simulation, compile_cached, compile_scenario, run
from .scenario import Scenario, ScenarioError, ScriptedEvents, from_dict, load

__all__ = [
    "ACCEPTING",
    "NONACCEPTING",
    "STOPPED",
    "CompiledSpec",
    "RunLog",
    "Scenario",
    "ScenarioError",
    "ScriptedEvents",
    "Simulation",
    "compile_cached",
    "compile_scenario",
    "from_dict",
    "load",
    "run",
]
