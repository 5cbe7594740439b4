"""Command line entry point: compile, check, run, monitor and serve scenarios."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from .buchi import BuchiBlowUp
from .feedback import POSSIBLE_CONFLICT
from .formula import StlSyntaxError, Verdict, monitor
from .sim.engine import ACCEPTING, RunLog, compile_cached, compile_scenario, run
from .sim.scenario import ScenarioError, load, resolve


def _load(args):
    path = resolve(args.scenario)
    return path, load(path)


def _compile(path, scenario, args):
    # bundled scenarios live inside the package, so they are never cached
    bundled = Path(path).resolve().parent == Path(str(resources.files("evstl.scenarios"))).resolve()
    if args.no_cache or bundled:
        return compile_scenario(scenario)
    return compile_cached(path, scenario)


def cmd_compile(args) -> int:
    path, sc = _load(args)
    compiled = _compile(path, sc, args)
    aut = compiled.automaton
    print(f"formula:  {compiled.formula}")
    print(f"ltl:      {compiled.ltl}")
    print(f"props:    {len(compiled.props)} controllable, events {sorted(compiled.events)}")
    print(f"automaton: {len(aut.states)} states, {len(aut.transitions)} transitions ({compiled.seconds:.2f}s)")
    for e in compiled.feedback:
        print(e.summary())
    if args.dump_buchi:
        print(aut.dump())
    if args.out:
        Path(args.out).write_text(json.dumps(compiled.to_dict(), indent=1))
        print(f"wrote {args.out}")
    return 0


def cmd_check(args) -> int:
    path, sc = _load(args)
    compiled = _compile(path, sc, args)
    for e in compiled.feedback:
        print(e.summary())
        if e.kind == POSSIBLE_CONFLICT:
            print(f"    predicates: {', '.join(e.detail['predicates'])}; when: {' | '.join(e.detail['conditions'])}")
    for a, b in compiled.unchecked:
        print(f"[note] unchecked pair: {a}, {b}")
    if not compiled.feedback:
        print("no a-priori feedback")
    return 1 if compiled.feedback else 0


def cmd_run(args) -> int:
    path, sc = _load(args)
    compiled = _compile(path, sc, args)
    result = run(sc, compiled)
    for e in result.feedback:
        print(e.summary())
    last = result.records[-1]
    print(f"status: {result.status} at t={last['t']:g}, automaton state {last['state']}")
    if args.log:
        result.write_jsonl(args.log)
        print(f"wrote {args.log}")
    if args.csv:
        result.write_csv(args.csv, sc)
        print(f"wrote {args.csv}")
    return 0 if result.status == ACCEPTING else 1


def cmd_monitor(args) -> int:
    _, sc = _load(args)
    log = RunLog.read_jsonl(args.log, sc.dt)
    if not log.records:
        print("empty run log", file=sys.stderr)
        return 2
    res = monitor(log.trace(), sc.formula)
    where = "" if res.time is None else f" at t={res.time:g}: {res.node}"
    print(f"{res.verdict.value}{where}")
    return 0 if res.verdict is Verdict.SATISFIED else 1


def cmd_serve(args) -> int:
    from .sim.server import serve

    path, sc = _load(args)
    compiled = _compile(path, sc, args)
    for e in compiled.feedback:
        print(e.summary())
    serve(sc, compiled, args.port, args.speed, args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evstl", description="Event-based STL control synthesis with barrier functions")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_arg(sp):
        sp.add_argument("scenario", help="scenario JSON file or bundled scenario name")
        sp.add_argument("--no-cache", action="store_true", help="ignore and do not write the compiled artifact cache")

    sp = sub.add_parser("compile", help="abstract, translate and report")
    scenario_arg(sp)
    sp.add_argument("--dump-buchi", action="store_true", help="print the automaton")
    sp.add_argument("--out", help="write the compiled artifact as JSON")
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("check", help="a-priori feedback only; exit 1 if any")
    scenario_arg(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("run", help="simulate with the scripted events")
    scenario_arg(sp)
    sp.add_argument("--log", help="JSON-lines run log")
    sp.add_argument("--csv", help="long-format trajectory CSV")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("monitor", help="check a run log against the formula")
    scenario_arg(sp)
    sp.add_argument("log", help="JSON-lines run log")
    sp.set_defaults(func=cmd_monitor)

    sp = sub.add_parser("serve", help="real-time WebSocket service")
    scenario_arg(sp)
    sp.add_argument("--port", type=int, default=8765)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--speed", type=float, default=1.0, help="simulated seconds per wall second")
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, StlSyntaxError, BuchiBlowUp, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
