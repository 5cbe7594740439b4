"""Real-time service for the operator console.

One asyncio task owns the simulation. WebSocket handlers only put parsed
commands on its inbox and drain their own outbound queue, so nothing mutable
is shared across the boundary.

Client to server (JSON text frames)::

    {"type": "set_events", "events": ["alarm"]}
    {"type": "start"} | {"type": "pause"} | {"type": "reset"}

Server to client::

    {"type": "scenario", ...}        once per connection
    {"type": "state", "t", "x", "sigma", "buchi_state", "active_props",
     "u", "cbf", "safe_sets", "transitions"}          at most 20 per second
    {"type": "feedback", "kind", "severity", "location", "detail", "time"?}
    {"type": "status", "running", "terminal", "events", "t"}
    {"type": "error", "message"}

State frames are rate limited; ``transitions`` lists every automaton state
change since the previous frame so none is lost to throttling. Events latch
at their last value when clients disconnect.
"""
from __future__ import annotations

import asyncio
import contextlib
import json
import logging
import time
from typing import Any

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .engine import CompiledSpec, Simulation
from .scenario import Scenario

log = logging.getLogger(__name__)

MAX_FRAME_RATE = 20.0
COMMANDS = ("set_events", "start", "pause", "reset")


class ProtocolError(ValueError):
    pass


def parse_command(text: str, events: frozenset[str]) -> dict:
    """Validate one client frame. Raises :class:`ProtocolError`."""
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not JSON: {exc.msg}") from None
    if not isinstance(msg, dict) or msg.get("type") not in COMMANDS:
        raise ProtocolError(f"expected an object with type in {list(COMMANDS)}")
    if msg["type"] == "set_events":
        ev = msg.get("events")
        if not isinstance(ev, list) or not all(isinstance(e, str) for e in ev):
            raise ProtocolError("set_events needs an 'events' list of names")
        unknown = sorted(set(ev) - events)
        if unknown:
            raise ProtocolError(f"undeclared events {unknown}; declared: {sorted(events)}")
        return {"type": "set_events", "events": sorted(set(ev))}
    return {"type": msg["type"]}


class Session:
    """The simulation loop and its subscribers."""

    def __init__(self, scenario: Scenario, compiled: CompiledSpec, speed: float = 1.0, autostart: bool = True):
        if speed <= 0:
            raise ValueError("speed factor must be positive")
        self.scenario = scenario
        self.compiled = compiled
        self.speed = speed
        self.sim = Simulation(scenario, compiled)
        self.events: frozenset[str] = frozenset()
        self.running = autostart
        self.inbox: asyncio.Queue = asyncio.Queue()
        self.clients: set[asyncio.Queue] = set()
        # every set_events as received, including ones between samples
        self.changes: list[dict] = []
        self._pending_transitions: list[dict] = []
        self._last_state = -1.0
        self._last_curr = self.sim.planner.state.curr
        self._task: asyncio.Task | None = None

    # -- subscribers -------------------------------------------------------------

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=1024)
        self.clients.add(q)
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        self.clients.discard(q)

    def _send(self, frame: dict, droppable: bool = False) -> None:
        for q in list(self.clients):
            try:
                q.put_nowait(frame)
            except asyncio.QueueFull:
                if not droppable:
                    log.warning("client queue full, dropping %s frame", frame["type"])

    def scenario_frame(self) -> dict:
        s = self.scenario
        return {
            "type": "scenario",
            "name": s.name,
            "dt": s.dt,
            "horizon": s.horizon,
            "speed": self.speed,
            "robots": [{"name": r.name, "dims": list(r.dims), "labels": list(r.labels)} for r in s.robots],
            "predicates": s.document.get("predicates", {}),
            "events": sorted(s.events),
            "formula": s.formula_text,
            "ltl": self.compiled.ltl,
        }

    def status_frame(self) -> dict:
        return {"type": "status", "running": self.running, "terminal": self.sim.log.status, "events": sorted(self.events), "t": round(self.sim.t, 10)}

    def apriori_frames(self) -> list[dict]:
        return [{"type": "feedback", **e.to_dict()} for e in self.compiled.feedback]

    # -- the loop ----------------------------------------------------------------

    def start(self) -> None:
        self._task = asyncio.get_running_loop().create_task(self._run())

    async def stop(self) -> None:
        if self._task:
            self._task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await self._task

    def _handle(self, cmd: dict) -> None:
        kind = cmd["type"]
        if kind == "set_events":
            self.events = frozenset(cmd["events"])
            self.changes.append({"t": round(self.sim.t, 10), "wall": time.time(), "events": cmd["events"]})
            log.info("events set to %s at t=%.2f", cmd["events"], self.sim.t)
        elif kind == "start":
            self.running = True
        elif kind == "pause":
            self.running = False
        elif kind == "reset":
            self.sim.reset()
            self.running = False
            self.events = frozenset()
            self.changes.clear()
            self._pending_transitions.clear()
            self._last_curr = self.sim.planner.state.curr
            self._last_state = -1.0
        self._send(self.status_frame())

    def _advance(self) -> None:
        rec = self.sim.step(self.events)
        if rec["state"] != self._last_curr:
            self._pending_transitions.append({"t": rec["t"], "from": self._last_curr, "to": rec["state"]})
            self._last_curr = rec["state"]
        for e in rec["feedback"]:
            self._send({"type": "feedback", **e})
        now = time.monotonic()
        if self.sim.done or now - self._last_state >= 1.0 / MAX_FRAME_RATE:
            self._last_state = now
            self._send({
                "type": "state",
                "t": rec["t"],
                "x": rec["x"],
                "sigma": rec["sigma"],
                "buchi_state": rec["state"],
                "active_props": rec["active_props"],
                "u": rec["u"],
                "cbf": rec["cbf"],
                "safe_sets": self.sim.safe_sets(),
                "transitions": self._pending_transitions,
            }, droppable=True)
            self._pending_transitions = []
        if self.sim.done:
            self.running = False
            self._send(self.status_frame())

    async def _run(self) -> None:
        loop = asyncio.get_running_loop()
        period = self.scenario.dt / self.speed
        next_tick = loop.time()
        while True:
            live = self.running and not self.sim.done
            timeout = max(0.0, next_tick - loop.time()) if live else None
            try:
                cmd = await asyncio.wait_for(self.inbox.get(), timeout)
            except asyncio.TimeoutError:
                cmd = None
            if cmd is not None:
                was_live = live
                self._handle(cmd)
                if self.running and not was_live:
                    next_tick = loop.time()
                continue
            self._advance()
            next_tick += period
            # do not try to catch up after a stall
            next_tick = max(next_tick, loop.time() - period)


def create_app(scenario: Scenario, compiled: CompiledSpec, speed: float = 1.0, autostart: bool = True) -> FastAPI:
    if not scenario.interactive:
        log.info("serving %s: scripted events are ignored, clients set the events", scenario.name)
    holder: dict[str, Any] = {}

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        session = Session(scenario, compiled, speed, autostart)
        holder["session"] = session
        app.state.session = session
        session.start()
        try:
            yield
        finally:
            await session.stop()

    app = FastAPI(title="evstl", lifespan=lifespan)

    @app.get("/log")
    async def run_log():
        s: Session = holder["session"]
        return {"status": s.sim.log.status, "records": s.sim.log.records, "changes": s.changes}

    @app.websocket("/ws")
    async def ws(sock: WebSocket):
        s: Session = holder["session"]
        await sock.accept()
        out = s.subscribe()
        for frame in [s.scenario_frame(), *s.apriori_frames(), s.status_frame()]:
            await sock.send_json(frame)

        async def pump():
            while True:
                await sock.send_json(await out.get())

        sender = asyncio.create_task(pump())
        try:
            while True:
                text = await sock.receive_text()
                try:
                    cmd = parse_command(text, s.scenario.events)
                except ProtocolError as exc:
                    await out.put({"type": "error", "message": str(exc)})
                    continue
                await s.inbox.put(cmd)
        except WebSocketDisconnect:
            pass
        finally:
            s.unsubscribe(out)
            sender.cancel()
            with contextlib.suppress(asyncio.CancelledError, Exception):
                await sender

    return app


def serve(scenario: Scenario, compiled: CompiledSpec, port: int, speed: float = 1.0, host: str = "127.0.0.1") -> None:
    import uvicorn

    uvicorn.run(create_app(scenario, compiled, speed), host=host, port=port, log_level="info")
