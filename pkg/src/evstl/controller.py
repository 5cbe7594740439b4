"""Per-robot control from active barrier functions.

Each robot combines the barriers that read its state into one smooth barrier,
turns the barrier condition into a single linear constraint on its own input,
and projects a nominal input onto {box} ∩ {constraint}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .abstraction import U_LEFT, ControlledProp
from .cbf import WINDOW_SLACK, ActiveCbf, combine, instantiate, shrinks

QP_TOL = 1e-8


class QpInfeasible(RuntimeError):
    """No input in the box satisfies the barrier constraint."""

    def __init__(self, gvec, rhs, lower, upper, robot: int | None = None):
        self.gvec = np.asarray(gvec, dtype=float)
        self.rhs = float(rhs)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.robot = robot
        best = float(np.maximum(self.gvec * self.lower, self.gvec * self.upper).sum())
        who = "" if robot is None else f"robot {robot}: "
        super().__init__(f"{who}constraint g.u >= {self.rhs:.6g} unreachable, best g.u in box is {best:.6g}")


def solve_qp(uhat, constraint: tuple[np.ndarray, float] | None, lower, upper) -> np.ndarray:
    """argmin ||u - uhat|| over lower <= u <= upper and gvec.u >= rhs.

    The minimiser is ``clip(uhat + lam * gvec)`` for the smallest ``lam >= 0``
    meeting the constraint. ``gvec . clip(uhat + lam * gvec)`` is piecewise
    linear and nondecreasing in ``lam``, so ``lam`` is found exactly between
    consecutive clipping breakpoints.
    """
    uhat = np.asarray(uhat, dtype=float)
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if np.any(lo > hi):
        raise ValueError("empty control box")
    u0 = np.clip(uhat, lo, hi)
    if constraint is None:
        return u0
    g, rhs = np.asarray(constraint[0], dtype=float), float(constraint[1])
    if g @ u0 >= rhs:
        return u0
    best = float(np.maximum(g * lo, g * hi).sum())
    if best < rhs - QP_TOL:
        raise QpInfeasible(g, rhs, lo, hi)
    nz = g != 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        b1 = np.where(nz, (lo - uhat) / g, np.nan)
        b2 = np.where(nz, (hi - uhat) / g, np.nan)
    knots = np.concatenate([b1[nz], b2[nz]])
    # tiny components put their knots at infinity; the final saturation covers them
    knots = np.unique(knots[np.isfinite(knots) & (knots > 0)])

    def phi(lam):
        return float(g @ np.clip(uhat + lam * g, lo, hi))

    prev_lam, prev_val = 0.0, float(g @ u0)
    for lam in knots:
        val = phi(lam)
        if val >= rhs:
            # phi is linear on [prev_lam, lam]
            frac = (rhs - prev_val) / (val - prev_val) if val > prev_val else 1.0
            return np.clip(uhat + (prev_lam + frac * (lam - prev_lam)) * g, lo, hi)
        prev_lam, prev_val = lam, val
    # saturated within tolerance of the box maximum
    return np.where(g > 0, hi, np.where(g < 0, lo, u0))


@dataclass
class Robot:
    name: str
    dims: tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        self.dims = tuple(self.dims)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != (len(self.dims),) or self.upper.shape != self.lower.shape:
            raise ValueError(f"robot {self.name}: bounds must match its {len(self.dims)} state dims")
        if np.any(self.lower > 0) or np.any(self.upper < 0):
            raise ValueError(f"robot {self.name}: zero control must be inside the bounds")


@dataclass
class Dynamics:
    """Control-affine dynamics xdot = f(x) + g(x) u, with u stacked per robot.

    ``drift`` returns f(x) over the joint state; ``input_map(i, x)`` returns
    robot i's block of g. Defaults are f = 0 and g = I.
    """

    robots: list[Robot]
    drift: Callable[[np.ndarray], np.ndarray] | None = None
    input_map: Callable[[int, np.ndarray], np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return sum(len(r.dims) for r in self.robots)

    def f(self, x) -> np.ndarray:
        return np.zeros(len(x)) if self.drift is None else np.asarray(self.drift(x), dtype=float)

    def g(self, i: int, x) -> np.ndarray:
        if self.input_map is None:
            return np.eye(len(self.robots[i].dims))
        return np.asarray(self.input_map(i, x), dtype=float)

    def xdot(self, x, u_per_robot: Sequence[np.ndarray]) -> np.ndarray:
        out = self.f(x).copy()
        for i, (r, u) in enumerate(zip(self.robots, u_per_robot)):
            out[list(r.dims)] += self.g(i, x) @ u
        return out


# -- barrier bookkeeping ---------------------------------------------------------


@dataclass
class CbfRegistry:
    """Instantiated barriers keyed by proposition name.

    A barrier is created when its proposition enters the activated set and
    lives while the proposition stays activated. Once its window has closed it
    is retired and not recreated until the proposition leaves the activated
    set and comes back. Eventually-type barriers are marked discharged once
    their predicate holds inside the window and are no longer enforced; the
    left side of an until is retired when one of its right-side partners is
    discharged.
    """

    props: Mapping[str, ControlledProp]
    live: dict[str, ActiveCbf] = field(default_factory=dict)
    expired: set[str] = field(default_factory=set)
    discharged: set[str] = field(default_factory=set)

    def update(self, active: Iterable[str], t: float, x) -> None:
        active = set(active)
        for name in list(self.live):
            if name not in active:
                del self.live[name]
                self.discharged.discard(name)
        self.expired &= active
        for name in sorted(active):
            if name not in self.live and name not in self.expired:
                self.live[name] = instantiate(self.props[name], t, x)
        for name, c in list(self.live.items()):
            if shrinks(c.prop.kind) and c.in_window(t) and c.prop.pred.h(x) >= 0:
                self.discharged.add(name)
        for name, c in list(self.live.items()):
            partner_done = c.prop.kind == U_LEFT and any(p in self.discharged for p in c.prop.partners)
            if t > c.end + WINDOW_SLACK or partner_done:
                del self.live[name]
                self.discharged.discard(name)
                self.expired.add(name)

    def in_force(self, t: float) -> list[ActiveCbf]:
        """Barriers to enforce at ``t``. A discharged eventually-type barrier has done its job."""
        return [c for name, c in sorted(self.live.items()) if c.in_window(t) and name not in self.discharged]

    def clear(self) -> None:
        self.live.clear()
        self.expired.clear()
        self.discharged.clear()


# -- per-robot control ---------------------------------------------------------------


def relevant(cbfs: Iterable[ActiveCbf], robot: Robot) -> list[ActiveCbf]:
    """Barriers that read any of the robot's state dims."""
    mine = set(robot.dims)
    return [c for c in cbfs if mine & set(c.prop.pred.func.dims)]


def nominal(robot: Robot, cbfs: Iterable[ActiveCbf], x, dt: float | None = None) -> np.ndarray:
    """Full-speed input toward the centroid of the robot's goal points.

    Goal points come from the robot's eventually-type barriers whose predicate
    has an attracting target (sphere centers, angle targets). Dims are grouped
    by the predicate that targets them; each group moves along the straight
    line to its goal, scaled until it touches the control box. With ``dt`` the
    step is also capped so it does not overshoot the goal in one sample.
    """
    x = np.asarray(x, dtype=float)
    index = {d: k for k, d in enumerate(robot.dims)}
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    groups: list[tuple[int, ...]] = []
    for c in cbfs:
        if not shrinks(c.prop.kind) or c.prop.pred.negated:
            continue
        func = c.prop.pred.func
        if not set(func.dims) <= set(robot.dims):
            continue
        target = func.target_point(x)
        if target is None:
            continue
        for d, v in zip(func.dims, target):
            sums[d] = sums.get(d, 0.0) + float(v)
            counts[d] = counts.get(d, 0) + 1
        group = tuple(func.dims)
        if group not in groups:
            groups.append(group)
    u = np.zeros(len(robot.dims))
    done: set[int] = set()
    for group in groups:
        dims = [d for d in group if d not in done]
        if not dims:
            continue
        done.update(dims)
        goal = np.array([sums[d] / counts[d] for d in dims])
        diff = goal - x[dims]
        dist = float(np.linalg.norm(diff))
        if dist == 0.0:
            continue
        direction = diff / dist
        k = [index[d] for d in dims]
        caps = np.where(direction > 0, robot.upper[k], np.where(direction < 0, -robot.lower[k], np.inf))
        with np.errstate(divide="ignore", over="ignore"):
            scale = float(np.min(caps / np.abs(direction)))
        if dt is not None:
            scale = min(scale, dist / dt)
        u[k] = scale * direction
    return u


def constraint(robot_index: int, value: float, grad_x: np.ndarray, grad_t: float, dynamics: Dynamics, x, gamma: float) -> tuple[np.ndarray, float]:
    """Barrier condition for one robot as ``gvec . u_i >= rhs``.

    Other robots' inputs are unknown to robot i and enter as zero.
    """
    r = dynamics.robots[robot_index]
    gvec = grad_x[list(r.dims)] @ dynamics.g(robot_index, x)
    rhs = -gamma * value - float(grad_x @ dynamics.f(x)) - grad_t
    return gvec, rhs


@dataclass
class RobotStep:
    u: np.ndarray
    cbf: float | None
    constraint: tuple[np.ndarray, float] | None


def robot_step(i: int, dynamics: Dynamics, cbfs: Sequence[ActiveCbf], x, t: float, gamma: float, dt: float | None = None, sharpness: float = 1.0) -> RobotStep:
    """Input for robot ``i`` given the barriers in force. Raises :class:`QpInfeasible`."""
    r = dynamics.robots[i]
    mine = relevant(cbfs, r)
    uhat = nominal(r, mine, x, dt)
    if not mine:
        return RobotStep(solve_qp(uhat, None, r.lower, r.upper), None, None)
    vals, gxs, gts = [], [], []
    for c in mine:
        gx, gt = c.gradient(x, t, fallback=True)
        vals.append(c.value(x, t))
        gxs.append(gx)
        gts.append(gt)
    v, gx, gt = combine(vals, gxs, gts, sharpness)
    con = constraint(i, v, gx, gt, dynamics, x, gamma)
    try:
        u = solve_qp(uhat, con, r.lower, r.upper)
    except QpInfeasible as exc:
        raise QpInfeasible(exc.gvec, exc.rhs, exc.lower, exc.upper, robot=i) from None
    if dt is not None:
        u, con = _hold_correction(i, dynamics, mine, x, t, dt, gamma, sharpness, v, uhat, u, con)
    return RobotStep(u, v, con)


def _hold_correction(i, dynamics, cbfs, x, t, dt, gamma, sharpness, v, uhat, u, con, rounds=4):
    """Tighten the constraint until the held input meets the sampled condition.

    The linear condition is exact only in the limit; over a sample the input is
    held and a curved barrier can lose a little each step. The sampled form
    ``v(x + dt xdot, t + dt) >= (1 - gamma dt) v`` is checked on the predicted
    next state (other robots held still) and any shortfall is added to the
    right-hand side. If the tighter problem has no solution the last input is kept.
    """
    t1 = t + dt
    if not all(c.in_window(t1) for c in cbfs):
        return u, con
    r = dynamics.robots[i]
    x = np.asarray(x, dtype=float)
    zeros = [np.zeros_like(x)] * len(cbfs)
    target = (1.0 - gamma * dt) * v
    gvec, rhs = con
    for _ in range(rounds):
        nxt = x + dt * dynamics.f(x)
        nxt[list(r.dims)] += dt * (dynamics.g(i, x) @ u)
        ahead = combine([c.value(nxt, t1) for c in cbfs], zeros, [0.0] * len(cbfs), sharpness)[0]
        short = target - ahead
        if short <= 1e-12:
            break
        rhs += short / dt
        try:
            u = solve_qp(uhat, (gvec, rhs), r.lower, r.upper)
        except QpInfeasible:
            break
        con = (gvec, rhs)
    return u, con


def control(dynamics: Dynamics, cbfs: Sequence[ActiveCbf], x, t: float, gamma: float, dt: float | None = None, sharpness: float = 1.0) -> list[RobotStep]:
    """One independent problem per robot."""
    return [robot_step(i, dynamics, cbfs, x, t, gamma, dt, sharpness) for i in range(len(dynamics.robots))]

