"""Time-varying control barrier functions built from controllable propositions.

For an eventually-type obligation over ``[a, b]`` activated at ``t_int`` the
barrier is

    cbf(x, t) = (t - t_int - a) * h_int / (b - a) - h_int + h(x)

with ``h_int = h(x(t_int))``. It is zero at the start of the window when the
state has not moved and equals ``h(x)`` at the end, so keeping it nonnegative
drives the predicate true by the deadline. Always-type obligations and the left
side of an until use ``cbf = h(x)`` over the window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .abstraction import F_KIND, G_KIND, U_LEFT, U_RIGHT, ControlledProp
from .formula import SingularGradient, h_gradient

WINDOW_SLACK = 1e-9


class OutsideWindow(ValueError):
    """A barrier was evaluated at a time where it is not active."""


def shrinks(kind: str) -> bool:
    return kind in (F_KIND, U_RIGHT)


@dataclass(frozen=True)
class ActiveCbf:
    prop: ControlledProp
    t_int: float
    h_int: float

    @property
    def start(self) -> float:
        return self.t_int + self.prop.interval.a

    @property
    def end(self) -> float:
        return self.t_int + self.prop.interval.b

    def in_window(self, t: float) -> bool:
        return self.start - WINDOW_SLACK <= t <= self.end + WINDOW_SLACK

    def _check(self, t: float) -> None:
        if not self.in_window(t):
            raise OutsideWindow(f"{self.prop.name} is active on [{self.start}, {self.end}], not at t={t}")

    @property
    def slope(self) -> float:
        """d cbf / dt; zero for the kinds that do not shrink."""
        if not shrinks(self.prop.kind):
            return 0.0
        width = self.prop.interval.b - self.prop.interval.a
        if width == 0 or math.isinf(width):
            return 0.0
        return self.h_int / width

    def offset(self, t: float) -> float:
        """cbf(x, t) - h(x)."""
        if not shrinks(self.prop.kind):
            return 0.0
        width = self.prop.interval.b - self.prop.interval.a
        if width == 0:
            return 0.0
        return (t - self.start) * self.slope - self.h_int

    def value(self, x, t: float) -> float:
        self._check(t)
        return self.offset(t) + self.prop.pred.h(x)

    def gradient(self, x, t: float, fallback: bool = False) -> tuple[np.ndarray, float]:
        """(d cbf/dx over the joint state, d cbf/dt).

        Norm predicates have no gradient at their center; with ``fallback`` the
        spatial part is taken as zero there, since h is maximal at that point.
        """
        self._check(t)
        try:
            gx = self.prop.pred.grad(x)
        except SingularGradient:
            if not fallback:
                raise
            gx = np.zeros(len(x))
        return gx, self.slope

    def safe_radius(self, t: float) -> float | None:
        """Radius of {x : cbf >= 0} for sphere-inner props, None otherwise."""
        func = self.prop.pred.func
        if func.kind != "sphere-inner" or self.prop.pred.negated:
            return None
        return func.radius + self.offset(t)


def instantiate(prop: ControlledProp, t_int: float, x_int) -> ActiveCbf:
    return ActiveCbf(prop, float(t_int), float(prop.pred.h(x_int)))


def combine(values: Sequence[float], grads_x: Sequence[np.ndarray], grads_t: Sequence[float], sharpness: float = 1.0) -> tuple[float, np.ndarray, float]:
    """Smooth under-approximation of the minimum, ``-log(sum(exp(-eta * v_i))) / eta``.

    With the default ``eta = 1`` the gap to the true minimum is at most
    ``log(k)``; a larger ``eta`` shrinks it to ``log(k) / eta``. The gradient
    is the softmin-weighted sum of the member gradients.
    """
    if not len(values):
        raise ValueError("nothing to combine")
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")
    v = np.asarray(values, dtype=float)
    m = v.min()
    w = np.exp(-sharpness * (v - m))
    total = w.sum()
    value = m - math.log(total) / sharpness
    w /= total
    gx = np.tensordot(w, np.asarray(grads_x, dtype=float), axes=1)
    gt = float(w @ np.asarray(grads_t, dtype=float))
    return float(value), gx, gt
