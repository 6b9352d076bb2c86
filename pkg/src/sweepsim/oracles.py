"""Closed-form solutions of the four planar benchmark problems.

All four use ``f_1(t, x) = t - x_2 + |x_1|``, i.e. the cone
``C(t) = {x_2 >= |x_1| + t}`` moving up with unit speed.  The ball rests
until the wall reaches it (time ``t_bar = x2 - |x1|``), slides along one wing
with velocity ``(-sign(x1), 1) / 2`` and then rides the corner ``(0, t)``.
With gravity ``g = (0, g0 t)`` the rest phase becomes a free fall and the
phase changes happen at ``theta1 <= theta2``.

Values exactly at a breakpoint use the right-hand branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleInitial

G0 = 9.8
FEAS_TOL = 1e-12


@dataclass(frozen=True)
class OracleBreakpoints:
    t_bar: float
    theta1: float
    theta2: float
    g0: float


def sign0(v):
    """Sign with ``sign(0) = 0``."""
    return float(np.sign(v))


def _hit_time(c: float, g0: float) -> float:
    """Root of ``g0 s^2 / 2 + s = c``; ``(-1 + sqrt(1 + 2 g0 c)) / g0`` written without cancellation."""
    if g0 == 0.0:
        return c
    return 2.0 * c / (1.0 + math.sqrt(1.0 + 2.0 * g0 * c))


def _check_x0(x0):
    x1, x2 = (float(v) for v in np.asarray(x0, dtype=float).ravel())
    if x2 - abs(x1) < -FEAS_TOL:
        raise InfeasibleInitial(f"x0=({x1}, {x2}) is not in C(0): violates f1", ["f1"])
    return x1, x2


def breakpoints(x0, g0: float = 0.0) -> OracleBreakpoints:
    """Phase-change times; with ``g0 = 0`` these are ``t_bar`` and ``t_bar + 2|x1|``."""
    x1, x2 = _check_x0(x0)
    t_bar = max(x2 - abs(x1), 0.0)
    return OracleBreakpoints(t_bar, _hit_time(t_bar, g0), _hit_time(t_bar + 2 * abs(x1), g0), g0)


def _times(t, T):
    arr = np.asarray(t, dtype=float)
    if T is not None and (np.any(arr < -FEAS_TOL) or np.any(arr > T + 1e-12 * max(1.0, T))):
        raise ValueError(f"times must lie in [0, {T}]")
    return arr


def example1(t, T=None):
    """``x(t) = (0, t)``."""
    arr = _times(t, T)
    return np.stack([np.zeros_like(arr), arr], axis=-1)


def example2(x0, t, T=None):
    """Unforced solution from any ``x0`` in ``C(0)``: rest, slide, corner."""
    x1, x2 = _check_x0(x0)
    arr = _times(t, T)
    tb = max(x2 - abs(x1), 0.0)
    t_corner = tb + 2.0 * abs(x1)
    s = sign0(x1)
    rest = np.stack([np.full_like(arr, x1), np.full_like(arr, x2)], axis=-1)
    slide = np.stack([x1 - s * (arr - tb) / 2.0, x2 + (arr - tb) / 2.0], axis=-1)
    corner = np.stack([np.zeros_like(arr), arr], axis=-1)
    out = np.where((arr < tb)[..., None], rest, np.where((arr < t_corner)[..., None], slide, corner))
    return out


def example3(x0, t, T=None, g0: float = G0):
    """Solution under gravity ``g(t, x) = (0, g0 t)``: fall, slide, corner."""
    if g0 <= 0:
        raise ValueError("g0 must be positive")
    x1, x2 = _check_x0(x0)
    arr = _times(t, T)
    bp = breakpoints((x1, x2), g0)
    tb = bp.t_bar
    s = sign0(x1)
    fall = np.stack([np.full_like(arr, x1), x2 - g0 * arr**2 / 2.0], axis=-1)
    slide = np.stack(
        [
            x1 - s * ((arr - tb) / 2.0 + g0 * arr**2 / 4.0),
            x2 + (arr - tb) / 2.0 - g0 * arr**2 / 4.0,
        ],
        axis=-1,
    )
    corner = np.stack([np.zeros_like(arr), arr], axis=-1)
    return np.where((arr < bp.theta1)[..., None], fall, np.where((arr < bp.theta2)[..., None], slide, corner))


def example3_velocity(x0, t, g0: float = G0):
    """Analytic derivative of :func:`example3` (right derivative at breakpoints)."""
    x1, x2 = _check_x0(x0)
    arr = np.asarray(t, dtype=float)
    bp = breakpoints((x1, x2), g0)
    s = sign0(x1)
    fall = np.stack([np.zeros_like(arr), -g0 * arr], axis=-1)
    slide = np.stack([-s * (1.0 + g0 * arr) / 2.0, (1.0 - g0 * arr) / 2.0], axis=-1)
    corner = np.stack([np.zeros_like(arr), np.ones_like(arr)], axis=-1)
    return np.where((arr < bp.theta1)[..., None], fall, np.where((arr < bp.theta2)[..., None], slide, corner))


def example4_endpoint(x0, T: float = 3.0):
    """Terminal state for the cone capped by ``x_2 <= t + 1``: always ``(0, T)`` when ``T >= 2``."""
    x1, x2 = _check_x0(x0)
    if x2 > 1.0 + FEAS_TOL:
        raise InfeasibleInitial(f"x0=({x1}, {x2}) is not in C(0): violates f2", ["f2"])
    if T < 2.0:
        raise ValueError("the closed form needs T >= 2 (corner reached by t = 2)")
    return example2((x1, x2), T)


def example4(x0, t, T: float = 3.0):
    """Full path of the capped problem; the cap never becomes binding, so it is :func:`example2`."""
    example4_endpoint(x0, T)
    return example2(x0, t, T)


@dataclass(frozen=True)
class Oracle:
    """A registered closed form usable by convergence studies."""

    name: str
    g0: float = 0.0

    def __call__(self, x0, t, T=None):
        if self.name == "example1":
            if np.any(np.asarray(x0, dtype=float)):
                raise InfeasibleInitial("example1 is defined for x0 = (0, 0)")
            return example1(t, T)
        if self.name == "example3":
            return example3(x0, t, T, self.g0)
        if self.name == "example4":
            return example4(x0, t, 3.0 if T is None else T)
        return example2(x0, t, T)

    def breakpoints(self, x0):
        bp = breakpoints(x0, self.g0)
        return sorted({bp.t_bar, bp.theta1, bp.theta2})


ORACLES = {
    "example1": Oracle("example1"),
    "example2": Oracle("example2"),
    "example3": Oracle("example3", G0),
    "example4": Oracle("example4"),
}


def get_oracle(name: str, g0: float = G0) -> Oracle:
    if name == "example3":
        return Oracle("example3", g0)
    try:
        return ORACLES[name]
    except KeyError:
        raise KeyError(f"no oracle registered under {name!r}") from None
