"""Low-discrepancy sample generators (scrambled Halton, fixed seeds)."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm, qmc


def halton(n: int, dim: int, seed: int = 0) -> np.ndarray:
    """``n`` scrambled Halton points in ``[0, 1)^dim``."""
    if n <= 0:
        return np.empty((0, dim))
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(n)


def in_box(n: int, lo, hi, seed: int = 0) -> np.ndarray:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return qmc.scale(halton(n, lo.size, seed), lo, hi) if n > 0 else np.empty((0, lo.size))


def in_unit_ball(n: int, dim: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform points of the closed unit ball in ``R^dim``."""
    u = halton(n, dim + 1, seed)
    if dim == 2:
        ang = 2.0 * np.pi * u[:, 0]
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        z = norm.ppf(np.clip(u[:, :dim], 1e-12, 1 - 1e-12))
        dirs = z / np.linalg.norm(z, axis=1, keepdims=True)
    radii = u[:, dim] ** (1.0 / dim)
    return dirs * radii[:, None]


def times(n: int, horizon: float, seed: int = 0, endpoints: bool = True) -> np.ndarray:
    """Quasi-random times in ``[0, horizon]``; both endpoints included when asked."""
    t = horizon * halton(n, 1, seed)[:, 0]
    if endpoints and n >= 2:
        t[0], t[1] = 0.0, horizon
    return t
