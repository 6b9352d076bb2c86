"""Shared families and brute-force oracles for the test suite."""

import numpy as np

from sweepsim.constraints import ConstraintFamily, MaxAffine, Quadratic, abs_kink


def cone(horizon=3.0):
    """C(t) = {x2 >= |x1| + t}."""
    return ConstraintFamily(2, horizon, [abs_kink(2, 0, [0.0, -1.0], 1.0)], name="cone")


def capped_cone(horizon=3.0):
    """Cone plus the cap x2 <= t + 1."""
    return ConstraintFamily(
        2,
        horizon,
        [abs_kink(2, 0, [0.0, -1.0], 1.0), MaxAffine([[0.0, 1.0]], -1.0, -1.0)],
        box=(np.array([-2.0, -1.0]), np.array([2.0, 5.0])),
        name="capped",
    )


def shell(horizon=1.0):
    """Exterior of the unit disc, 1 - |x|^2 <= 0."""
    return ConstraintFamily(2, horizon, [Quadratic(-1.0, [0.0, 0.0], 0.0, 0.0, 1.0)], name="shell")


def disc(horizon=1.0, center=(0.0, 0.0), radius=1.0):
    return ConstraintFamily(2, horizon, [Quadratic(1.0, center, 0.0, 0.0, -radius**2)], name="disc")


def square(horizon=1.0):
    rows = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
    offs = [-1.0, 0.0, -1.0, 0.0]
    return ConstraintFamily(
        2, horizon, [MaxAffine([r], 0.0, o) for r, o in zip(rows, offs)],
        box=(np.array([-1.0, -1.0]), np.array([2.0, 2.0])), name="square",
    )


def _nodes(F, t, lo, hi, pitch):
    # snap to the pitch lattice so nodes such as (0, 0) are exact
    ax = [np.round(np.arange(np.floor(a / pitch), np.ceil(b / pitch) + 1) * pitch, 12) for a, b in zip(lo, hi)]
    X, Y = np.meshgrid(*ax, indexing="ij")
    G = np.column_stack([X.ravel(), Y.ravel()])
    return G[F.max_value(t, G) <= 0.0]


def grid_distance(F, t, P, lo=(-4.0, -4.0), hi=(4.0, 8.0), pitch=1e-2, fine=1e-4):
    """Brute-force distance to C(t) by nearest feasible grid node.

    A coarse grid locates the nearest node, a fine grid on a window around
    it refines it; the result overestimates the true distance by at most
    ``fine * sqrt(2) / 2`` (plus the coarse pitch if the set is thinner than
    the window).
    """
    coarse = _nodes(F, t, lo, hi, pitch)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    out = np.empty(P.shape[0])
    near = np.empty_like(P)
    for k, p in enumerate(P):
        j = np.argmin(((coarse - p) ** 2).sum(axis=1))
        c = coarse[j]
        w = 2 * pitch
        G = _nodes(F, t, c - w, c + w, fine)
        G = np.vstack([G, coarse[j][None]])
        d2 = ((G - p) ** 2).sum(axis=1)
        m = np.argmin(d2)
        out[k], near[k] = np.sqrt(d2[m]), G[m]
    return out, near
