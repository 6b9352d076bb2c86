"""A-posteriori checks on computed trajectories.

* residuals: feasibility, discrete normal-cone inclusion, velocity bound
* convergence studies against closed-form oracles
* sampling of the reachable set ``{x(T) : x0 in C(0)}``
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import sampling
from .errors import ConfigurationError, SweepError
from .geometry import EXACT_TOL, SetSlice, proximal_normal_residual
from .solver import (
    SolutionBound,
    SweepingProblem,
    Trajectory,
    admit,
    catching_up,
    march,
    uniform_grid,
    velocity_bound_check,
)

RESIDUAL_SAMPLES = 256
ORDER_THRESHOLD = 0.9
MAX_REJECTION_DRAWS = 1 << 18


def max_threads() -> int:
    """Batch parallelism cap from ``SWEEPSIM_THREADS`` (default: CPU count)."""
    raw = os.environ.get("SWEEPSIM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigurationError(f"SWEEPSIM_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


# --------------------------------------------------------------------------
# residuals


def feasibility_residuals(traj: Trajectory) -> np.ndarray:
    """Positive part of ``max_i f_i(t_k, x_k)`` for every state."""
    F = traj.problem.family
    vals = np.array([F.max_value(t, x)[0] for t, x in zip(traj.grid, traj.states)])
    return np.maximum(vals, 0.0)


def inclusion_residual(
    traj: Trajectory,
    problem: Optional[SweepingProblem] = None,
    r: float = math.inf,
    samples: int = RESIDUAL_SAMPLES,
    tol: float = EXACT_TOL,
    seed: int = 0,
    steps: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Normal-cone residual of each state ``x_k``, k >= 1 (entry 0 is 0).

    With ``w = -(x_k - x_{k-1})/h - g(t_{k-1}, x_{k-1})`` the residual is the
    proximal-normal violation of ``w/|w|`` at ``x_k`` in ``C(t_k)``, clipped
    below at 0; it is 0 when ``|w| <= tol``.  ``steps`` restricts the
    computation to selected state indices.
    """
    problem = traj.problem if problem is None else problem
    F, g = problem.family, problem.perturbation
    res = np.zeros(traj.grid.size)
    idx = range(1, traj.grid.size) if steps is None else steps
    for k in idx:
        h = traj.grid[k] - traj.grid[k - 1]
        w = -(traj.states[k] - traj.states[k - 1]) / h - g(traj.grid[k - 1], traj.states[k - 1])
        nw = float(np.linalg.norm(w))
        if nw <= tol:
            continue
        S = SetSlice(F, traj.grid[k], check=False)
        val = proximal_normal_residual(traj.states[k], w / nw, S, r, samples, seed=seed)
        res[k] = max(val, 0.0)
    return res


@dataclass
class ResidualReport:
    feasibility: np.ndarray
    inclusion: np.ndarray
    bound: Optional[np.ndarray]  # lhs - envelope per step; negative means slack

    @property
    def feasibility_max(self) -> float:
        return float(self.feasibility.max())

    @property
    def inclusion_max(self) -> float:
        return float(self.inclusion.max())

    @property
    def bound_margin(self) -> float:
        return math.nan if self.bound is None else float(self.bound.max())

    def per_step(self):
        """Rows ``(k, feasibility, inclusion, bound_margin)``; bound margin of step k-1 -> k."""
        rows = []
        for k in range(self.feasibility.size):
            b = math.nan if (self.bound is None or k == 0) else float(self.bound[k - 1])
            rows.append((k, float(self.feasibility[k]), float(self.inclusion[k]), b))
        return rows

    def summary(self) -> dict:
        return {
            "feasibility_max": self.feasibility_max,
            "inclusion_max": self.inclusion_max,
            "bound_margin": None if self.bound is None else self.bound_margin,
        }


def residual_report(
    traj: Trajectory,
    r: float = math.inf,
    bound: Optional[SolutionBound] = None,
    samples: int = RESIDUAL_SAMPLES,
    seed: int = 0,
) -> ResidualReport:
    margins = None
    if bound is not None:
        margins = velocity_bound_check(traj, bound, math.inf, raise_on_violation=False).margins
    return ResidualReport(
        feasibility_residuals(traj),
        inclusion_residual(traj, r=r, samples=samples, seed=seed),
        margins,
    )


# --------------------------------------------------------------------------
# convergence


def path_error(traj: Trajectory, exact: Callable[[np.ndarray], np.ndarray], breakpoints=()) -> float:
    """Sup-norm distance between the piecewise-linear interpolant and ``exact``.

    Evaluated at grid points, midpoints and the given breakpoints, which is
    where the interpolation error of a piecewise smooth solution peaks.
    """
    g = traj.grid
    mids = 0.5 * (g[1:] + g[:-1])
    bps = [b for b in breakpoints if g[0] <= b <= g[-1]]
    ts = np.unique(np.concatenate([g, mids, np.asarray(bps, dtype=float)]))
    interp = np.column_stack([np.interp(ts, g, traj.states[:, j]) for j in range(traj.states.shape[1])])
    return float(np.linalg.norm(interp - exact(ts), axis=1).max())


@dataclass
class ConvergenceTable:
    rows: list  # (N, h, sup_error, endpoint_error, grid_error)
    fitted_order: float
    at_floor: bool = False

    columns = ("N", "h", "sup_error", "endpoint_error", "grid_error")

    @property
    def passed(self) -> bool:
        return self.at_floor or self.fitted_order >= ORDER_THRESHOLD


def fit_order(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def convergence_study(
    problem: SweepingProblem,
    oracle: Callable,
    N_list: Sequence[int],
    *,
    breakpoints=(),
    floor: float = 1e-8,
    seed: int = 0,
    threads: Optional[int] = None,
) -> ConvergenceTable:
    """Run the scheme for each ``N`` and fit the error order.

    ``oracle(t)`` returns exact states for an array of times.  When every
    sup error is below ``floor`` the scheme is exact up to projection
    tolerance and no order is fitted (``at_floor``).
    """
    Ns = sorted(int(n) for n in N_list)
    if len(set(Ns)) != len(Ns):
        raise ConfigurationError("grid sizes must be distinct")
    adm = admit(problem, seed=seed)

    def run(N):
        traj = catching_up(problem, N, admission=adm, seed=seed)
        exact_grid = oracle(traj.grid)
        grid_err = float(np.linalg.norm(traj.states - exact_grid, axis=1).max())
        end_err = float(np.linalg.norm(traj.states[-1] - exact_grid[-1]))
        return (N, problem.T / N, path_error(traj, oracle, breakpoints), end_err, grid_err)

    with ThreadPoolExecutor(max_workers=threads or max_threads()) as pool:
        rows = list(pool.map(run, Ns))
    sup = [row[2] for row in rows]
    if max(sup) <= floor:
        return ConvergenceTable(rows, math.nan, at_floor=True)
    if len(rows) < 2:
        return ConvergenceTable(rows, math.nan)
    return ConvergenceTable(rows, fit_order([r[1] for r in rows], sup))


# --------------------------------------------------------------------------
# reachability


@dataclass
class ReachableSet:
    initial: np.ndarray
    endpoints: np.ndarray
    failures: list = field(default_factory=list)  # (sample index, message)

    @property
    def diameter(self) -> float:
        E = self.endpoints[np.all(np.isfinite(self.endpoints), axis=1)]
        if E.shape[0] < 2:
            return 0.0
        d = np.linalg.norm(E[:, None, :] - E[None, :, :], axis=2)
        return float(d.max())

    def lipschitz_estimate(self) -> float:
        """Largest ``|x_T^i - x_T^j| / |x_0^i - x_0^j|`` over sampled pairs."""
        ok = np.all(np.isfinite(self.endpoints), axis=1)
        X0, E = self.initial[ok], self.endpoints[ok]
        if X0.shape[0] < 2:
            return 0.0
        dx = np.linalg.norm(X0[:, None, :] - X0[None, :, :], axis=2)
        de = np.linalg.norm(E[:, None, :] - E[None, :, :], axis=2)
        mask = dx > 1e-12
        return float((de[mask] / dx[mask]).max()) if mask.any() else 0.0

    def summary(self) -> dict:
        return {
            "n_samples": int(self.initial.shape[0]),
            "n_failed": len(self.failures),
            "diameter": self.diameter,
            "lipschitz_estimate": self.lipschitz_estimate(),
        }


def sample_initial_values(family, n: int, seed: int = 0, box=None, t: float = 0.0) -> np.ndarray:
    """Quasi-random points of ``C(t)`` by rejection from a box."""
    lo, hi = family.box if box is None else (np.asarray(box[0], float), np.asarray(box[1], float))
    total = max(64, 4 * n)
    while True:
        X = sampling.in_box(total, lo, hi, seed)
        X = X[family.max_value(t, X) <= 0.0]
        if X.shape[0] >= n:
            return X[:n]
        if total >= MAX_REJECTION_DRAWS:
            raise ConfigurationError(
                f"found {X.shape[0]} of {n} points of C({t}) in {total} box samples; tighten the sampling box"
            )
        total = min(4 * total, MAX_REJECTION_DRAWS)


def reachability_sample(
    family,
    perturbation,
    T: float,
    n_samples: int,
    N: int,
    *,
    seed: int = 0,
    x0s=None,
    box=None,
    threads: Optional[int] = None,
    admission=True,
) -> ReachableSet:
    """Terminal states of the scheme for quasi-random initial values in ``C(0)``.

    Solves are batched; a batch that fails is re-run sample by sample so that
    failures are recorded per sample instead of aborting the sweep.
    """
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    X0 = sample_initial_values(family, n_samples, seed, box) if x0s is None else np.atleast_2d(np.asarray(x0s, float))
    template = SweepingProblem(family, perturbation, X0[0], T)
    if admission is True:
        admit(template, seed=seed)
    grid = uniform_grid(template.T, N)
    workers = threads or max_threads()
    chunks = np.array_split(np.arange(X0.shape[0]), min(workers, X0.shape[0]))

    def run(idx):
        try:
            return idx, march(family, perturbation, X0[idx], grid, seed=seed)[-1], []
        except SweepError:
            ends = np.full((idx.size, family.dim), np.nan)
            fails = []
            for j, i in enumerate(idx):
                try:
                    ends[j] = march(family, perturbation, X0[i], grid, seed=seed)[-1, 0]
                except SweepError as exc:
                    fails.append((int(i), str(exc)))
            return idx, ends, fails

    endpoints = np.full_like(X0, np.nan)
    failures = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for idx, ends, fails in pool.map(run, chunks):
            endpoints[idx] = ends
            failures.extend(fails)
    failures.sort()
    return ReachableSet(X0, endpoints, failures)


def uncovered_point(reach: ReachableSet, family, T: float, min_distance: float = 0.5, samples: int = 4096, seed: int = 0):
    """A point of ``C(T)`` farther than ``min_distance`` from every endpoint, or None."""
    P = sample_initial_values(family, samples, seed, t=T)
    E = reach.endpoints[np.all(np.isfinite(reach.endpoints), axis=1)]
    d = np.linalg.norm(P[:, None, :] - E[None, :, :], axis=2).min(axis=1)
    k = int(np.argmax(d))
    return (P[k], float(d[k])) if d[k] > min_distance else None
