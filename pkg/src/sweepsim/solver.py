"""Catching-up time stepping for perturbed sweeping processes.

The scheme integrates ``-x'(t) in N_{C(t)}(x(t)) + g(t, x(t))`` by

    x_{k+1} = proj_{C(t_{k+1})}(x_k - h_k g(t_k, x_k)),

which is first order and keeps every state feasible.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from . import sampling
from .assumptions import AssumptionReport, certify
from .constraints import ConstraintFamily
from .errors import (
    AdmissionError,
    BoundViolated,
    ConfigurationError,
    InfeasibleInitial,
    InfeasibleSlice,
    NonConvergence,
)
from .geometry import ProxCertificate, SetSlice, boundary_samples, distance, project, project_many

log = logging.getLogger(__name__)

DEFAULT_HEAL_RADIUS = 1e-2
ADMISSION_BUDGET = 256


def _zero_rate(eta):
    return lambda t: 0.0


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Single-valued force term ``g(t, x)`` with its growth data.

    ``beta(t)`` bounds ``||g(t, x)|| <= beta(t) (1 + ||x||)`` and
    ``k_eta(eta)(t)`` is a Lipschitz modulus of ``g(t, .)`` on the ball of
    radius ``eta``.  ``state_free`` marks maps that ignore ``x`` so batches
    can be evaluated by broadcasting.
    """

    g: Callable[[float, np.ndarray], np.ndarray]
    beta: Callable[[float], float]
    k_eta: Optional[Callable[[float], Callable[[float], float]]] = None
    state_free: bool = False
    spec: Optional[dict] = None

    def __call__(self, t, x):
        return np.asarray(self.g(t, x), dtype=float)

    def batch(self, t, X):
        if self.state_free:
            return np.broadcast_to(self(t, X[0]), X.shape)
        return np.array([self(t, x) for x in X])

    @property
    def is_zero(self):
        return self.spec is not None and self.spec.get("kind") == "zero"


def zero_perturbation(dim: int) -> Perturbation:
    z = np.zeros(dim)
    return Perturbation(lambda t, x: z, lambda t: 0.0, _zero_rate, True, {"kind": "zero"})


def gravity(dim: int, g0: float = 9.8) -> Perturbation:
    """``g(t, x) = (0, ..., 0, g0 t)``: free fall along the last axis."""
    e = np.zeros(dim)
    e[-1] = 1.0
    return Perturbation(
        lambda t, x: g0 * t * e, lambda t: abs(g0) * t, _zero_rate, True, {"kind": "gravity", "g0": g0}
    )


def affine_in_t(intercept, slope) -> Perturbation:
    """``g(t, x) = intercept + slope * t``, independent of the state."""
    a = np.asarray(intercept, dtype=float)
    b = np.asarray(slope, dtype=float)
    return Perturbation(
        lambda t, x: a + b * t,
        lambda t: float(np.linalg.norm(a + b * t)),
        _zero_rate,
        True,
        {"kind": "affine_in_t", "intercept": a.tolist(), "slope": b.tolist()},
    )


@dataclass(frozen=True, eq=False)
class SweepingProblem:
    family: ConstraintFamily
    perturbation: Perturbation
    x0: np.ndarray
    T: Optional[float] = None

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).ravel()
        if x0.size != self.family.dim:
            raise ConfigurationError(f"x0 has dimension {x0.size}, family has {self.family.dim}")
        if not np.all(np.isfinite(x0)):
            raise ConfigurationError("x0 must be finite")
        object.__setattr__(self, "x0", x0)
        T = self.family.horizon if self.T is None else float(self.T)
        if not 0 < T <= self.family.horizon * (1 + 1e-12):
            raise ConfigurationError(f"T={T} must lie in (0, {self.family.horizon}]")
        object.__setattr__(self, "T", T)

    def with_x0(self, x0) -> "SweepingProblem":
        return SweepingProblem(self.family, self.perturbation, x0, self.T)


@dataclass
class Trajectory:
    grid: np.ndarray
    states: np.ndarray
    problem: Optional[SweepingProblem] = field(default=None, repr=False)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.grid)

    @property
    def velocities(self) -> np.ndarray:
        """Backward differences ``(x_k - x_{k-1}) / (t_k - t_{k-1})``, k = 1..N."""
        return np.diff(self.states, axis=0) / self.steps[:, None]

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return self.grid.size


@dataclass
class AdmissionReport:
    assumptions: AssumptionReport
    certificate: Optional[ProxCertificate]
    envelope_violations: list

    @property
    def passed(self):
        return self.assumptions.all_passed and not self.envelope_violations


def check_envelopes(problem: SweepingProblem, samples: int = 256, seed: int = 0) -> list:
    """Sampled check of the growth and local Lipschitz bounds of ``g``."""
    F, pert = problem.family, problem.perturbation
    out = []
    ts = sampling.times(max(2, int(math.sqrt(samples))), problem.T, seed)
    per = max(2, samples // ts.size)
    for k, s in enumerate(ts):
        X = boundary_samples(SetSlice(F, s, check=False), per, seed + k)
        for t in (s, ts[(k + 1) % ts.size]):
            G = pert.batch(t, X)
            bound = pert.beta(t) * (1.0 + np.linalg.norm(X, axis=1))
            bad = np.linalg.norm(G, axis=1) > bound + 1e-12 * (1 + bound)
            for x in X[bad][:4]:
                out.append({"kind": "growth", "t": float(t), "x": x.tolist()})
            if pert.k_eta is not None and X.shape[0] > 1:
                eta = float(np.linalg.norm(X, axis=1).max())
                k_t = pert.k_eta(eta)(t)
                dG = np.linalg.norm(G[1:] - G[:-1], axis=1)
                dX = np.linalg.norm(X[1:] - X[:-1], axis=1)
                bad = dG > k_t * dX + 1e-12 * (1 + dG)
                for x in X[1:][bad][:4]:
                    out.append({"kind": "lipschitz", "t": float(t), "x": x.tolist()})
    return out


def admit(problem: SweepingProblem, gamma: float = 1e-6, budget: int = ADMISSION_BUDGET, seed: int = 0) -> AdmissionReport:
    """Run the pre-solve assumption and envelope checks; raise on failure."""
    rep = certify(problem.family, gamma, budget, seed)
    env = check_envelopes(problem, budget, seed)
    cert = rep.certificate(problem.family) if rep.all_passed else None
    adm = AdmissionReport(rep, cert, env)
    if not adm.passed:
        failed = [k for k, ok in rep.passed.items() if not ok]
        if env:
            failed.append("perturbation envelope")
        raise AdmissionError(f"admission checks failed: {', '.join(failed)}")
    return adm


def uniform_grid(T: float, N: int) -> np.ndarray:
    if N < 2:
        raise ConfigurationError(f"need at least 2 steps, got N={N}")
    if not T > 0 or T / N < 1e-12:
        raise ConfigurationError(f"horizon T={T} is too short for {N} steps")
    grid = np.linspace(0.0, T, N + 1)
    return grid


def refined_grid(T: float, N: int, breakpoints, factor: int = 8, width: float = 2.0) -> np.ndarray:
    """Uniform grid plus ``factor``-times finer spacing within ``width*h`` of each breakpoint."""
    grid = uniform_grid(T, N)
    h = T / N
    extra = []
    for b in breakpoints:
        if 0 < b < T:
            extra.append(np.linspace(max(0.0, b - width * h), min(T, b + width * h), int(2 * width * factor) + 1))
    return np.unique(np.concatenate([grid] + extra)) if extra else grid


def _check_grid(grid, T):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ConfigurationError("grid needs at least 3 points")
    if grid[0] != 0.0 or abs(grid[-1] - T) > 1e-12 * max(1.0, T):
        raise ConfigurationError("grid must run from 0 to T")
    if np.any(np.diff(grid) <= 0):
        raise ConfigurationError("grid must be strictly increasing")
    return grid


def march(family, perturbation, X0, grid, *, method="auto", tol=None, seed=0) -> np.ndarray:
    """Advance a batch of states through the catching-up recursion.

    ``X0`` has shape ``(M, n)``; returns states of shape ``(len(grid), M, n)``.
    """
    X = np.atleast_2d(np.asarray(X0, dtype=float)).copy()
    out = np.empty((grid.size,) + X.shape)
    out[0] = X
    for k in range(grid.size - 1):
        t, t_next = grid[k], grid[k + 1]
        Y = X - (t_next - t) * perturbation.batch(t, X)
        S = SetSlice(family, t_next, check=False, method=method)
        try:
            X = project_many(Y, S, tol, seed=seed)
        except InfeasibleSlice as exc:
            raise InfeasibleSlice(t_next) from exc
        out[k + 1] = X
    return out


def prepare_x0(problem: SweepingProblem, r: float = math.inf, heal_radius: float = DEFAULT_HEAL_RADIUS, tol: Optional[float] = None) -> np.ndarray:
    """Validate the initial value; project it if it is only slightly outside C(0).

    Points within ``min(r, heal_radius)`` of ``C(0)`` are projected with a
    warning; farther points raise ``InfeasibleInitial`` naming the violated
    constraints.
    """
    F = problem.family
    S0 = SetSlice(F, 0.0)
    tol = S0.tol if tol is None else tol
    x0 = problem.x0
    if F.max_value(0.0, x0)[0] <= tol:
        return x0
    d = distance(x0, S0)
    names = [f"f{i + 1}" for i in F.violated(0.0, x0, tol)]
    if d < min(r, heal_radius):
        warnings.warn(f"x0 lies {d:.3g} outside C(0) ({', '.join(names)}); projected onto C(0)", stacklevel=3)
        return project(x0, S0)
    raise InfeasibleInitial(
        f"x0={x0.tolist()} violates {', '.join(names)} at t=0 (distance {d:.6g} to C(0))", names
    )


def catching_up(
    problem: SweepingProblem,
    N: int,
    *,
    grid=None,
    tol: Optional[float] = None,
    method: str = "auto",
    seed: int = 0,
    admission=True,
    gamma: float = 1e-6,
    heal_radius: float = DEFAULT_HEAL_RADIUS,
) -> Trajectory:
    """Solve a sweeping problem with ``N`` uniform steps (or an explicit ``grid``).

    ``admission`` may be ``True`` (run :func:`admit`), ``False`` (skip) or an
    :class:`AdmissionReport` computed earlier for the same family.
    """
    grid = uniform_grid(problem.T, N) if grid is None else _check_grid(grid, problem.T)
    if admission is True:
        admission = admit(problem, gamma=gamma, seed=seed)
    r = admission.certificate.r if admission else math.inf
    x0 = prepare_x0(problem, r, heal_radius, tol)
    states = march(problem.family, problem.perturbation, x0, grid, method=method, tol=tol, seed=seed)[:, 0, :]
    traj = Trajectory(grid, states, problem)
    tol_eff = SetSlice(problem.family, 0.0, check=False, method=method).tol if tol is None else tol
    worst = max(float(problem.family.max_value(t, x)[0]) for t, x in zip(grid, states))
    if worst > 10 * tol_eff * max(1.0, float(np.abs(states).max())):
        raise NonConvergence(f"trajectory left the constraint set by {worst:.3g}")
    return traj


@dataclass
class SolutionBound:
    """``||x' + g|| <= (1 + M_x0) beta(t) + |v'(t)|`` with ``v(t) = v_dot * t``."""

    M_x0: float
    beta: Callable[[float], float]
    v_dot: float

    def envelope(self, t):
        return (1.0 + self.M_x0) * self.beta(t) + abs(self.v_dot)


def solution_bound(problem: SweepingProblem, v_dot: float) -> SolutionBound:
    """``M_x0 = |x0| + exp(2 int beta) * int (2 beta (1 + |x0|) + |v_dot|)`` over [0, T]."""
    T = problem.T
    beta = problem.perturbation.beta
    nx0 = float(np.linalg.norm(problem.x0))
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    int_beta = quad(beta, 0.0, T, **opts)[0]
    int_rest = quad(lambda s: 2.0 * beta(s) * (1.0 + nx0) + abs(v_dot), 0.0, T, **opts)[0]
    M = nx0 + math.exp(2.0 * int_beta) * int_rest
    return SolutionBound(M, beta, v_dot)


@dataclass
class BoundReport:
    margins: np.ndarray  # lhs - envelope per step (negative = slack)
    worst_margin: float
    worst_step: int
    slack: float

    @property
    def passed(self):
        return self.worst_margin <= self.slack


def velocity_bound_check(traj: Trajectory, bound: SolutionBound, slack: float = 0.0, *, raise_on_violation: bool = True) -> BoundReport:
    """Check ``||(x_{k+1} - x_k)/h + g(t_k, x_k)|| <= envelope(t_k) + slack`` at every step."""
    g = traj.problem.perturbation
    t = traj.grid[:-1]
    G = np.array([g(tk, xk) for tk, xk in zip(t, traj.states[:-1])])
    lhs = np.linalg.norm(traj.velocities + G, axis=1)
    env = np.array([bound.envelope(tk) for tk in t])
    margins = lhs - env
    k = int(np.argmax(margins))
    rep = BoundReport(margins, float(margins[k]), k, slack)
    if raise_on_violation and not rep.passed:
        raise BoundViolated(k, float(lhs[k]), float(env[k] + slack))
    return rep
