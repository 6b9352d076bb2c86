"""Distance, projection and normal-cone primitives on constraint slices.

Polyhedral slices and single-ball slices are projected in closed form
(active-set enumeration, resp. radial scaling).  Anything else falls back to
a multi-start SLSQP solve of ``min 1/2 ||y - p||^2 s.t. f_i(t, y) <= 0``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import sampling
from .constraints import ConstraintFamily, MaxAffine, Quadratic
from .errors import (
    AmbiguousProjection,
    ConfigurationError,
    EmptySample,
    InfeasibleSlice,
    NonConvergence,
)

EXACT_TOL = 1e-9
ITERATIVE_TOL = 1e-6
N_STARTS = 8
MAX_ITER = 10_000
# cap on the sampling radius of the proximal-normal test; r/2 is used below it
MAX_SAMPLE_RADIUS = 1.0


@dataclass(frozen=True, eq=False)
class SetSlice:
    """The set ``C(t)`` of a family at a fixed time.

    Construction probes nonemptiness by projecting the centre of the
    family's sampling box; pass ``check=False`` to skip the probe.
    """

    family: ConstraintFamily
    t: float
    check: bool = True
    method: str = field(default="auto")

    def __post_init__(self):
        self.family.check_time(self.t)
        kind = _projector_kind(self.family)
        if self.method == "auto":
            object.__setattr__(self, "method", kind)
        elif self.method not in ("polyhedral", "ball", "iterative"):
            raise ConfigurationError(f"unknown projection method {self.method!r}")
        elif self.method != "iterative" and self.method != kind:
            raise ConfigurationError(f"{self.method} projection unavailable for this family")
        if self.check:
            lo, hi = self.family.box
            with warnings.catch_warnings():
                # only nonemptiness matters here, not which nearest point is found
                warnings.simplefilter("ignore", AmbiguousProjection)
                project_many(((lo + hi) / 2)[None, :], self)

    @property
    def dim(self):
        return self.family.dim

    @property
    def tol(self):
        return ITERATIVE_TOL if self.method == "iterative" else EXACT_TOL

    def max_value(self, X):
        return self.family.max_value(self.t, X)

    def contains(self, x, tol=0.0) -> bool:
        return bool(self.max_value(x)[0] <= tol)


def _projector_kind(family: ConstraintFamily) -> str:
    if family.is_polyhedral:
        return "polyhedral"
    if (
        family.m == 1
        and isinstance(family.pieces[0], Quadratic)
        and family.pieces[0].q != 0
        and not np.any(family.pieces[0].linear)
    ):
        return "ball"
    return "iterative"


# --------------------------------------------------------------------------
# closed-form projectors


@lru_cache(maxsize=64)
def _active_sets(key: bytes, k: int, n: int):
    """Linearly independent row subsets with their projection operators."""
    A = np.frombuffer(key, dtype=float).reshape(k, n)
    out = []
    for size in range(1, min(k, n) + 1):
        for J in itertools.combinations(range(k), size):
            AJ = A[list(J)]
            gram = AJ @ AJ.T
            if np.linalg.cond(gram) > 1e12:
                continue
            out.append((np.array(J), AJ.T @ np.linalg.inv(gram)))
    return tuple(out)


def project_polyhedron(P: np.ndarray, A: np.ndarray, d: np.ndarray, tol: float = EXACT_TOL) -> np.ndarray:
    """Euclidean projection of each row of ``P`` onto ``{x : A x <= d}``.

    Every nearest point is the projection onto the affine hull of a linearly
    independent subset of its active constraints, so the feasible candidate
    of least distance over all such subsets is the projection.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    A = np.ascontiguousarray(A, dtype=float)
    k, n = A.shape
    scale = np.linalg.norm(A, axis=1)

    def feasible(X):
        return np.all((X @ A.T - d) / scale <= tol * np.maximum(1.0, np.abs(d) / scale), axis=1)

    out = P.copy()
    best = np.where(feasible(P), 0.0, np.inf)
    todo = ~np.isfinite(best)
    if not todo.any():
        return out
    Q = P[todo]
    qbest = np.full(Q.shape[0], np.inf)
    qout = Q.copy()
    for J, MJ in _active_sets(A.tobytes(), k, n):
        R = Q @ A[J].T - d[J]
        C = Q - R @ MJ.T
        dist = np.linalg.norm(C - Q, axis=1)
        better = feasible(C) & (dist < qbest)
        qbest[better] = dist[better]
        qout[better] = C[better]
    if not np.all(np.isfinite(qbest)):
        raise InfeasibleSlice(None, "polyhedral slice is empty")
    out[todo] = qout
    return out


def _project_ball(P, piece: Quadratic, t):
    r2 = -(piece.time_coef * t + piece.offset) / piece.q
    c = piece.center
    diff = P - c
    nrm = np.linalg.norm(diff, axis=1)
    out = P.copy()
    if piece.q > 0:
        if r2 < 0:
            raise InfeasibleSlice(t)
        R = math.sqrt(r2)
        far = nrm > R
        out[far] = c + R * diff[far] / nrm[far, None]
        return out
    if r2 <= 0:
        return out
    R = math.sqrt(r2)
    near = nrm < R
    centre = near & (nrm == 0.0)
    radial = near & ~centre
    out[radial] = c + R * diff[radial] / nrm[radial, None]
    if centre.any():
        # every point of the sphere is nearest; lexicographic minimum is c - R e_1
        e1 = np.zeros(P.shape[1])
        e1[0] = 1.0
        pick = c - R * e1
        sphere_pts = [c - R * e1, c + R * e1]
        for idx in np.flatnonzero(centre):
            warnings.warn(AmbiguousProjection(P[idx], sphere_pts), stacklevel=3)
            out[idx] = pick
    return out


# --------------------------------------------------------------------------
# iterative fallback


def _slsqp_constraints(family: ConstraintFamily, t: float):
    cons = []
    for p in family.pieces:
        if isinstance(p, MaxAffine):
            cons.append(
                {
                    "type": "ineq",
                    "fun": lambda y, p=p: -(p.rows @ y + p.time_coef * t + p.offset),
                    "jac": lambda y, p=p: -p.rows,
                }
            )
        else:
            cons.append(
                {
                    "type": "ineq",
                    "fun": lambda y, p=p: -p.values(t, y),
                    "jac": lambda y, p=p: -p.generators(t, y),
                }
            )
    return cons


def _project_iterative(p, S: SetSlice, tol, r=None, seed=0, starts=N_STARTS):
    fam, t = S.family, S.t
    if S.max_value(p)[0] <= 0.0:
        return p.copy()
    cons = _slsqp_constraints(fam, t)
    rng = np.random.default_rng(seed)
    spread = max(1.0, float(np.max(np.abs(p))))
    inits = [p] + [p + spread * rng.standard_normal(p.size) for _ in range(starts - 1)]
    found = []
    for y0 in inits:
        res = minimize(
            lambda y: 0.5 * np.dot(y - p, y - p),
            y0,
            jac=lambda y: y - p,
            constraints=cons,
            method="SLSQP",
            options={"maxiter": MAX_ITER, "ftol": 1e-16},
        )
        y = res.x
        if np.all(np.isfinite(y)) and S.max_value(y)[0] <= tol:
            found.append(y)
    if not found:
        raise NonConvergence(f"no feasible projection of {list(p)} onto C({t}) after {starts} starts")
    found.sort(key=lambda y: np.linalg.norm(y - p))
    d0 = np.linalg.norm(found[0] - p)
    ties = [y for y in found if np.linalg.norm(y - p) <= d0 + tol]
    distinct = [ties[0]]
    for y in ties[1:]:
        if all(np.linalg.norm(y - z) > 10 * tol for z in distinct):
            distinct.append(y)
    if len(distinct) > 1 and (r is None or d0 >= r):
        distinct.sort(key=tuple)
        warnings.warn(AmbiguousProjection(p, distinct), stacklevel=3)
        return distinct[0]
    return found[0]


# --------------------------------------------------------------------------
# public operations


def project_many(P, S: SetSlice, tol: Optional[float] = None, *, r=None, seed=0) -> np.ndarray:
    """Project every row of ``P`` onto ``S``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    tol = S.tol if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    if S.method == "polyhedral":
        A, d = S.family.halfspaces(S.t)
        try:
            return project_polyhedron(P, A, d, tol)
        except InfeasibleSlice as exc:
            raise InfeasibleSlice(S.t) from exc
    if S.method == "ball":
        return _project_ball(P, S.family.pieces[0], S.t)
    return np.array([_project_iterative(p, S, tol, r=r, seed=seed) for p in P])


def project(p, S: SetSlice, tol: Optional[float] = None, *, r=None, seed=0) -> np.ndarray:
    """Nearest point of ``S`` to ``p``.

    ``r`` is the prox-regularity radius, if known: ties between distinct
    nearest points are only reported (``AmbiguousProjection`` warning) when
    ``p`` lies at least ``r`` away from the set.  The lexicographically
    smallest candidate is returned in that case.
    """
    p = np.asarray(p, dtype=float).ravel()
    if p.size != S.dim:
        raise ValueError(f"point has dimension {p.size}, slice has {S.dim}")
    return project_many(p[None, :], S, tol, r=r, seed=seed)[0]


def distance(p, S: SetSlice, tol: Optional[float] = None) -> float:
    p = np.asarray(p, dtype=float).ravel()
    return float(np.linalg.norm(p - project(p, S, tol)))


def distances(P, S: SetSlice, tol: Optional[float] = None) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    return np.linalg.norm(P - project_many(P, S, tol), axis=1)


def min_norm_point(G) -> np.ndarray:
    """Least-norm point of the convex hull of the rows of ``G``.

    Exact: enumerates affinely independent generator subsets and keeps the
    least-norm affine projection of the origin with nonnegative weights.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    k, n = G.shape
    norms = np.linalg.norm(G, axis=1)
    best = G[np.argmin(norms)]
    best_norm = norms.min()
    for size in range(2, min(k, n + 1) + 1):
        for J in itertools.combinations(range(k), size):
            GJ = G[list(J)]
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = GJ @ GJ.T
            kkt[:size, size] = 1.0
            kkt[size, :size] = 1.0
            rhs = np.zeros(size + 1)
            rhs[size] = 1.0
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            lam = sol[:size]
            if np.any(lam < -1e-12):
                continue
            pt = np.clip(lam, 0.0, None) @ GJ / max(np.clip(lam, 0.0, None).sum(), 1e-300)
            nrm = np.linalg.norm(pt)
            if nrm < best_norm:
                best, best_norm = pt, nrm
    return np.asarray(best, dtype=float)


def sample_near(x, S: SetSlice, radius: float, samples: int, seed: int = 0) -> np.ndarray:
    """Points of ``S`` within ``radius`` of ``x``.

    Quasi-uniform ball samples that are feasible are kept; for the others the
    feasible end of the segment from ``x`` is added, which puts samples on the
    boundary of ``S``.
    """
    x = np.asarray(x, dtype=float).ravel()
    B = x + radius * sampling.in_unit_ball(samples, x.size, seed)
    feas = S.max_value(B) <= 0.0
    kept = [B[feas]]
    U = B[~feas] - x
    if U.shape[0]:
        if S.method == "polyhedral":
            A, d = S.family.halfspaces(S.t)
            slack = d - A @ x
            rate = U @ A.T
            with np.errstate(divide="ignore", invalid="ignore"):
                lim = slack[None, :] / rate
            hi = np.min(np.where(rate > 0, lim, np.inf), axis=1)
            lo = np.max(np.where(rate < 0, lim, -np.inf), axis=1)
            hi = np.minimum(hi, 1.0)
            ends = []
            top = (np.maximum(lo, 0.0) <= hi) & (hi > 0)
            ends.append(x + (hi[top] * (1.0 - 1e-12))[:, None] * U[top])
            entry = (lo > 0) & (lo <= hi)
            ends.append(x + (lo[entry] * (1.0 + 1e-12))[:, None] * U[entry])
            ends = np.concatenate(ends)
            kept.append(ends[S.max_value(ends) <= 0.0] if ends.shape[0] else ends)
        elif S.max_value(x)[0] <= 0.0:
            lo = np.zeros(U.shape[0])
            hi = np.ones(U.shape[0])
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                ok = S.max_value(x + mid[:, None] * U) <= 0.0
                lo = np.where(ok, mid, lo)
                hi = np.where(ok, hi, mid)
            got = lo > 0
            kept.append(x + lo[got, None] * U[got])
    pts = np.concatenate(kept)
    if pts.shape[0] == 0:
        raise EmptySample(f"no feasible sample within {radius} of {list(x)}")
    return pts


def proximal_normal_residual(
    x, v, S: SetSlice, r: float, samples: int = 1000, *, radius=None, seed: int = 0
) -> float:
    """Largest violation of ``<v, x'-x> <= ||v|| ||x'-x||^2 / (2r)`` over sampled ``x'``.

    Samples are drawn from ``S`` within ``min(r/2, MAX_SAMPLE_RADIUS)`` of
    ``x`` (or ``radius`` if given).  A value ``<= tol`` means ``v`` passes as
    a proximal normal of ``S`` at ``x``.
    """
    x = np.asarray(x, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if r <= 0:
        raise ValueError("r must be positive")
    if not np.any(v):
        raise ValueError("v must be nonzero")
    if radius is None:
        radius = min(r / 2.0, MAX_SAMPLE_RADIUS)
    pts = sample_near(x, S, radius, samples, seed)
    diff = pts - x
    vals = diff @ v - np.linalg.norm(v) / (2.0 * r) * np.einsum("ij,ij->i", diff, diff)
    return float(vals.max())


# --------------------------------------------------------------------------
# prox-regularity certificate


@dataclass(frozen=True)
class ProxCertificate:
    """Constants of the sublevel-set assumptions and what they imply.

    ``r = min(rho, mu/gamma)`` is the prox-regularity radius and ``theta``
    (default ``L1/mu``) the Hausdorff-Lipschitz modulus of ``t -> C(t)``.
    """

    rho: float
    L1: float
    gamma: float
    mu: float
    theta: Optional[float] = None
    vbar_field: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.rho > 0 or not self.gamma > 0 or not self.mu > 0 or self.L1 < 0:
            raise ConfigurationError(
                f"certificate needs rho, gamma, mu > 0 and L1 >= 0 "
                f"(got rho={self.rho}, gamma={self.gamma}, mu={self.mu}, L1={self.L1})"
            )
        floor = self.L1 / self.mu
        if self.theta is None:
            object.__setattr__(self, "theta", floor)
        elif self.theta < floor * (1 - 1e-12):
            raise ConfigurationError(f"theta={self.theta} below L1/mu={floor}")

    @property
    def r(self) -> float:
        return prox_radius(self)

    def vbar(self, t, x) -> np.ndarray:
        if self.vbar_field is None:
            raise ValueError("certificate carries no descent-direction field")
        v = np.asarray(self.vbar_field(t, x), dtype=float)
        return v / np.linalg.norm(v)

    def to_dict(self) -> dict:
        fin = lambda z: None if math.isinf(z) else z  # noqa: E731
        return {
            "rho": fin(self.rho),
            "L1": self.L1,
            "gamma": self.gamma,
            "mu": self.mu,
            "r": fin(self.r),
            "theta": self.theta,
        }


def prox_radius(cert: ProxCertificate) -> float:
    return min(cert.rho, cert.mu / cert.gamma)


@dataclass
class HausdorffReport:
    rows: list  # (s, t, estimate, bound, ratio)
    worst_ratio: float
    passed: bool


def boundary_samples(S: SetSlice, samples: int, seed: int = 0) -> np.ndarray:
    """Points of ``S`` obtained by projecting quasi-random box points."""
    lo, hi = S.family.box
    B = sampling.in_box(samples, lo, hi, seed)
    return project_many(B, S)


def hausdorff_estimate(S1: SetSlice, S2: SetSlice, samples: int = 1000, seed: int = 0) -> float:
    """Symmetric sampled estimate of the Hausdorff distance of two slices."""
    P1 = boundary_samples(S1, samples, seed)
    P2 = boundary_samples(S2, samples, seed)
    return float(max(distances(P1, S2).max(), distances(P2, S1).max()))


def hausdorff_check(
    F: ConstraintFamily,
    cert: ProxCertificate,
    time_pairs: Sequence[tuple],
    tol: float = EXACT_TOL,
    samples: int = 1000,
    seed: int = 0,
) -> HausdorffReport:
    """Compare sampled ``d_H(C(s), C(t))`` with ``theta |t - s|``."""
    rows = []
    worst = 0.0
    passed = True
    for s, t in time_pairs:
        est = 0.0 if s == t else hausdorff_estimate(SetSlice(F, s), SetSlice(F, t), samples, seed)
        bound = cert.theta * abs(t - s)
        ratio = 0.0 if est <= tol else (est / bound if bound > 0 else math.inf)
        passed &= est <= bound + tol
        worst = max(worst, ratio)
        rows.append((s, t, est, bound, ratio))
    return HausdorffReport(rows, worst, passed)
