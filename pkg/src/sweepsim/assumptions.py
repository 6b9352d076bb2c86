"""Sampled certification of the sublevel-set assumptions A1-A4.

Sampling can only refute an assumption or fail to refute it; a passing
report means "no violation found at this budget".

A1  ``t -> f_i(t, x)`` is L1-Lipschitz.
A2  ``f_i(t, .)`` is locally Lipschitz near ``C(t)`` (recorded, not estimated).
A3  ``<xi1 - xi2, x1 - x2> >= -gamma ||x1 - x2||^2`` for Clarke subgradients.
A4  some unit ``v`` has ``<xi, v> <= -mu`` for every active subgradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import sampling
from .constraints import ConstraintFamily
from .errors import InfeasibleDirection
from .geometry import ProxCertificate, SetSlice, distances, min_norm_point, project_many

ACTIVE_TOL = 1e-9
CHECK_TOL = 1e-9
MAX_WITNESSES = 64


def _split_budget(budget):
    n_times = max(2, int(math.sqrt(budget) / 2))
    per_time = max(1, math.ceil(budget / n_times))
    return n_times, per_time


def check_A1(F: ConstraintFamily, sample_budget: int = 1000, seed: int = 0):
    """Sampled time-Lipschitz moduli.

    Returns ``(L1, per_piece)`` where ``L1`` is the max over pieces of
    ``|f_i(s, x) - f_i(t, x)| / |s - t|`` on the samples.
    """
    if sample_budget < 100:
        raise ValueError("A1 needs a sample budget of at least 100")
    n_pairs, per_pair = _split_budget(sample_budget)
    T = F.horizon
    st = sampling.halton(n_pairs, 2, seed) * T
    X = sampling.in_box(per_pair, *F.box, seed=seed + 1)
    per_piece = np.zeros(F.m)
    for s, t in st:
        if abs(s - t) < 1e-9 * T:
            continue
        diff = np.abs(F.values(s, X) - F.values(t, X)) / abs(s - t)
        per_piece = np.maximum(per_piece, diff.max(axis=0))
    return float(per_piece.max()), per_piece


def _pairs_at(F, t, n, seed):
    """Sample pairs in the rho-enlargement of C(t), kinks included."""
    X = sampling.in_box(n, *F.box, seed=seed)
    S = SetSlice(F, t, check=False)
    P = project_many(X, S)
    pts = np.concatenate([X, P])
    if math.isfinite(F.rho):
        pts = pts[distances(pts, S) < F.rho]
    rng = np.random.default_rng(seed)
    half = pts.shape[0] // 2
    partner = pts[rng.permutation(pts.shape[0])]
    local = pts + 0.1 * sampling.in_unit_ball(pts.shape[0], F.dim, seed + 7)
    partner[:half] = local[:half]
    if math.isfinite(F.rho):
        keep = distances(partner, S) < F.rho
        return pts[keep], partner[keep]
    return pts, partner


def check_A3(
    F: ConstraintFamily,
    gamma_candidate: float,
    sample_budget: int = 1000,
    seed: int = 0,
    tol: float = CHECK_TOL,
):
    """Sampled hypomonotonicity check.

    Returns a dict with ``gamma_est`` (least gamma consistent with the
    samples), ``violations`` (witness tuples ``(t, i, x1, x2, lhs, rhs)``),
    ``monotone`` per piece (convex pieces must pass with gamma = 0) and
    ``passed``.
    """
    if gamma_candidate <= 0:
        raise ValueError("gamma_candidate must be positive")
    n_times, per_time = _split_budget(sample_budget)
    ts = sampling.times(n_times, F.horizon, seed)
    violations = []
    gamma_est = 0.0
    worst_mono = np.full(F.m, np.inf)
    for k, t in enumerate(ts):
        X1, X2 = _pairs_at(F, t, max(1, per_time // 2), seed + 11 * k)
        for x1, x2 in zip(X1, X2):
            dx = x1 - x2
            d2 = float(dx @ dx)
            if d2 < 1e-20:
                continue
            for i, piece in enumerate(F.pieces):
                G1 = piece.generators(t, x1)
                G2 = piece.generators(t, x2)
                lhs = float((G1 @ dx).min() - (G2 @ dx).max())
                if lhs < -tol:
                    gamma_est = max(gamma_est, -lhs / d2)
                worst_mono[i] = min(worst_mono[i], lhs)
                if lhs < -gamma_candidate * d2 - tol and len(violations) < MAX_WITNESSES:
                    violations.append((float(t), i, x1.tolist(), x2.tolist(), lhs, -gamma_candidate * d2))
    monotone = [bool(w >= -tol) for w in worst_mono]
    for i, piece in enumerate(F.pieces):
        if piece.convex and not monotone[i] and len(violations) < MAX_WITNESSES:
            violations.append((None, i, None, None, float(worst_mono[i]), 0.0))
    return {
        "gamma_candidate": gamma_candidate,
        "gamma_est": gamma_est,
        "monotone": monotone,
        "violations": violations,
        "passed": not violations,
    }


def active_generators(F: ConstraintFamily, t: float, x, active_tol: float = ACTIVE_TOL):
    """Stacked Clarke generators of the pieces active at ``(t, x)``.

    Returns ``None`` when no piece is active (interior point).
    """
    x = np.asarray(x, dtype=float).ravel()
    vals = F.values(t, x)[0]
    act = np.flatnonzero(vals >= -active_tol)
    if act.size == 0:
        return None
    return np.vstack([F.pieces[i].generators(t, x) for i in act])


def descent_direction(F: ConstraintFamily, t: float, x, active_tol: float = ACTIVE_TOL):
    """Best unit ``v`` for A4 at ``(t, x)`` and its margin ``delta``.

    ``delta = max_{|v| <= 1} min_g -<xi_g, v>`` equals the distance from the
    origin to the hull of the active generators; the optimal ``v`` is minus
    the least-norm hull point, normalized.  At interior points the pieces
    closest to activity are used instead.
    """
    x = np.asarray(x, dtype=float).ravel()
    G = active_generators(F, t, x, active_tol)
    if G is None:
        vals = F.values(t, x)[0]
        near = np.flatnonzero(vals >= vals.max() - active_tol)
        G = np.vstack([F.pieces[i].generators(t, x) for i in near])
    xi = min_norm_point(G)
    delta = float(np.linalg.norm(xi))
    if delta <= 1e-12:
        return None, 0.0
    return -xi / delta, delta


def check_A4(F: ConstraintFamily, sample_budget: int = 1000, seed: int = 0, active_tol: float = ACTIVE_TOL):
    """Sampled descent margin over points of ``C(t)``.

    Only pieces active at a sample constrain the direction there (interior
    samples are vacuous).  Returns ``(mu_est, witnesses)`` where each
    witness is ``(t, x, vbar, delta)``; the first entry is the minimizer.
    Raises ``InfeasibleDirection`` when some sample admits no direction.
    """
    if sample_budget < 100:
        raise ValueError("A4 needs a sample budget of at least 100")
    n_times, per_time = _split_budget(sample_budget)
    ts = sampling.times(n_times, F.horizon, seed)
    mu = math.inf
    argmin = None
    witnesses = []
    for k, t in enumerate(ts):
        S = SetSlice(F, t, check=False)
        X = sampling.in_box(per_time, *F.box, seed=seed + 13 * k)
        inside = S.max_value(X) <= 0.0
        # interior samples impose nothing; projections of the outside ones
        # land on faces, edges and vertices of C(t)
        P = project_many(X[~inside], S)
        for x in P:
            G = active_generators(F, t, x, active_tol)
            if G is None:
                continue
            xi = min_norm_point(G)
            delta = float(np.linalg.norm(xi))
            if delta <= 1e-12:
                raise InfeasibleDirection(
                    f"A4 refuted at t={t:.6g}, x={x.tolist()}: 0 lies in the hull of active subgradients",
                    witness=(float(t), x.tolist(), G.tolist()),
                )
            w = (float(t), x.tolist(), (-xi / delta).tolist(), delta)
            if delta < mu:
                mu, argmin = delta, w
            if len(witnesses) < MAX_WITNESSES:
                witnesses.append(w)
    if argmin is None:
        return math.inf, witnesses
    return mu, [argmin] + witnesses


@dataclass
class AssumptionReport:
    """Outcome of a sampled certification run."""

    budget: int
    rho: float
    gamma: float
    L1_est: float
    L1_per_piece: list
    L1_registered: Optional[float]
    gamma_est: float
    mu_est: float
    vbar_witnesses: list
    lipschitz_moduli: list
    violations: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def certificate(self, family: Optional[ConstraintFamily] = None) -> ProxCertificate:
        vfield = None
        if family is not None:
            vfield = lambda t, x: descent_direction(family, t, x)[0]  # noqa: E731
        return ProxCertificate(
            rho=self.rho, L1=self.L1_est, gamma=self.gamma, mu=self.mu_est, vbar_field=vfield
        )

    def to_dict(self) -> dict:
        fin = lambda z: None if (z is None or math.isinf(z)) else z  # noqa: E731
        out = {
            "budget": self.budget,
            "semantics": f"no violation found at budget {self.budget}" if self.all_passed else "refuted",
            "L1": self.L1_est,
            "L1_per_piece": list(map(float, self.L1_per_piece)),
            "L1_registered": self.L1_registered,
            "gamma": self.gamma,
            "gamma_est": self.gamma_est,
            "mu": fin(self.mu_est),
            "rho": fin(self.rho),
            "lipschitz_moduli": self.lipschitz_moduli,
            "passed": self.passed,
            "violations": self.violations,
            "vbar_witnesses": self.vbar_witnesses[:8],
        }
        if self.all_passed and math.isfinite(self.mu_est):
            cert = self.certificate()
            out["r"] = fin(cert.r)
            out["theta"] = cert.theta
        return out


def certify(F: ConstraintFamily, gamma: float, sample_budget: int = 10_000, seed: int = 0) -> AssumptionReport:
    """Run the A1-A4 checks on a family and collect them in one report."""
    L1, per_piece = check_A1(F, sample_budget, seed)
    registered = F.time_lipschitz()
    v_a1 = []
    if registered is not None and L1 > registered + CHECK_TOL:
        v_a1.append({"L1_est": L1, "registered": registered})
    moduli = [p.space_lipschitz() if p.space_lipschitz() is not None else "local" for p in F.pieces]
    a3 = check_A3(F, gamma, sample_budget, seed)
    v_a4 = []
    try:
        mu, wit = check_A4(F, sample_budget, seed)
    except InfeasibleDirection as exc:
        mu, wit = 0.0, []
        v_a4.append({"message": str(exc), "witness": exc.witness})
    if not v_a4 and not math.isfinite(mu):
        v_a4.append({"message": "no boundary sample reached; enlarge the sampling box"})
    violations = {"A1": v_a1, "A2": [], "A3": a3["violations"], "A4": v_a4}
    return AssumptionReport(
        budget=sample_budget,
        rho=F.rho,
        gamma=gamma,
        L1_est=L1,
        L1_per_piece=per_piece.tolist(),
        L1_registered=registered,
        gamma_est=a3["gamma_est"],
        mu_est=mu,
        vbar_witnesses=wit,
        lipschitz_moduli=moduli,
        violations=violations,
        passed={k: not v for k, v in violations.items()},
    )
