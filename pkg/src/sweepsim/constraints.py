"""Time-dependent sublevel constraint families.

A family is a list of pieces ``f_i(t, x)``; the moving set is
``C(t) = {x : f_i(t, x) <= 0 for every i}``.  Pieces are built from a small
registry (pointwise max of affine maps, isotropic quadratics, user supplied
smooth maps) so that Clarke subdifferentials are available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, OutOfDomain, OutOfHorizon

KINK_TOL = 1e-12
HORIZON_SLACK = 1e-12


@dataclass(frozen=True)
class SubdifferentialHull:
    """Finite generator set whose convex hull is a Clarke subdifferential."""

    generators: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if g.shape[0] == 0:
            raise ValueError("a subdifferential hull needs at least one generator")
        object.__setattr__(self, "generators", g)

    def __len__(self):
        return self.generators.shape[0]

    def contains(self, xi, tol=1e-9) -> bool:
        """Membership of ``xi`` in the hull, up to ``tol`` in Euclidean distance."""
        from .geometry import min_norm_point

        shifted = self.generators - np.asarray(xi, dtype=float)
        return float(np.linalg.norm(min_norm_point(shifted))) <= tol


class Piece:
    """One constraint function ``f(t, x)``."""

    kind = "abstract"
    convex = False
    #: analytic Lipschitz modulus of ``t -> f(t, x)``, when known
    time_lipschitz: Optional[float] = None

    def values(self, t: float, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def generators(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def space_lipschitz(self) -> Optional[float]:
        """Global Lipschitz modulus in x, or None if only locally Lipschitz."""
        return None

    def to_dict(self) -> dict:
        raise ConfigurationError(f"{self.kind} pieces cannot be serialized")


@dataclass(frozen=True, eq=False)
class MaxAffine(Piece):
    """``f(t, x) = max_j <rows_j, x> + time_coef_j * t + offset_j``.

    A single row is an affine constraint.  ``|x_1|``-type kinks are written as
    two rows.
    """

    rows: np.ndarray
    time_coef: np.ndarray
    offset: np.ndarray

    kind = "max_affine"
    convex = True

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        k = rows.shape[0]
        tc = np.broadcast_to(np.asarray(self.time_coef, dtype=float), (k,)).copy()
        off = np.broadcast_to(np.asarray(self.offset, dtype=float), (k,)).copy()
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "time_coef", tc)
        object.__setattr__(self, "offset", off)

    @property
    def time_lipschitz(self):
        return float(np.max(np.abs(self.time_coef)))

    def row_values(self, t, X):
        X = np.atleast_2d(X)
        return X @ self.rows.T + (self.time_coef * t + self.offset)

    def values(self, t, X):
        return self.row_values(t, X).max(axis=1)

    def generators(self, t, x):
        vals = self.row_values(t, x)[0]
        active = vals >= vals.max() - KINK_TOL
        return np.unique(self.rows[active], axis=0)

    def space_lipschitz(self):
        return float(np.max(np.linalg.norm(self.rows, axis=1)))

    def to_dict(self):
        return {
            "kind": self.kind,
            "rows": self.rows.tolist(),
            "time_coef": self.time_coef.tolist(),
            "offset": self.offset.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Quadratic(Piece):
    """``f(t, x) = q ||x - center||^2 + <linear, x> + time_coef * t + offset``.

    ``q < 0`` gives nonconvex (hypomonotone, gamma = 2|q|) pieces such as the
    exterior of a ball.
    """

    q: float
    center: np.ndarray
    linear: np.ndarray
    time_coef: float = 0.0
    offset: float = 0.0

    kind = "quadratic"

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        object.__setattr__(self, "center", c)
        lin = np.broadcast_to(np.asarray(self.linear, dtype=float), c.shape).copy()
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "time_coef", float(self.time_coef))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def convex(self):
        return self.q >= 0

    @property
    def time_lipschitz(self):
        return abs(self.time_coef)

    def values(self, t, X):
        X = np.atleast_2d(X)
        diff = X - self.center
        return (
            self.q * np.einsum("ij,ij->i", diff, diff)
            + X @ self.linear
            + self.time_coef * t
            + self.offset
        )

    def generators(self, t, x):
        x = np.asarray(x, dtype=float).ravel()
        return (2.0 * self.q * (x - self.center) + self.linear)[None, :]

    def space_lipschitz(self):
        return None if self.q != 0 else float(np.linalg.norm(self.linear))

    def to_dict(self):
        return {
            "kind": self.kind,
            "q": self.q,
            "center": self.center.tolist(),
            "linear": self.linear.tolist(),
            "time_coef": self.time_coef,
            "offset": self.offset,
        }


@dataclass(frozen=True, eq=False)
class Smooth(Piece):
    """A C^1 piece given by user callables ``value(t, x)`` and ``grad(t, x)``."""

    value: Callable[[float, np.ndarray], float]
    grad: Callable[[float, np.ndarray], np.ndarray]
    time_lipschitz: Optional[float] = None
    is_convex: bool = False

    kind = "smooth"

    @property
    def convex(self):
        return self.is_convex

    def values(self, t, X):
        X = np.atleast_2d(X)
        return np.array([float(self.value(t, x)) for x in X])

    def generators(self, t, x):
        return np.atleast_2d(np.asarray(self.grad(t, np.asarray(x, dtype=float)), dtype=float))


@dataclass(frozen=True, eq=False)
class ConstraintFamily:
    """``C(t) = {x in R^dim : f_i(t, x) <= 0}`` for ``t`` in ``[0, horizon]``.

    ``rho`` is the enlargement radius of the assumptions (``inf`` allowed);
    ``box`` is the sampling box used by the certification checks.
    """

    dim: int
    horizon: float
    pieces: tuple
    rho: float = math.inf
    box: Optional[tuple] = None
    name: str = ""
    _poly: Optional[tuple] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ConfigurationError("a constraint family needs at least one piece")
        if self.horizon <= 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if not self.rho > 0:
            raise ConfigurationError("rho must be positive")
        object.__setattr__(self, "pieces", pieces)
        if self.box is None:
            lo, hi = -3.0 * np.ones(self.dim), 3.0 * np.ones(self.dim)
        else:
            lo, hi = (np.asarray(b, dtype=float).ravel() for b in self.box)
        if lo.shape != (self.dim,) or hi.shape != (self.dim,) or np.any(hi <= lo):
            raise ConfigurationError("box must be a pair of dim-vectors with lo < hi")
        object.__setattr__(self, "box", (lo, hi))
        if all(isinstance(p, MaxAffine) for p in pieces):
            for p in pieces:
                if p.rows.shape[1] != self.dim:
                    raise ConfigurationError("piece dimension does not match family")
            A = np.vstack([p.rows for p in pieces])
            b = np.concatenate([p.time_coef for p in pieces])
            c = np.concatenate([p.offset for p in pieces])
            object.__setattr__(self, "_poly", (A, b, c))

    @property
    def m(self) -> int:
        return len(self.pieces)

    @property
    def is_polyhedral(self) -> bool:
        return self._poly is not None

    def halfspaces(self, t):
        """``(A, d)`` with ``C(t) = {x : A x <= d}`` for polyhedral families."""
        if self._poly is None:
            return None
        A, b, c = self._poly
        return A, -(b * t + c)

    def check_time(self, t):
        if not (-HORIZON_SLACK <= t <= self.horizon + HORIZON_SLACK):
            raise OutOfHorizon(f"t={t!r} outside [0, {self.horizon}]")

    def values(self, t, X) -> np.ndarray:
        """Matrix of ``f_i(t, x)``, shape ``(len(X), m)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([p.values(t, X) for p in self.pieces])

    def max_value(self, t, X) -> np.ndarray:
        return self.values(t, X).max(axis=1)

    def evaluate(self, i, t, x) -> float:
        if not 0 <= i < self.m:
            raise IndexError(f"piece index {i} out of range for m={self.m}")
        self.check_time(t)
        return float(self.pieces[i].values(t, np.asarray(x, dtype=float))[0])

    def subdifferential(self, i, t, x) -> SubdifferentialHull:
        if not 0 <= i < self.m:
            raise IndexError(f"piece index {i} out of range for m={self.m}")
        self.check_time(t)
        x = np.asarray(x, dtype=float).ravel()
        if math.isfinite(self.rho):
            from .geometry import SetSlice, distance

            if distance(x, SetSlice(self, t)) >= self.rho:
                raise OutOfDomain(f"{list(x)} is not within rho={self.rho} of C({t})")
        return SubdifferentialHull(self.pieces[i].generators(t, x))

    def membership(self, t, x, tol=0.0) -> bool:
        self.check_time(t)
        return bool(self.max_value(t, x)[0] <= tol)

    def violated(self, t, x, tol=0.0) -> list:
        """Indices of the pieces with ``f_i(t, x) > tol``."""
        vals = self.values(t, x)[0]
        return [i for i in range(self.m) if vals[i] > tol]

    def time_lipschitz(self) -> Optional[float]:
        """Registered (analytic) L1, or None if some piece does not declare one."""
        mods = [p.time_lipschitz for p in self.pieces]
        return None if any(m is None for m in mods) else float(max(mods))

    def scaled(self, c: float) -> "ConstraintFamily":
        """Family with every piece multiplied by ``c > 0`` (same sets)."""
        if c <= 0:
            raise ValueError("scale must be positive")
        pieces = []
        for p in self.pieces:
            if isinstance(p, MaxAffine):
                pieces.append(MaxAffine(c * p.rows, c * p.time_coef, c * p.offset))
            elif isinstance(p, Quadratic):
                pieces.append(
                    Quadratic(c * p.q, p.center, c * p.linear, c * p.time_coef, c * p.offset)
                )
            else:
                pieces.append(
                    Smooth(
                        lambda t, x, p=p: c * p.value(t, x),
                        lambda t, x, p=p: c * np.asarray(p.grad(t, x)),
                        None if p.time_lipschitz is None else c * p.time_lipschitz,
                        p.is_convex,
                    )
                )
        return ConstraintFamily(self.dim, self.horizon, tuple(pieces), self.rho, self.box, self.name)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "horizon": self.horizon,
            "rho": None if math.isinf(self.rho) else self.rho,
            "box": [self.box[0].tolist(), self.box[1].tolist()],
            "pieces": [p.to_dict() for p in self.pieces],
        }


def piece_from_dict(d: dict) -> Piece:
    kind = d.get("kind")
    if kind == "max_affine":
        return MaxAffine(d["rows"], d["time_coef"], d["offset"])
    if kind == "quadratic":
        return Quadratic(d["q"], d["center"], d["linear"], d["time_coef"], d["offset"])
    raise ConfigurationError(f"unknown piece kind {kind!r}")


def abs_kink(dim: int, axis: int, sign_vec: Sequence[float], time_coef: float, offset: float = 0.0):
    """``time_coef*t + <sign_vec, x> + |x_axis| + offset`` as a two-row MaxAffine."""
    base = np.asarray(sign_vec, dtype=float)
    e = np.zeros(dim)
    e[axis] = 1.0
    return MaxAffine(np.vstack([base + e, base - e]), [time_coef, time_coef], [offset, offset])


# module-level spellings of the family methods


def evaluate(F: ConstraintFamily, i: int, t: float, x) -> float:
    return F.evaluate(i, t, x)


def subdifferential(F: ConstraintFamily, i: int, t: float, x) -> SubdifferentialHull:
    return F.subdifferential(i, t, x)


def membership(F: ConstraintFamily, t: float, x, tol: float = 0.0) -> bool:
    return F.membership(t, x, tol)
