"""JSON scenario files and the built-in benchmark scenarios.

A scenario declares a constraint family, a force term, initial value(s),
solver settings and an optional closed-form oracle.  Loading is strict
(unknown keys are rejected) and :func:`dumps` writes back exactly the keys
that were provided, so ``load -> dump`` is lossless.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import oracles
from .constraints import ConstraintFamily, piece_from_dict
from .errors import ConfigurationError
from .solver import Perturbation, SweepingProblem, affine_in_t, gravity, zero_perturbation

OUTPUTS = ("trajectory", "residuals", "metadata", "endpoints")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MaxAffineSpec(_Strict):
    kind: Literal["max_affine"]
    rows: List[List[float]]
    time_coef: Union[float, List[float]] = 0.0
    offset: Union[float, List[float]] = 0.0


class QuadraticSpec(_Strict):
    kind: Literal["quadratic"]
    q: float
    center: List[float]
    linear: Union[float, List[float]] = 0.0
    time_coef: float = 0.0
    offset: float = 0.0


PieceSpec = Union[MaxAffineSpec, QuadraticSpec]


class FamilySpec(_Strict):
    dim: int = Field(ge=1)
    horizon: float = Field(gt=0)
    rho: Optional[float] = None  # null means +inf
    box: Optional[List[List[float]]] = None
    pieces: List[PieceSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def _shapes(self):
        if self.rho is not None and not self.rho > 0:
            raise ValueError("rho must be positive (or null for +inf)")
        if self.box is not None:
            if len(self.box) != 2 or any(len(b) != self.dim for b in self.box):
                raise ValueError(f"box must be [lo, hi] with {self.dim} entries each")
            if any(lo >= hi for lo, hi in zip(*self.box)):
                raise ValueError("box needs lo < hi in every coordinate")
        for k, p in enumerate(self.pieces):
            if isinstance(p, MaxAffineSpec):
                if any(len(r) != self.dim for r in p.rows):
                    raise ValueError(f"piece {k + 1}: rows must have {self.dim} entries")
                for name in ("time_coef", "offset"):
                    v = getattr(p, name)
                    if isinstance(v, list) and len(v) != len(p.rows):
                        raise ValueError(f"piece {k + 1}: {name} needs one entry per row")
            elif len(p.center) != self.dim or (isinstance(p.linear, list) and len(p.linear) != self.dim):
                raise ValueError(f"piece {k + 1}: center/linear must have {self.dim} entries")
        return self


class ZeroSpec(_Strict):
    kind: Literal["zero"]


class GravitySpec(_Strict):
    kind: Literal["gravity"]
    g0: float = oracles.G0


class AffineSpec(_Strict):
    kind: Literal["affine_in_t"]
    intercept: List[float]
    slope: List[float]


class SamplerSpec(_Strict):
    n: int = Field(ge=1)
    seed: int = 0
    box: Optional[List[List[float]]] = None


class SolverSpec(_Strict):
    n_steps: int = Field(default=1000, ge=2)
    tol: Optional[float] = Field(default=None, gt=0)
    seed: int = 0
    heal_radius: float = Field(default=1e-2, ge=0)
    samples: int = Field(default=256, ge=1)


class CertifySpec(_Strict):
    gamma: float = Field(default=1e-6, gt=0)
    budget: int = Field(default=10_000, ge=100)


class Scenario(_Strict):
    name: str
    family: FamilySpec
    perturbation: Union[ZeroSpec, GravitySpec, AffineSpec] = Field(default_factory=lambda: ZeroSpec(kind="zero"))
    x0: Union[List[float], SamplerSpec]
    T: Optional[float] = Field(default=None, gt=0)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    certify: CertifySpec = Field(default_factory=CertifySpec)
    oracle: Optional[str] = None
    outputs: List[Literal["trajectory", "residuals", "metadata", "endpoints"]] = Field(
        default_factory=lambda: list(OUTPUTS)
    )

    @field_validator("oracle")
    @classmethod
    def _known_oracle(cls, v):
        if v is not None and v not in oracles.ORACLES:
            raise ValueError(f"unknown oracle {v!r}; choose from {sorted(oracles.ORACLES)}")
        return v

    @model_validator(mode="after")
    def _dims(self):
        n = self.family.dim
        if isinstance(self.x0, list) and len(self.x0) != n:
            raise ValueError(f"x0 has {len(self.x0)} entries, family dimension is {n}")
        if isinstance(self.perturbation, AffineSpec):
            if len(self.perturbation.intercept) != n or len(self.perturbation.slope) != n:
                raise ValueError(f"affine_in_t needs vectors of length {n}")
        if self.T is not None and self.T > self.family.horizon:
            raise ValueError(f"T={self.T} exceeds the family horizon {self.family.horizon}")
        return self

    # -- conversion to library objects

    @property
    def is_batch(self) -> bool:
        return isinstance(self.x0, SamplerSpec)

    @property
    def horizon_T(self) -> float:
        return self.family.horizon if self.T is None else self.T

    def build_family(self) -> ConstraintFamily:
        f = self.family
        pieces = tuple(piece_from_dict(p.model_dump()) for p in f.pieces)
        rho = math.inf if f.rho is None else f.rho
        box = None if f.box is None else (np.array(f.box[0]), np.array(f.box[1]))
        return ConstraintFamily(f.dim, f.horizon, pieces, rho, box, self.name)

    def build_perturbation(self) -> Perturbation:
        p = self.perturbation
        if isinstance(p, GravitySpec):
            return gravity(self.family.dim, p.g0)
        if isinstance(p, AffineSpec):
            return affine_in_t(p.intercept, p.slope)
        return zero_perturbation(self.family.dim)

    def build_problem(self, x0=None) -> SweepingProblem:
        if x0 is None:
            if self.is_batch:
                raise ConfigurationError("scenario declares a sampler; pass an explicit x0")
            x0 = self.x0
        return SweepingProblem(self.build_family(), self.build_perturbation(), x0, self.T)

    def build_oracle(self):
        if self.oracle is None:
            return None
        g0 = self.perturbation.g0 if isinstance(self.perturbation, GravitySpec) else oracles.G0
        return oracles.get_oracle(self.oracle, g0)


# --------------------------------------------------------------------------
# io


def parse(data: dict) -> Scenario:
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid scenario: {exc}") from None


def loads(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"scenario is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a JSON object")
    return parse(data)


def to_dict(sc: Scenario) -> dict:
    """Exactly the fields that were set when the scenario was created."""
    return sc.model_dump(mode="json", exclude_unset=True)


def dumps(sc: Scenario) -> str:
    return json.dumps(to_dict(sc), indent=2) + "\n"


def load(source) -> Scenario:
    """Load a scenario from a JSON file, or by built-in name if no such file exists."""
    path = Path(source)
    if path.is_file():
        return loads(path.read_text())
    if str(source) in BUILTINS:
        return builtin(str(source))
    raise ConfigurationError(f"no scenario file or built-in named {str(source)!r}")


# --------------------------------------------------------------------------
# built-ins

_CONE = {"kind": "max_affine", "rows": [[1.0, -1.0], [-1.0, -1.0]], "time_coef": [1.0, 1.0], "offset": [0.0, 0.0]}
_CAP = {"kind": "max_affine", "rows": [[0.0, 1.0]], "time_coef": [-1.0], "offset": [-1.0]}
_CONE_FAMILY = {"dim": 2, "horizon": 3.0, "rho": None, "pieces": [_CONE]}

BUILTINS = {
    "example1": {
        "name": "example1",
        "family": _CONE_FAMILY,
        "perturbation": {"kind": "zero"},
        "x0": [0.0, 0.0],
        "solver": {"n_steps": 1000},
        "oracle": "example1",
    },
    "example2": {
        "name": "example2",
        "family": _CONE_FAMILY,
        "perturbation": {"kind": "zero"},
        "x0": [0.5, 1.0],
        "solver": {"n_steps": 3000},
        "oracle": "example2",
    },
    "example2-interior": {
        "name": "example2-interior",
        "family": _CONE_FAMILY,
        "perturbation": {"kind": "zero"},
        "x0": [0.5, 1.0],
        "T": 3.0,
        "solver": {"n_steps": 3000},
        "oracle": "example2",
    },
    "example2-boundary": {
        "name": "example2-boundary",
        "family": _CONE_FAMILY,
        "perturbation": {"kind": "zero"},
        "x0": [-0.5, 0.5],
        "solver": {"n_steps": 3000},
        "oracle": "example2",
    },
    "example3": {
        "name": "example3",
        "family": _CONE_FAMILY,
        "perturbation": {"kind": "gravity", "g0": 9.8},
        "x0": [0.0, 1.0],
        "T": 1.0,
        "solver": {"n_steps": 3000},
        "oracle": "example3",
    },
    "example4": {
        "name": "example4",
        "family": {
            "dim": 2,
            "horizon": 3.0,
            "rho": None,
            "box": [[-2.0, -1.0], [2.0, 5.0]],
            "pieces": [_CONE, _CAP],
        },
        "perturbation": {"kind": "zero"},
        "x0": {"n": 100, "seed": 0, "box": [[-1.0, 0.0], [1.0, 1.0]]},
        "T": 3.0,
        "solver": {"n_steps": 3000},
        "oracle": "example4",
    },
    "shell": {
        # exterior of the unit disc: prox-regular but not convex
        "name": "shell",
        "family": {
            "dim": 2,
            "horizon": 1.0,
            "rho": None,
            "pieces": [{"kind": "quadratic", "q": -1.0, "center": [0.0, 0.0], "linear": 0.0, "offset": 1.0}],
        },
        "perturbation": {"kind": "zero"},
        "x0": [2.0, 0.0],
        "solver": {"n_steps": 100},
        "certify": {"gamma": 1.0},
    },
    "static-square": {
        "name": "static-square",
        "family": {
            "dim": 2,
            "horizon": 1.0,
            "rho": None,
            "box": [[-1.0, -1.0], [2.0, 2.0]],
            "pieces": [
                {"kind": "max_affine", "rows": [[1.0, 0.0]], "offset": -1.0},
                {"kind": "max_affine", "rows": [[-1.0, 0.0]]},
                {"kind": "max_affine", "rows": [[0.0, 1.0]], "offset": -1.0},
                {"kind": "max_affine", "rows": [[0.0, -1.0]]},
            ],
        },
        "perturbation": {"kind": "zero"},
        "x0": {"n": 64, "seed": 0, "box": [[0.0, 0.0], [1.0, 1.0]]},
        "solver": {"n_steps": 10},
    },
}


def builtin(name: str) -> Scenario:
    try:
        return parse(json.loads(json.dumps(BUILTINS[name])))
    except KeyError:
        raise ConfigurationError(f"no built-in scenario {name!r}; choose from {sorted(BUILTINS)}") from None
