"""Perturbed sweeping processes over prox-regular sublevel sets.

Constraint families, projections, sampled assumption checks, the
catching-up solver, closed-form benchmark solutions and a-posteriori
verification.
"""

from .assumptions import AssumptionReport, certify
from .constraints import ConstraintFamily, MaxAffine, Quadratic, Smooth, abs_kink
from .errors import (
    AdmissionError,
    AmbiguousProjection,
    BoundViolated,
    ConfigurationError,
    EmptySample,
    InfeasibleDirection,
    InfeasibleInitial,
    InfeasibleSlice,
    NonConvergence,
    SweepError,
)
from .geometry import ProxCertificate, SetSlice, distance, project, proximal_normal_residual
from .solver import (
    SweepingProblem,
    Trajectory,
    affine_in_t,
    catching_up,
    gravity,
    solution_bound,
    velocity_bound_check,
    zero_perturbation,
)
from .verify import convergence_study, inclusion_residual, reachability_sample, residual_report

__version__ = "0.1.0"

__all__ = [
    "AdmissionError",
    "AmbiguousProjection",
    "AssumptionReport",
    "BoundViolated",
    "ConfigurationError",
    "ConstraintFamily",
    "EmptySample",
    "InfeasibleDirection",
    "InfeasibleInitial",
    "InfeasibleSlice",
    "MaxAffine",
    "NonConvergence",
    "ProxCertificate",
    "Quadratic",
    "SetSlice",
    "Smooth",
    "SweepError",
    "SweepingProblem",
    "Trajectory",
    "abs_kink",
    "affine_in_t",
    "catching_up",
    "certify",
    "convergence_study",
    "distance",
    "gravity",
    "inclusion_residual",
    "project",
    "proximal_normal_residual",
    "reachability_sample",
    "residual_report",
    "solution_bound",
    "velocity_bound_check",
    "zero_perturbation",
]
