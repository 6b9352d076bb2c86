"""Exception and warning types raised across the package."""


class SweepError(Exception):
    """Base class for every error raised by sweepsim."""


class ConfigurationError(SweepError, ValueError):
    """Invalid problem setup (bad horizon, step count, dimensions...)."""


class OutOfHorizon(SweepError, ValueError):
    pass


class OutOfDomain(SweepError, ValueError):
    pass


class NonConvergence(SweepError, RuntimeError):
    pass


class InfeasibleSlice(SweepError, RuntimeError):
    """A slice C(t) turned out to be empty."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"constraint set is empty at t={t!r}")


class InfeasibleInitial(SweepError, ValueError):
    """The initial value is not (and cannot be healed into) a point of C(0)."""

    def __init__(self, message, violated=()):
        self.violated = tuple(violated)
        super().__init__(message)


class EmptySample(SweepError, RuntimeError):
    pass


class InfeasibleDirection(SweepError, RuntimeError):
    """No unit direction strictly decreases every active constraint.

    ``witness`` holds ``(t, x, generators)`` of the refuting sample.
    """

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class BoundViolated(SweepError, RuntimeError):
    def __init__(self, step, lhs, envelope):
        self.step = step
        self.lhs = lhs
        self.envelope = envelope
        super().__init__(
            f"velocity bound violated at step {step}: {lhs:.6g} > {envelope:.6g}"
        )


class AdmissionError(SweepError, ValueError):
    """The problem failed the pre-solve assumption checks."""


class AmbiguousProjection(UserWarning):
    """Several nearest points were found; the lexicographically smallest is returned."""

    def __init__(self, point, candidates):
        self.point = point
        self.candidates = candidates
        super().__init__(
            f"projection of {[float(v) for v in point]} is not unique: "
            f"{[[float(v) for v in c] for c in candidates]}"
        )
