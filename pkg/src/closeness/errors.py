"""Exception types shared across the package."""


class ClosenessError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ClosenessError, ValueError):
    """Inputs violate a documented precondition (shapes, ranges, domains)."""


class ConfigError(ClosenessError):
    """Experiment configuration is malformed.

    Parameters
    ----------
    field : str
        Dotted path of the offending config field, e.g. ``"system.kind"``.
    message : str
        Human-readable description of the problem.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DivergenceError(ClosenessError):
    """A simulated state exceeded the overflow guard."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"state diverged at step {step}")


class StiffnessError(ClosenessError):
    """Adaptive integration failed (step size underflow)."""


class ConditioningError(ClosenessError):
    """A matrix involved in an exact computation is numerically singular."""


class DegenerateInputError(ClosenessError):
    """Input data has no usable variation (coincident or constant points)."""


class HypothesisViolation(ClosenessError):
    """A hypothesis of the analytic embedding bound fails for these inputs."""

    def __init__(self, condition, message):
        self.condition = condition
        super().__init__(f"condition ({condition}): {message}")


class ResonanceError(ClosenessError):
    """A sampling-resonance term is singular, so the bound is undefined."""


class ThresholdUndefined(ClosenessError):
    """Certificate threshold cannot be formed from a non-positive lower constant."""
