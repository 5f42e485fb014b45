"""Exception and warning types shared across the library."""


class InvalidSceneError(ValueError):
    """A channel scene violates a structural constraint (path count, angle
    range, monostatic tie, shared-angle tie, non-positive noise variance)."""


class DegenerateWeightsError(ArithmeticError):
    """All correlations in a neighborhood are zero, so relative weights are
    undefined.  Callers fall back to uniform weights."""


class SingularSystemError(ArithmeticError):
    """The support least-squares normal matrix is singular or numerically
    rank-deficient.  Callers may retry with a small ridge term."""


class SubspaceDeficientError(ArithmeticError):
    """The requested signal-subspace dimension exceeds the numerical rank of
    the snapshot covariance."""


class SingularInformationError(ArithmeticError):
    """A Fisher information matrix is singular, so the corresponding bound is
    undefined.  Carries the subsystem name."""

    def __init__(self, subsystem: str, message: str = ""):
        self.subsystem = subsystem
        super().__init__(message or f"singular Fisher information for subsystem '{subsystem}'")


class ConfigError(ValueError):
    """A config file or override is malformed; the message names the key."""


class DivergenceWarning(RuntimeWarning):
    """The refinement cost increased for several consecutive outer iterations;
    best-so-far parameters were returned."""
