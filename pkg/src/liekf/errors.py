"""Exception types shared across the library."""


class LieKFError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(LieKFError, ValueError):
    """Operand dimensions do not match the group or matrix shapes."""


class NotInAlgebraError(LieKFError, ValueError):
    """Matrix does not lie in the Lie algebra (within tolerance)."""


class InvalidGroupElementError(LieKFError, ValueError):
    """Matrix violates the group membership invariants."""


class AngleNearPiError(LieKFError, ArithmeticError):
    """Rotation angle is within tolerance of pi.

    The principal-branch logarithm is ambiguous there; callers that can
    tolerate either branch must handle this explicitly.
    """


class NotPSDError(LieKFError, ValueError):
    """Covariance matrix has an eigenvalue below the PSD tolerance."""


class SingularInnovationError(LieKFError, ArithmeticError):
    """Innovation covariance is numerically singular.

    Signals the caller to switch to the noise-free limit gain or the
    regularized gain.
    """


class SingularCovarianceError(LieKFError, ArithmeticError):
    """State covariance cannot be inverted even after regularization."""


class NonFiniteError(LieKFError, ArithmeticError):
    """An iterate or state became NaN/inf."""


class NotConvergedError(LieKFError, RuntimeError):
    """Gauss-Newton failed to converge within the iteration budget.

    ``equation_index`` identifies the offending equation when raised by the
    sequential solver.
    """

    def __init__(self, message: str, equation_index: int | None = None):
        super().__init__(message)
        self.equation_index = equation_index


class InconsistentSystemError(LieKFError, RuntimeError):
    """A previously satisfied equation was violated by a later update.

    Indicates the system has no common solution near the iterate.
    """


class IntegrationDivergedError(LieKFError, ArithmeticError):
    """Ground-truth ODE integration produced non-finite state."""


class ConfigError(LieKFError, ValueError):
    """Malformed scenario or system configuration."""
