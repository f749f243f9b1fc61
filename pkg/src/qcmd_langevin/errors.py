"""Exception types shared across the package."""


class QCMDError(Exception):
    """Base class for all library errors."""


class ContractViolation(QCMDError, ValueError):
    """Inputs have inconsistent shapes or violate a documented precondition."""


class ModelInvalidError(QCMDError, ValueError):
    """A model was constructed with physically meaningless parameters."""


class UnsupportedModelError(QCMDError, ValueError):
    """The requested operation is not defined for this kind of model."""


class StepSizeError(QCMDError, ValueError):
    """The time step does not resolve the fastest oscillation in the system."""


class GapViolationError(QCMDError, ArithmeticError):
    """Electron eigenvalues came closer than the configured gap floor."""

    def __init__(self, message, gap=None, X=None):
        super().__init__(message)
        self.gap = gap
        self.X = X


class InternalConsistencyError(QCMDError, ArithmeticError):
    """Two independent evaluations of the same quantity disagree."""


class NotPSDError(QCMDError, ValueError):
    """A matrix expected to be positive semi-definite has a negative eigenvalue."""


class QuadratureResolutionError(QCMDError, ValueError):
    """A recorded trajectory is sampled too coarsely for the requested diagnostic."""


class ConfigError(QCMDError, ValueError):
    """An experiment configuration failed validation."""
