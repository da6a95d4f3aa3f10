"""Exception types raised across the package."""


class LintelError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(LintelError, ValueError):
    """A kernel description has invalid structure or hyperparameters."""


class UnsupportedKernelError(LintelError, NotImplementedError):
    """The kernel family has no exact state-space representation here."""


class NumericalError(LintelError, ArithmeticError):
    """A factorization or density computation failed numerically."""


class OutOfOrderError(LintelError, ValueError):
    """An observation arrived with a timestamp earlier than the last one."""

    def __init__(self, t, t_prev):
        super().__init__(f"timestamp {t!r} precedes previous timestamp {t_prev!r}")
        self.t = t
        self.t_prev = t_prev


class DegenerateLikelihoodError(NumericalError):
    """Every candidate assigned zero density to an observation."""


class FitFailureError(NumericalError):
    """Evidence maximization found no finite objective value."""


class IngestionError(LintelError, ValueError):
    """A time-series file could not be parsed or validated."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ConfigError(LintelError, ValueError):
    """An experiment configuration failed validation."""
