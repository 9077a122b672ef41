"""Exception types raised across the package."""


class MechSqueezeError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MechSqueezeError, ValueError):
    pass


class NumericalDegeneracyError(MechSqueezeError, ArithmeticError):
    """A matrix needed by the operation is singular or too ill-conditioned."""


class ResourceLimitError(MechSqueezeError):
    pass


class TruncationError(MechSqueezeError):
    """Fock-space truncation discards more probability than the configured gate."""


class UndefinedRatioError(MechSqueezeError, ArithmeticError):
    pass


class InvalidDataError(MechSqueezeError, ValueError):
    pass


class FitError(MechSqueezeError):
    """Nonlinear least squares did not converge.

    The ``diagnostics`` dict carries the last parameter vector, residual norm,
    gradient norm and iteration count.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(MechSqueezeError):
    """Scenario configuration failed to parse or validate."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
