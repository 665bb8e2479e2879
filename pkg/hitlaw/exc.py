class Error(Exception):
    """Generic error class."""


class InvalidInputError(Error, ValueError):
    """Raised when an invalid or conflicting argument is supplied."""


class ConfigurationError(InvalidInputError):
    """A system or experiment was configured with inadmissible parameters.

    This error generally corresponds to construction time state errors.
    ``errors`` lists every violated key.

    """

    def __init__(self, message, errors=()):
        super().__init__(message)
        self.errors = list(errors) or [message]


class NonConvergenceError(Error):
    """An iteration hit its step cap before reaching the tolerance."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InsufficientDataError(Error):
    """A scaling fit had too few usable radii.

    ``points`` carries the per-radius records that were rejected.

    """

    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = list(points)


class InsufficientHorizonError(InsufficientDataError):
    """No radius passed the censoring rule within the horizon."""


class DegenerateTargetError(Error):
    """The expected number of target visits is zero."""


class InversionError(Error):
    """A monotone circle map could not be inverted numerically."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
