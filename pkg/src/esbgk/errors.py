"""Exception types shared across the package."""


class EsbgkError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(EsbgkError, ValueError):
    """A parameter violates its documented precondition.

    ``field`` names the offending parameter so callers (and the CLI) can
    report it precisely.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NonPositiveDensityError(EsbgkError):
    """Quadrature mass of a distribution is not strictly positive."""


class NotSpdError(EsbgkError):
    """A temperature tensor failed the positive-definiteness check."""


class NoConvergenceError(EsbgkError):
    """Newton moment matching did not converge within the iteration budget."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class DegenerateBasisError(EsbgkError):
    """Discrete Gram matrix is numerically singular (grid too coarse)."""


class CflViolationError(EsbgkError):
    """Transport time step exceeds the CFL bound."""


class BoundViolationError(EsbgkError):
    """An equivalence bound was violated; carries the offending direction."""

    def __init__(self, message, direction=None):
        self.direction = direction
        super().__init__(message)


class InsufficientSamplesError(EsbgkError):
    """Too few samples for a statistical fit."""


class ValidityWarning(UserWarning):
    """Input is usable but violates a soft precondition (e.g. negative F)."""
