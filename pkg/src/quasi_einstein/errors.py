"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`QEError`,
which is itself a :class:`ValueError` so callers that only care about bad
input can catch the builtin.
"""


class QEError(ValueError):
    """Base class for all package errors."""


class InvalidDimension(QEError):
    pass


class InvalidM(QEError):
    pass


class InconsistentMu(QEError):
    pass


class DimensionMismatch(QEError):
    pass


class DimensionTooLow(QEError):
    pass


class MEqualsOne(QEError):
    """rho, P and Q carry a 1/(m-1) and are undefined for m = 1."""


class DomainError(QEError):
    pass


class BoundaryEvaluation(DomainError):
    pass


class SingularChart(QEError):
    pass


class UnsupportedLink(QEError):
    pass


class NonIntegerM(QEError):
    pass


class FiberMismatch(QEError):
    pass


class DegenerateData(QEError):
    pass


class SmoothnessViolation(QEError):
    pass


class BlowUp(QEError):
    pass


class NoBracket(QEError):
    pass


class MaxIterations(QEError):
    pass


class EmptyCell(QEError):
    pass


class NonCompactEntry(QEError):
    pass


class UnknownId(QEError, KeyError):
    pass


class PoleSingularity(QEError):
    """Start on an axis without the data that make it smooth."""
