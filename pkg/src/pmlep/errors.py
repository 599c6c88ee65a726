"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: :class:`ModelDomainError` subclasses give
3, :class:`NumericalError` subclasses give 4.
"""


class PmlepError(Exception):
    """Base class for all package errors."""


class DomainError(PmlepError, ValueError):
    """An argument lies outside the supported domain of an operation."""


class GridError(DomainError):
    """Time grid is not strictly increasing, not uniform, or too coarse."""


class NumericalError(PmlepError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class SingularMatrixError(NumericalError):
    """Gaussian elimination met a pivot below the singularity threshold."""


class ExpmOverflowError(NumericalError):
    """``||m t||`` exceeds the configured bound of the matrix exponential."""


class ModelDomainError(PmlepError):
    """The physical model refuses the request (near the EP, bracket miss)."""


class NearEPError(ModelDomainError):
    """Eigenbasis expansion requested at or too close to the exceptional point."""


class BracketError(ModelDomainError):
    """Search bracket does not contain the exceptional point."""
