"""Exception hierarchy shared across the package.

Everything raised on purpose derives from :class:`SimplexStatsError` so callers
can catch one base class. Subclasses split along the boundary the command line
tool cares about: bad input from the user versus a numerical procedure that
could not finish.
"""


class SimplexStatsError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SimplexStatsError, ValueError):
    """Invalid data, configuration, or arguments supplied by the caller."""


class DomainError(InputError):
    """Argument outside the mathematical domain of a function."""


class ZeroComponentError(InputError):
    """A composition contains a zero (or negative) component."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class NotNormalizedError(InputError):
    """Composition entries do not sum to one within tolerance."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class TooFewComponentsError(InputError):
    """Fewer than two parts, so there is no composition to speak of."""


class DimensionMismatchError(InputError):
    """Arrays or parameter vectors whose shapes do not line up."""


class TreeFormatError(InputError):
    """Malformed tree text."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class TreeStructureError(InputError):
    """Structurally invalid nesting tree (bad leaves, unary node, ...)."""


class MissingColumnError(InputError):
    """A required CSV column is absent."""


class EmptyGroupError(InputError):
    """A group label with no observations, or a dataset with none at all."""


class DegenerateDataError(InputError):
    """Data without enough variation to fit (a component is constant)."""


class NumericalError(SimplexStatsError, RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class NonConvergenceError(NumericalError):
    """An iterative fit hit its iteration cap before meeting tolerance."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class SingularMatrixError(NumericalError):
    """A matrix that should be invertible is numerically singular."""
