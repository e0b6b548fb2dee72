"""Exception hierarchy.

Two families: ``InputError`` for malformed or inconsistent inputs (CLI exit
code 2) and ``MathError`` for well-formed inputs that fail a mathematical
property or hypothesis (CLI exit code 1).
"""


class ErgodecError(Exception):
    """Base class for every error raised by this package."""


class InputError(ErgodecError, ValueError):
    pass


class ShapeError(InputError):
    pass


class DomainError(InputError):
    """A scalar argument lies outside its admissible range (e.g. ``t <= 0``)."""


class SizeError(InputError):
    pass


class MathError(ErgodecError):
    pass


class ValidationError(MathError):
    """The object does not satisfy the defining properties of its type."""


class NotOrderIsomorphismError(MathError):
    """A matrix is not a weighted permutation.

    ``axis`` is ``"row"`` or ``"column"``, ``index`` the offending position and
    ``point`` the corresponding point identifier.
    """

    def __init__(self, message, axis=None, index=None, point=None):
        super().__init__(message)
        self.axis = axis
        self.index = index
        self.point = point


class NoMatchError(MathError):
    pass


class DecompositionMismatchError(NoMatchError):
    pass


class HypothesisError(MathError):
    """A precondition of a construction (unitarity, intertwining, ...) fails."""


class ConsistencyError(MathError):
    """A postcondition that must hold by construction was violated.

    ``clause`` names the violated property.
    """

    def __init__(self, message, clause=None):
        super().__init__(message)
        self.clause = clause


class PrecisionError(MathError):
    pass
