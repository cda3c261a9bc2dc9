"""Exception hierarchy shared by every curvheat module."""


class CurvheatError(Exception):
    """Base class for all library errors."""


class DomainError(CurvheatError, ValueError):
    """An argument lies outside the domain of the operation."""


class RangeError(CurvheatError, ArithmeticError):
    """A result overflowed the double-precision range."""


class ConditioningError(CurvheatError, ValueError):
    """A matrix or design is too ill-conditioned to proceed."""


class ParseError(CurvheatError, ValueError):
    """A manifest or command-line value could not be parsed."""


class ValidationError(CurvheatError, ValueError):
    """Input parsed correctly but violates a data-model invariant."""


class PreconditionError(CurvheatError, ValueError):
    """The caller asserted a property of the input that does not hold."""


class OracleInconsistencyError(CurvheatError, RuntimeError):
    """Two exact spectral computations that must agree do not."""


class VerificationError(CurvheatError, RuntimeError):
    """A verified inequality or decay rate failed beyond numerical bounds."""


class DegeneracyWarning(UserWarning):
    """A significant share of the quadrature weight sits on degenerate curvature."""
