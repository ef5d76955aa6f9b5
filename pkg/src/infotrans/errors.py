"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (a ``ValueError``);
numerical breakdowns derive from :class:`NumericalFailure`.  The CLI maps the
two families to exit codes 1 and 2.
"""


class InfoTransError(Exception):
    """Base class for all package errors."""


class ValidationError(InfoTransError, ValueError):
    """An input violates a documented precondition."""


class NumericalFailure(InfoTransError, ArithmeticError):
    """A computation left the regime where it can be trusted."""


class MeanNotZero(ValidationError):
    """Poisson right-hand side does not integrate to zero."""


class NotTangent(ValidationError):
    """A density tangent vector does not integrate to zero."""


class NotDensity(ValidationError):
    """Ratio field is not strictly positive or not of unit mass."""


class NotDiffeo(ValidationError):
    """A map has a non-positive Jacobian somewhere."""


class DegenerateAngle(ValidationError):
    """Great-circle interpolation is undefined for the given endpoints."""


class WrongDimension(ValidationError):
    """Operation requested on a grid of unsupported dimension."""


class NotSymmetric(ValidationError):
    pass


class Singular(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


class BlowUp(NumericalFailure):
    """Field norms became non-finite or exceeded the blow-up threshold."""


class NewtonDiverged(NumericalFailure):
    """Pointwise Newton inversion failed to converge."""


class ShootingDiverged(NumericalFailure):
    """Geodesic shooting failed to reach the target."""
