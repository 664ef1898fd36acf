"""Exception and warning types shared across the package.

The CLI maps :class:`ValidationError` to exit code 2 and
:class:`NumericalError` to exit code 3.
"""


class ValidationError(ValueError):
    """Input data or configuration violates a precondition."""


class NumericalError(ArithmeticError):
    """A computation is undefined for the given (otherwise valid) data."""


class DegenerateShapeError(NumericalError):
    """A representation collapses to a single point after centering."""


class DegenerateDirectionError(NumericalError):
    """A comparison shape coincides with the reference, so no tangent exists."""


class LowVarianceWarning(UserWarning):
    """PCA reduction kept less variance than the advisory threshold."""


class DegenerateStepWarning(UserWarning):
    """A trajectory step was skipped because its tangent is undefined."""


class TieWarning(UserWarning):
    """A landmark's radial norm did not change within tolerance."""
