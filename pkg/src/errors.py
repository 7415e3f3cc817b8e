"""Exceptions raised by the project."""


class CarnotRectError(Exception):
    """Base class for every error raised on purpose by this package"""


class SpecError(CarnotRectError, ValueError):
    """Bad stratification data or points that belong to another group"""


class UnsupportedStepError(SpecError):
    """Multiplication requested for a group of step greater than three"""


class GeometryError(CarnotRectError, ValueError):
    """Invalid geometric input such as a non-positive scale"""


class NetError(CarnotRectError, ValueError):
    """Nets or cube systems that violate their defining properties"""


class LocalizationError(CarnotRectError, ValueError):
    """The localization set A carries no mass"""


class ConstructionError(CarnotRectError, RuntimeError):
    """A construction could not be completed on the given instance"""


class InvariantViolation(CarnotRectError, AssertionError):
    """A guaranteed inequality failed on a discrete instance"""
