"""Exception types raised across the package."""


class InstantonError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(InstantonError, ValueError):
    pass


class NotQuaternionic(InstantonError, ValueError):
    pass


class NotHermitian(InstantonError, ValueError):
    pass


class NotPositiveDefinite(InstantonError, ValueError):
    pass


class ChartError(InstantonError, ValueError):
    pass


class StepUnderflow(InstantonError, ValueError):
    pass


class AsymmetryError(InstantonError, ValueError):
    pass


class SingularGauge(InstantonError, ValueError):
    pass


class IntegrationError(InstantonError, RuntimeError):
    pass


class FlatnessError(InstantonError, RuntimeError):
    pass


class OutOfCell(InstantonError, ValueError):
    pass


class ConstraintViolation(InstantonError, ValueError):
    pass


class ParseError(InstantonError, ValueError):
    pass
