"""Exception hierarchy shared by every module of the package."""


class ZoSaddleError(Exception):
    """Base class for all package errors."""


class DomainViolation(ZoSaddleError, ValueError):
    pass


class UnboundedDomain(ZoSaddleError, ValueError):
    pass


class NumericalOverflow(ZoSaddleError, ArithmeticError):
    pass


class DimensionMismatch(ZoSaddleError, ValueError):
    pass


class NoGapOracle(ZoSaddleError):
    pass


class ConfigError(ZoSaddleError, ValueError):
    pass


class GrowthSpecMissing(ZoSaddleError, ValueError):
    pass


class DegenerateSeries(ZoSaddleError, ValueError):
    pass


class SeriesTooShort(ZoSaddleError, ValueError):
    pass
