"""Exception hierarchy for the nsgp package."""


class NsgpError(Exception):
    """Base class for all errors raised by nsgp."""


class NumericError(NsgpError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)."""


class NotPositiveDefinite(NumericError):
    pass


class NonSymmetric(NsgpError, ValueError):
    pass


class DimensionMismatch(NsgpError, ValueError):
    pass


class NonPositiveParam(NsgpError, ValueError):
    pass


class LayoutMismatch(NsgpError, ValueError):
    pass


class NonFinite(NumericError):
    pass


class NegativeVariance(NumericError):
    pass


class NonPositiveVariance(NsgpError, ValueError):
    pass


class Diverged(NumericError):
    pass


class MTooLarge(NsgpError, ValueError):
    pass


class ParseError(NsgpError, ValueError):
    pass


class EmptyDataset(NsgpError, ValueError):
    pass


class DegenerateColumn(NsgpError, ValueError):
    pass


class UnknownDataset(NsgpError, KeyError):
    pass


class EmptyPool(NsgpError, ValueError):
    pass


class ConfigError(NsgpError, ValueError):
    pass
