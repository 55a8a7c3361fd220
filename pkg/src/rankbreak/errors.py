"""Exception hierarchy.

The CLI maps each family onto an exit code: configuration problems exit
with 2, bad input data with 3 and numerical failures with 4.
"""


class RankBreakError(Exception):
    """Base class for all package errors."""


class ConfigError(RankBreakError, ValueError):
    """Invalid parameters or options."""


class DataError(RankBreakError, ValueError):
    """Malformed or inconsistent observations."""


class InconsistentPosetError(DataError):
    """The poset's relations contain a cycle."""


class EmptyLikelihoodError(DataError):
    """No rank-breaking edge survives the order-M filter."""


class NumericalError(RankBreakError, ArithmeticError):
    """A computation produced a non-finite or undefined result."""


class ComplexityCapError(NumericalError):
    """An edge's top-set is too large to enumerate."""


class UndefinedBoundError(NumericalError):
    """A theoretical bound is undefined for the given topology."""
