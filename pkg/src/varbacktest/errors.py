"""Exception hierarchy shared by every module in the package."""


class BacktestError(Exception):
    """Base class for all errors raised by varbacktest."""


class DomainError(BacktestError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonfiniteError(DomainError):
    """The requested quantity is infinite for the given parameters."""


class LengthMismatch(DomainError):
    """Two aligned sequences have different lengths."""


class RangeError(DomainError):
    """A value is outside its admissible integer range."""


class InsufficientData(DomainError):
    """Not enough observations to estimate the requested quantity."""


class DegenerateError(BacktestError, ArithmeticError):
    """The statistic or estimator is undefined for this input."""


class ConvergenceError(BacktestError, RuntimeError):
    """An iterative solver failed to converge."""


class ConfigError(BacktestError, ValueError):
    """A configuration document is malformed or names an unknown option."""


class ParseError(ConfigError):
    """An input file cannot be read; the message names the line."""
