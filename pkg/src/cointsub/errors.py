"""Exception types shared across the toolkit."""


class CointsubError(Exception):
    """Base class for all toolkit errors."""


class DomainError(CointsubError, ValueError):
    """A parameter lies outside its admissible domain."""


class LengthError(CointsubError, ValueError):
    """An input sequence is too short for the requested operation."""


class UsageError(CointsubError, ValueError):
    """Inconsistent or invalid call arguments (grids, ranges, ids)."""


class RankError(CointsubError, ArithmeticError):
    """A least-squares design matrix is rank deficient."""


class OptimizationError(CointsubError, ArithmeticError):
    """A numerical minimisation failed to bracket or converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateStatistic(CointsubError, ArithmeticError):
    """A statistic is undefined because its normaliser vanished."""


class DistributionError(CointsubError, ArithmeticError):
    """Too many subsample statistics were degenerate."""


class DebiasError(CointsubError, ArithmeticError):
    """The log-log bias extrapolation is undefined."""


class CellError(CointsubError, RuntimeError):
    """Too many Monte Carlo replications failed in a cell."""


class ConfigError(CointsubError, ValueError):
    """A configuration file or flag failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DataError(CointsubError, ValueError):
    """An input data file is malformed."""
