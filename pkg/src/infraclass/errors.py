"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems -> 1, data problems -> 2,
numeric failures -> 3.
"""


class InfraclassError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(InfraclassError):
    """Tensor shapes do not conform to an operation's contract."""


class ConfigError(InfraclassError):
    """A configuration value violates its invariants."""


class DataError(InfraclassError):
    """A data file or dataset is malformed."""


class NumericError(InfraclassError):
    """A non-finite value appeared where finite math was required."""
