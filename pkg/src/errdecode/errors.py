"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4. Library code raises them directly.
"""


class ErrdecodeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ErrdecodeError):
    """Invalid configuration or parameter values."""


class DataError(ErrdecodeError):
    """Unreadable, malformed, or degenerate input data."""


class NumericalError(ErrdecodeError):
    """Numerical failure during computation (divergence, non-finite values)."""
