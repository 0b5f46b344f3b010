"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class SkelGraphError(Exception):
    """Base class for all package errors."""


class ConfigError(SkelGraphError):
    """Invalid parameter or configuration value."""


class DataError(SkelGraphError):
    """Malformed or inconsistent input data."""

    def __init__(self, message, path=None, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        if path is not None:
            message = f"{message} [{path}]"
        super().__init__(message)
        self.path = path
        self.line = line


class NumericalError(SkelGraphError):
    """Numerical failure: divergence, NaN propagation, infeasibility."""


class PowerIterationError(NumericalError):
    """Power iteration failed to converge; carries the last estimate."""

    def __init__(self, message, last_estimate):
        super().__init__(f"{message} (last estimate {last_estimate:.6g})")
        self.last_estimate = last_estimate
