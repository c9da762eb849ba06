"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError -> 2, NumericalError -> 3.
"""


class VolsynthError(Exception):
    """Base class for all package errors."""


class ConfigError(VolsynthError, ValueError):
    """Invalid configuration or precondition violation (usage-level)."""


class DataError(VolsynthError, ValueError):
    """Malformed, unbalanced, or inconsistent input data."""


class NumericalError(VolsynthError, RuntimeError):
    """Numerical failure: degeneracy, singularity, or non-convergence."""


class ConvergenceError(NumericalError):
    """Iterative estimation failed to converge; carries the iteration trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
