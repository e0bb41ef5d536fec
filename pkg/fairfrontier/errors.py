"""
fairfrontier Errors

Exception hierarchy shared by the library and the CLI. Each leaf maps to a
process exit code in main.py.
"""

from typing import Optional


class FrontierError(Exception):
    """Base class for all fairfrontier failures."""

    exit_code = 1


class InputError(FrontierError, ValueError):
    """Bad data, bad parameters or a missing input."""

    exit_code = 2


class ConfigError(InputError):
    """Unknown key or invalid value in a run configuration."""


class NumericalError(FrontierError, ArithmeticError):
    """A numerical routine failed or produced non-finite output."""

    exit_code = 3


class ConvergenceError(NumericalError):
    """An iterative fit stopped at its iteration cap without converging."""

    def __init__(self, message: str, fold: Optional[int] = None, objective_delta: Optional[float] = None):
        super().__init__(message)
        self.fold = fold
        self.objective_delta = objective_delta


class EmptyResultError(FrontierError):
    """A set estimate or confidence set came back empty."""

    exit_code = 4
