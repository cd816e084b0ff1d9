"""Exception taxonomy shared across the package.

Errors fall into four groups: bad caller input, numerical breakdown,
exhausted evaluation budgets, and configuration problems.  The CLI maps
them onto distinct process exit codes.
"""

from __future__ import annotations


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A linear-algebra or integration step failed beyond recovery."""


class BudgetExhaustedError(RuntimeError):
    """No evaluation fidelity has budget left."""


class ConfigError(Exception):
    """A run configuration could not be loaded.

    Attributes
    ----------
    code : str
        One of ``"missing-file"``, ``"malformed"``, ``"schema"``, ``"range"``.
    key_path : str
        Dotted path of the offending key, empty for file-level problems.
    """

    def __init__(self, code: str, key_path: str, message: str):
        super().__init__(message)
        self.code = code
        self.key_path = key_path


class OperatorSkip(Exception):
    """The operator declined the proposed real-world evaluation."""


class OperatorAbort(Exception):
    """The operator aborted the run; partial results must be kept."""
