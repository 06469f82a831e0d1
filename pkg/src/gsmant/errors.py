"""Exception hierarchy; the CLI maps each family to an exit code."""

from __future__ import annotations


class GsmantError(Exception):
    exit_code = 1


class ValidationError(GsmantError, ValueError):
    """Bad input: malformed files, inconsistent configuration or geometry."""

    exit_code = 2


class MeshError(ValidationError):
    pass


class LayoutError(ValidationError):
    pass


class NumericalError(GsmantError, ArithmeticError):
    """A numerical step failed (singular system, divergence, no convergence)."""

    exit_code = 3


class SolverError(NumericalError):
    def __init__(self, message: str, condition: float | None = None):
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class DivergenceError(NumericalError):
    pass
