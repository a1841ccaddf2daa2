"""
Custom exception classes for the CESTRADE simulator.
Provides specific error types so the CLI can tell configuration problems
from numerical failures.
"""

import functools
from typing import Any, List, Optional, Tuple


class CESTradeError(Exception):
    """Base exception for all CESTRADE-related errors."""

    def __init__(
        self,
        message: str,
        details: Optional[str] = None,
        user_message: Optional[str] = None,
    ):
        super().__init__(message)
        self.message = message
        self.details = details
        self.user_message = user_message or message

    def get_user_friendly_message(self) -> str:
        """Get a user-friendly error message."""
        return self.user_message


class ValidationError(CESTradeError):
    """Raised when input validation fails."""

    def __init__(self, message: str, field: Optional[str] = None, value: Any = None):
        user_msg = f"Invalid input: {message}"

        super().__init__(message, user_message=user_msg)
        self.field = field
        self.value = value


class ConfigurationError(CESTradeError):
    """Raised when a scenario or run configuration cannot be used."""

    def __init__(
        self, message: str, setting: Optional[str] = None, value: Any = None
    ):
        user_msg = f"Configuration error: {message}"

        super().__init__(message, user_message=user_msg)
        self.setting = setting
        self.value = value


class ScenarioError(CESTradeError):
    """Raised when a scenario violates one of its invariants."""

    def __init__(self, message: str, invariant: Optional[str] = None):
        user_msg = "Invalid scenario"
        if invariant:
            user_msg += f" ({invariant})"
        user_msg += f": {message}"

        super().__init__(message, user_message=user_msg)
        self.invariant = invariant


class CalibrationError(CESTradeError):
    """Raised when a tariff cannot be calibrated to the reference prices."""

    def __init__(self, message: str, constraint: Optional[str] = None):
        user_msg = "Tariff calibration failed"
        if constraint:
            user_msg += f" on {constraint}"
        user_msg += f": {message}"

        super().__init__(message, user_message=user_msg)
        self.constraint = constraint


class SolverError(CESTradeError):
    """Raised when the quadratic program solver does not reach optimality."""

    def __init__(
        self,
        message: str,
        status: Optional[str] = None,
        best_iterate: Any = None,
    ):
        user_msg = "Numerical solver failure"
        if status:
            user_msg += f" (status: {status})"

        super().__init__(message, user_message=user_msg)
        self.status = status
        self.best_iterate = best_iterate


class InfeasibleProblemError(SolverError):
    """Raised when an optimisation problem has no feasible point."""

    def __init__(
        self,
        message: str,
        diagnosis: Optional[List[str]] = None,
        best_iterate: Any = None,
    ):
        super().__init__(message, status="infeasible", best_iterate=best_iterate)
        self.diagnosis = diagnosis or []
        if self.diagnosis:
            self.user_message = (
                f"Infeasible problem: {message}; binding: "
                + ", ".join(self.diagnosis)
            )
        else:
            self.user_message = f"Infeasible problem: {message}"


class EquilibriumError(CESTradeError):
    """Raised when an operator signal puts the Nash deviation outside its box."""

    def __init__(
        self,
        message: str,
        slot: Optional[int] = None,
        case: Optional[str] = None,
        epsilon: Optional[float] = None,
        box: Optional[tuple] = None,
    ):
        user_msg = "Operator signal admits no interior equilibrium"
        if slot is not None:
            user_msg += f" at slot {slot}"
        if case:
            user_msg += f" ({case} case)"

        super().__init__(message, user_message=user_msg)
        self.slot = slot
        self.case = case
        self.epsilon = epsilon
        self.box = box


class ConvergenceError(CESTradeError):
    """Raised when an iterative procedure stops before its criterion is met."""

    def __init__(
        self,
        message: str,
        iterations: Optional[int] = None,
        last_iterate: Any = None,
        trace: Optional[list] = None,
    ):
        user_msg = "Iteration did not converge"
        if iterations is not None:
            user_msg += f" after {iterations} iterations"

        super().__init__(message, user_message=user_msg)
        self.iterations = iterations
        self.last_iterate = last_iterate
        self.trace = trace or []


CONFIG_ERRORS = (ValidationError, ConfigurationError, ScenarioError, CalibrationError)
NUMERICAL_ERRORS = (SolverError, EquilibriumError, ConvergenceError)


def map_external_exception(exc: Exception, context: str = "") -> CESTradeError:
    """
    Map external exceptions to appropriate CESTRADE exceptions.

    Args:
        exc: The original exception
        context: Additional context about where the exception occurred

    Returns:
        Appropriate CESTradeError subclass
    """
    exc_type = type(exc).__name__
    exc_msg = str(exc)

    if isinstance(exc, CESTradeError):
        return exc

    # File/IO exceptions
    if exc_type in ["FileNotFoundError", "PermissionError", "IsADirectoryError"]:
        return ConfigurationError(f"{context}: {exc_msg}", setting="path")

    # YAML parser exceptions
    elif exc_type in [
        "YAMLError",
        "ScannerError",
        "ParserError",
        "ConstructorError",
        "ComposerError",
        "ReaderError",
    ]:
        return ConfigurationError(f"{context}: {exc_msg}", setting="syntax")

    # numpy linear algebra
    elif exc_type == "LinAlgError":
        return SolverError(f"{context}: {exc_msg}", status="linalg")

    elif exc_type in ["ValueError", "TypeError", "KeyError"]:
        return ValidationError(f"{context}: {exc_msg}")

    # Generic mapping
    else:
        return CESTradeError(f"{context}: {exc_msg}")


def handle_exception_with_context(context: str):
    """
    Decorator factory mapping foreign exceptions raised by the wrapped call.

    Usage:
        @handle_exception_with_context("reading configuration")
        def read_yaml(path):
            ...
    """

    def decorate(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except CESTradeError:
                raise
            except Exception as e:
                raise map_external_exception(e, context) from e

        return wrapper

    return decorate


class ErrorCollector:
    """Failures of single study cells, kept so the rest of the study can finish."""

    def __init__(self):
        self._failures: List[Tuple[str, CESTradeError]] = []

    def __len__(self) -> int:
        return len(self._failures)

    def add_error(self, error: Exception, cell: str = "") -> None:
        """Record a failed cell; foreign exceptions are mapped first."""
        self._failures.append((cell, map_external_exception(error, cell)))

    def has_errors(self) -> bool:
        return bool(self._failures)

    def failed_cells(self) -> List[str]:
        """Labels of the failed cells in the order they failed."""
        return [cell for cell, _ in self._failures]

    def numerical_count(self) -> int:
        """How many cells failed for numerical rather than configuration reasons."""
        return sum(isinstance(e, NUMERICAL_ERRORS) for _, e in self._failures)

    def get_user_messages(self) -> List[str]:
        """One line per failed cell, for the diagnostics file."""
        return [
            f"{cell}: {e.get_user_friendly_message()}" if cell else e.get_user_friendly_message()
            for cell, e in self._failures
        ]
