"""
Core utilities and exceptions for the GUR mixedness witness.

This module consolidates the exception hierarchy, the error helpers and the
stderr status logger shared by the algebra, state, uncertainty and detection
modules and by the command-line entry point.
"""

import sys
import traceback
from typing import Any, Callable, Optional

import numpy as np

from src import config


# =============================================================================
# CUSTOM EXCEPTIONS
# =============================================================================

class MixednessWitnessError(Exception):
    """Base exception for all mixedness-witness errors."""
    exit_code = 2


class ValidationError(MixednessWitnessError):
    """Raised when input validation fails (shape, index, range, unknown id)."""
    exit_code = 2


class ConfigurationError(MixednessWitnessError):
    """Raised when a scheme or run configuration is invalid."""
    exit_code = 2


class PositivityError(MixednessWitnessError):
    """Raised when a candidate state is not positive semidefinite.

    Attributes:
        min_eigenvalue: The offending smallest eigenvalue, when known.
        admissible: Human-readable admissible range, when known.
    """
    exit_code = 3

    def __init__(self, message: str, min_eigenvalue: Optional[float] = None,
                 admissible: Optional[str] = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.admissible = admissible


class NumericalError(MixednessWitnessError):
    """Raised on non-Hermitian products, complex expectations or non-unitary input."""
    exit_code = 4


class NoRootError(MixednessWitnessError):
    """Raised when a bisection bracket holds no sign change."""
    exit_code = 4


# =============================================================================
# ERROR HANDLING UTILITIES
# =============================================================================

def log(message: str) -> None:
    """Print a status line to stderr unless GUR_VERBOSE=0.

    Standard output is reserved for report payloads.
    """
    if config.VERBOSE:
        print(message, file=sys.stderr)


def handle_error(error: Exception, context: str = "", show_traceback: bool = False) -> None:
    """Centralized error reporting with context.

    Args:
        error: The exception that occurred.
        context: Additional context about where the error occurred.
        show_traceback: Append the full traceback (unexpected errors only).
    """
    if context:
        print(f"[!] ERROR in {context}: {error}", file=sys.stderr)
    else:
        print(f"[!] ERROR: {error}", file=sys.stderr)

    if isinstance(error, PositivityError) and error.min_eigenvalue is not None:
        print(f"    Minimum eigenvalue: {error.min_eigenvalue:.3e}", file=sys.stderr)
    if isinstance(error, PositivityError) and error.admissible:
        print(f"    Admissible range: {error.admissible}", file=sys.stderr)
    if show_traceback:
        print(f"    Full traceback: {traceback.format_exc()}", file=sys.stderr)


def safe_execute(func: Callable[..., Any], *args, error_type: type = MixednessWitnessError,
                 context: str = "", **kwargs) -> Any:
    """Execute a function, re-raising foreign exceptions as a project error.

    Args:
        func: Function to execute.
        *args: Function arguments.
        error_type: Type of exception to raise on failure.
        context: Context for error messages.
        **kwargs: Function keyword arguments.

    Returns:
        Result of function execution.

    Raises:
        error_type: Specified exception type on failure. Project errors pass
            through unchanged so their exit codes survive.
    """
    try:
        return func(*args, **kwargs)
    except MixednessWitnessError:
        raise
    except Exception as e:
        raise error_type(f"{context}: {e}") from e


# =============================================================================
# VALIDATION HELPERS
# =============================================================================

def as_real_vector(values: Any, length: int, name: str = "vector") -> np.ndarray:
    """Coerce input to a finite real vector of the given length."""
    try:
        vec = np.asarray(values, dtype=float).reshape(-1)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{name}: expected {length} real numbers ({e})") from e
    if vec.size != length:
        raise ValidationError(f"{name}: expected length {length}, got {vec.size}")
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"{name}: components must be finite")
    return vec


def require_unit(vec: np.ndarray, name: str = "direction", tol: float = config.NORM_TOL) -> None:
    """Reject direction vectors that are not unit-norm within tol."""
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"{name} must be a unit vector (|{name}| = {norm:.12g})")


def require_unit_interval(p: float, name: str = "p") -> float:
    """Reject mixing weights outside [0, 1]."""
    p = float(p)
    if not np.isfinite(p) or p < 0.0 or p > 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {p}")
    return p
