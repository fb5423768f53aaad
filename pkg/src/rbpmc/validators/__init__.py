"""
Argument and invariant validators shared across rbpmc modules.

Each helper raises ``ValueError`` (or ``DomainError`` for non-finite
numerical input) with a message naming the offending argument.
"""

from collections.abc import Sequence

import numpy as np

from rbpmc.errors import DomainError

SIMPLEX_TOL = 1e-12

__all__ = [
    "SIMPLEX_TOL",
    "check_count",
    "check_finite",
    "check_positive",
    "check_probability_vector",
    "check_same_length",
]


def check_count(name: str, value: int, minimum: int = 1) -> int:
    """
    Validate an integer count.

    Args:
        name: Argument name used in the error message
        value: Value to check
        minimum: Smallest accepted value

    Returns:
        The value as ``int``
    """
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive(name: str, value: float) -> float:
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")
    return float(value)


def check_finite(name: str, values) -> np.ndarray:
    """Return ``values`` as a float array, raising ``DomainError`` on NaN or infinity."""
    array = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} must contain only finite values")
    return array


def check_probability_vector(name: str, values, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """
    Validate a vector lying in the probability simplex.

    Args:
        name: Argument name used in the error message
        values: Candidate vector
        tol: Allowed deviation of the sum from one

    Returns:
        The vector as a 1-D float array
    """
    array = np.asarray(values, dtype=float)
    if array.ndim != 1 or array.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(array)) or np.any(array < 0):
        raise ValueError(f"{name} must be finite and non-negative")
    if abs(array.sum() - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 (got {array.sum()!r})")
    return array


def check_same_length(**arrays: Sequence) -> int:
    lengths = {name: len(values) for name, values in arrays.items()}
    if len(set(lengths.values())) > 1:
        raise ValueError(f"length mismatch: {lengths}")
    return next(iter(lengths.values()))
