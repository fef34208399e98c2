"""Input validation helpers shared by the estimator and the command line."""

import numpy as np

from .exceptions import DataError, InputError, NestingError

__all__ = ["check_probability", "check_statistics", "check_prevalence", "check_square"]


def check_probability(value, name="value", low=0.0, high=1.0):
    """Return ``value`` as float if it lies strictly inside ``(low, high)``."""
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InputError(f"{name} must be a number, got {value!r}") from None
    if not low < v < high:
        raise InputError(f"{name} must lie in ({low}, {high}), got {v}")
    return v


def check_statistics(z, n_populations, n_analyses):
    """Coerce observed statistics to shape ``(reps, populations, analyses)``.

    A single ``(populations, analyses)`` matrix is treated as one
    replication. Unobserved entries may be ``-inf`` or NaN (treated as
    not crossing).
    """
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (n_populations, n_analyses):
        raise DataError(
            f"statistics must have shape (n, {n_populations}, {n_analyses}) "
            f"or ({n_populations}, {n_analyses}), got {np.shape(z)}"
        )
    if np.any(arr == np.inf):
        raise DataError("statistics must not be +inf")
    return np.where(np.isnan(arr), -np.inf, arr)


def check_prevalence(prevalence):
    """Strictly increasing prevalences in (0, 1] ending with the overall population."""
    p = np.atleast_1d(np.asarray(prevalence, dtype=float))
    if p.size == 0 or np.any(p <= 0) or np.any(p > 1):
        raise InputError(f"prevalences must lie in (0, 1], got {p.tolist()}")
    if p[-1] != 1.0:
        p = np.append(p, 1.0)
    if np.any(np.diff(p) <= 0):
        raise NestingError(f"prevalences must be strictly increasing, got {p.tolist()}")
    return p


def check_square(matrix, size, name="matrix"):
    m = np.asarray(matrix, dtype=float)
    if m.shape != (size, size):
        raise InputError(f"{name} must be {size}x{size}, got {m.shape}")
    return m
