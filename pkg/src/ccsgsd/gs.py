"""Single-hypothesis group sequential bounds and crossing probabilities."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .exceptions import InputError, NumericalError
from .mvn import DEFAULT_TOL, upper_rect_prob
from .spending import SpendingSpec, spend

__all__ = [
    "GsBounds",
    "Crossing",
    "temporal_correlation",
    "drift_from_fractions",
    "cumulative_crossing",
    "solve_bounds",
    "bounds_from_spending",
    "crossing_prob",
    "nominal_sum",
]

_BRACKET = (-2.0, 12.0)
_XTOL = 1e-10


def _timings(timings):
    t = np.asarray(timings, dtype=float).ravel()
    if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0) or abs(t[-1] - 1.0) > 1e-12:
        raise InputError(f"timings must be strictly increasing in (0, 1] and end at 1, got {list(t)}")
    return t


def temporal_correlation(timings):
    """Correlation ``sqrt(t_k / t_k')`` of one statistic over analyses."""
    t = np.asarray(timings, dtype=float)
    lo = np.minimum.outer(t, t)
    hi = np.maximum.outer(t, t)
    return np.sqrt(lo / hi)


def drift_from_fractions(final_drift, timings):
    """Per-analysis drift ``final_drift * sqrt(t_k)``."""
    return final_drift * np.sqrt(np.asarray(timings, dtype=float))


@dataclass(frozen=True)
class GsBounds:
    """Efficacy bounds ``b_k`` at information fractions ``t_k``."""

    timings: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        t = _timings(self.timings)
        b = np.asarray(self.bounds, dtype=float).ravel()
        if b.shape != t.shape:
            raise InputError("bounds and timings must have the same length")
        if np.any(np.isnan(b)):
            raise InputError("bounds must not be NaN")
        object.__setattr__(self, "timings", t)
        object.__setattr__(self, "bounds", b)

    @property
    def nominal(self):
        """Per-analysis nominal one-sided levels ``1 - Phi(b_k)``."""
        return ndtr(-self.bounds)

    def __len__(self):
        return len(self.bounds)


@dataclass(frozen=True)
class Crossing:
    incremental: np.ndarray
    cumulative: np.ndarray

    @property
    def total(self):
        return float(self.cumulative[-1])


def cumulative_crossing(bounds, corr, drift=None, tol=DEFAULT_TOL, seed=0):
    """Probability of crossing at least one of ``bounds`` (all analyses given)."""
    b = np.asarray(bounds, dtype=float)
    if drift is not None:
        b = b - np.asarray(drift, dtype=float)
    return 1.0 - upper_rect_prob(b, corr, tol=tol, seed=seed).value


def solve_bounds(timings, targets, prefix=(), tol=DEFAULT_TOL, seed=0, allow_infinite=True):
    """Solve bounds so the cumulative null crossing probability hits ``targets``.

    Parameters
    ----------
    timings : array_like
        Information fractions (or any increasing information scale) for all
        analyses.
    targets : array_like
        Cumulative crossing targets for analyses ``len(prefix) ..``.
    prefix : sequence of float
        Bounds already fixed for the first analyses.
    allow_infinite : bool
        When a target does not exceed what the earlier bounds already spend,
        return ``inf`` for that analysis instead of raising.
    """
    t = np.asarray(timings, dtype=float)
    corr = temporal_correlation(t)
    bounds = [float(x) for x in prefix]
    for k, target in zip(range(len(bounds), len(t)), targets):
        sub = corr[: k + 1, : k + 1]
        spent = cumulative_crossing(bounds + [np.inf], sub, tol=tol, seed=seed) if k else 0.0
        if target <= spent + 1e-15:
            if not allow_infinite:
                raise NumericalError(
                    f"spending increment at analysis {k + 1} is not positive "
                    f"(target {target:.3e}, already spent {spent:.3e})"
                )
            bounds.append(np.inf)
            continue

        def gap(b):
            return cumulative_crossing(bounds + [b], sub, tol=tol, seed=seed) - target

        lo, hi = _BRACKET
        while gap(lo) < 0:
            lo -= 4.0
            if lo < -40:
                raise NumericalError(f"cannot bracket bound at analysis {k + 1} (target {target})")
        if gap(hi) > 0:
            raise NumericalError(f"target {target:.3e} at analysis {k + 1} too small to bracket")
        bounds.append(brentq(gap, lo, hi, xtol=_XTOL, rtol=4 * np.finfo(float).eps))
    return np.array(bounds)


def bounds_from_spending(timings, spec: SpendingSpec, tol=DEFAULT_TOL, seed=0):
    """Group sequential efficacy bounds for a spending function.

    >>> b = bounds_from_spending([1.0], SpendingSpec("ldof", 0.025))
    >>> round(float(b.bounds[0]), 4)
    1.96
    """
    t = _timings(timings)
    targets = spend(t, spec)
    b = solve_bounds(t, np.atleast_1d(targets), tol=tol, seed=seed, allow_infinite=False)
    return GsBounds(t, b)


def crossing_prob(bounds: GsBounds, drift=None, tol=DEFAULT_TOL, seed=0):
    """Incremental and cumulative crossing probabilities under ``drift``.

    ``drift`` holds the expected Z value at each analysis (zero under the
    null hypothesis).
    """
    b = bounds.bounds
    d = np.zeros_like(b) if drift is None else np.broadcast_to(np.asarray(drift, dtype=float), b.shape)
    corr = temporal_correlation(bounds.timings)
    cum = np.empty(len(b))
    for k in range(len(b)):
        cum[k] = cumulative_crossing(b[: k + 1], corr[: k + 1, : k + 1], d[: k + 1], tol=tol, seed=seed)
    cum = np.maximum.accumulate(cum)
    inc = np.diff(np.concatenate([[0.0], cum]))
    return Crossing(inc, cum)


def nominal_sum(bounds):
    """Sum of the per-analysis nominal levels ``1 - Phi(b_k)``."""
    b = bounds.bounds if isinstance(bounds, GsBounds) else np.asarray(bounds, dtype=float)
    return float(np.sum(ndtr(-b)))
