"""Correlation of stacked Z statistics across nested populations and analyses."""

from dataclasses import dataclass
import math
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .exceptions import InputError, NestingError
from .mvn import validate_correlation

__all__ = [
    "InformationTable",
    "StatIndex",
    "default_order",
    "ccs_matrix",
    "ccs_matrix_planned",
    "shared_control_matrix",
]


class StatIndex(NamedTuple):
    """Position of a statistic: population, analysis (both 0-based), arm."""

    population: int
    analysis: int
    arm: Optional[str] = None


def check_information(n):
    """Validate an information matrix (populations x analyses).

    Rows are populations ordered from smallest to the overall population,
    columns are analyses. Returns a read-only float copy.
    """
    arr = np.array(n, dtype=float, copy=True)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.size == 0:
        raise InputError(f"information must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise NestingError("information counts must be finite and positive")
    if np.any(np.diff(arr, axis=1) <= 0):
        bad = np.argwhere(np.diff(arr, axis=1) <= 0)[0]
        raise NestingError(
            f"information must increase strictly over analyses "
            f"(population {bad[0]}, analyses {bad[1]} -> {bad[1] + 1})"
        )
    if np.any(np.diff(arr, axis=0) < 0):
        bad = np.argwhere(np.diff(arr, axis=0) < 0)[0]
        raise NestingError(
            f"population {bad[0]} has more information than the enclosing "
            f"population {bad[0] + 1} at analysis {bad[1]}"
        )
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class InformationTable:
    """Cumulative information ``n[i, k]`` for nested populations ``i`` at analyses ``k``.

    Population ``0`` is the smallest subgroup; the last row is the overall
    population.
    """

    n: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "n", check_information(self.n))

    @classmethod
    def planned(cls, prevalence, timings, total=1.0):
        """Table with ``n[i, k] = prevalence[i] * timings[k] * total``."""
        p = np.atleast_1d(np.asarray(prevalence, dtype=float))
        t = _check_timings(timings)
        if np.any(p <= 0) or np.any(p > 1):
            raise InputError("prevalences must lie in (0, 1]")
        if p.size == 0 or p[-1] != 1.0:
            p = np.append(p, 1.0)
        return cls(np.outer(p, t) * total)

    @property
    def n_populations(self):
        return self.n.shape[0]

    @property
    def n_analyses(self):
        return self.n.shape[1]

    @property
    def fractions(self):
        """Information fractions ``n[i, k] / n[i, K]``."""
        return self.n / self.n[:, -1:]

    def __eq__(self, other):
        return isinstance(other, InformationTable) and np.array_equal(self.n, other.n)

    def __hash__(self):
        return hash(self.n.tobytes())

    def with_column(self, k, values):
        n = np.array(self.n)
        n[:, k] = values
        return InformationTable(n)


def _check_timings(timings):
    t = np.asarray(timings, dtype=float).ravel()
    if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0) or abs(t[-1] - 1.0) > 1e-12:
        raise InputError(f"timings must be strictly increasing in (0, 1] and end at 1, got {list(t)}")
    return t


def default_order(n_populations, n_analyses):
    """Analysis-major order ``(Z_11, Z_21, ..., Z_12, Z_22, ...)``."""
    return [StatIndex(i, k) for k in range(n_analyses) for i in range(n_populations)]


def ccs_matrix(info, order: Optional[Sequence] = None):
    """Correlation of the statistics listed in ``order``.

    Entry for ``(i, k), (i', k')`` is ``n[min(i, i'), min(k, k')] /
    sqrt(n[i, k] * n[i', k'])``.
    """
    table = info if isinstance(info, InformationTable) else InformationTable(info)
    n = table.n
    if order is None:
        order = default_order(*n.shape)
    idx = [StatIndex(*o) if not isinstance(o, StatIndex) else o for o in order]
    if len(set((s.population, s.analysis) for s in idx)) != len(idx):
        raise InputError("order contains duplicate statistics")
    for s in idx:
        if not (0 <= s.population < n.shape[0] and 0 <= s.analysis < n.shape[1]):
            raise InputError(f"statistic {s} outside the information table")
    pop = np.array([s.population for s in idx])
    ana = np.array([s.analysis for s in idx])
    num = n[np.minimum.outer(pop, pop), np.minimum.outer(ana, ana)]
    diag = n[pop, ana]
    corr = num / np.sqrt(np.outer(diag, diag))
    np.fill_diagonal(corr, 1.0)
    return validate_correlation(corr)


def ccs_matrix_planned(prevalence, timings):
    """CCS for populations with the given prevalence(s) and common timings.

    With a scalar prevalence ``p`` this is the subgroup/overall design; rows
    and columns are ordered ``(Z_11, Z_21, Z_12, Z_22, ...)``.
    """
    p = np.atleast_1d(np.asarray(prevalence, dtype=float))
    if np.any(p <= 0) or np.any(p > 1):
        raise InputError(f"prevalence must lie in (0, 1], got {prevalence!r}")
    t = _check_timings(timings)
    if p[-1] != 1.0:
        p = np.append(p, 1.0)
    if np.any(np.diff(p) < 0):
        raise NestingError("prevalences must be nondecreasing")
    n = np.outer(p, t)
    # equal prevalences are allowed here (correlation one); bypass the
    # strict table check only for that degenerate row equality
    pop = np.repeat(np.arange(len(p))[None, :], len(t), axis=0).ravel()
    ana = np.repeat(np.arange(len(t)), len(p))
    num = n[np.minimum.outer(pop, pop), np.minimum.outer(ana, ana)]
    diag = n[pop, ana]
    corr = num / np.sqrt(np.outer(diag, diag))
    np.fill_diagonal(corr, 1.0)
    return validate_correlation(corr)


def shared_control_matrix(arms, control, order=None):
    """Correlation for several treatment arms compared with one shared control.

    Parameters
    ----------
    arms : mapping of str to array_like
        Per-arm information (observations) ``n[i, k]`` for each population and
        analysis.
    control : array_like
        Control-arm information with the same shape.
    order : sequence of StatIndex, optional
        Defaults to arm-major, then population, then analysis.

    Notes
    -----
    For mean-difference statistics the covariance of arm ``A`` at ``(i, k)``
    and arm ``B`` at ``(i', k')`` is
    ``[1{A=B} nA_min / (nA nA') + n0_min / (n0 n0')]`` divided by the product
    of standard deviations ``sqrt(1/nA + 1/n0)``. With proportional
    allocation this is the nested-population correlation within an arm and
    the Dunnett factor ``sqrt(nA/(nA+n0) * nB/(nB+n0))`` times the
    correlation of the shared control across arms.
    """
    if not arms:
        raise InputError("at least one treatment arm is required")
    if control is None:
        raise InputError("a shared control arm is required")
    n0 = InformationTable(control).n
    tables = {name: InformationTable(a).n for name, a in arms.items()}
    for name, a in tables.items():
        if a.shape != n0.shape:
            raise InputError(f"arm {name!r} information shape {a.shape} differs from control {n0.shape}")
    I, K = n0.shape
    if order is None:
        order = [StatIndex(i, k, arm) for arm in tables for i in range(I) for k in range(K)]
    m = len(order)
    cov = np.empty((m, m))
    sd = np.empty(m)
    for r, s in enumerate(order):
        a = tables[s.arm]
        sd[r] = math.sqrt(1 / a[s.population, s.analysis] + 1 / n0[s.population, s.analysis])
    for r, s in enumerate(order):
        for c, u in enumerate(order):
            i, k = min(s.population, u.population), min(s.analysis, u.analysis)
            v = n0[i, k] / (n0[s.population, s.analysis] * n0[u.population, u.analysis])
            if s.arm == u.arm:
                a = tables[s.arm]
                v += a[i, k] / (a[s.population, s.analysis] * a[u.population, u.analysis])
            cov[r, c] = v
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return validate_correlation(corr)
