"""Monte Carlo checks of error rates and power at the Z-statistic level."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
from typing import Optional, Sequence

import numpy as np

from .closed_test import IntersectionBoundsTable, closed_test_batch
from .correlation import StatIndex, ccs_matrix
from .exceptions import InputError
from .mvn import validate_correlation

__all__ = [
    "sample_statistics",
    "SimConfig",
    "SimResult",
    "estimate_fwer",
    "estimate_power",
    "MIN_REPS",
]

MIN_REPS = 10_000
_CHUNK = 10_000


def _factor(corr):
    c = validate_correlation(corr)
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(c)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_statistics(corr, drift=None, seed=None, size=None):
    """Draw ``N(drift, corr)`` vectors.

    Returns shape ``(dim,)`` when ``size`` is None, else ``(size, dim)``.
    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    L = _factor(corr)
    dim = L.shape[0]
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = 1 if size is None else int(size)
    z = rng.standard_normal((n, dim)) @ L.T
    if drift is not None:
        d = np.asarray(drift, dtype=float).ravel()
        if d.size != dim:
            raise InputError(f"drift has {d.size} entries, correlation has dimension {dim}")
        z += d
    return z[0] if size is None else z


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``drift`` has shape (populations, analyses); zeros give the complete
    null. ``true_nulls`` lists populations whose null hypothesis holds; by
    default these are the populations with an all-zero drift row.
    """

    table: IntersectionBoundsTable
    drift: Optional[np.ndarray] = None
    reps: int = 100_000
    seed: int = 0
    true_nulls: Optional[Sequence[int]] = None
    threads: int = 1
    chunk: int = _CHUNK

    def __post_init__(self):
        I, K = self.table.n_populations, self.table.n_analyses
        d = np.zeros((I, K)) if self.drift is None else np.array(self.drift, dtype=float)
        if d.shape != (I, K):
            raise InputError(f"drift must have shape {(I, K)}, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InputError("drift must be finite")
        d.setflags(write=False)
        object.__setattr__(self, "drift", d)
        if int(self.reps) != self.reps or self.reps < MIN_REPS:
            raise InputError(f"replications must be an integer of at least {MIN_REPS}, got {self.reps}")
        if self.chunk < 1 or self.threads < 1:
            raise InputError("chunk and threads must be positive")
        nulls = self.true_nulls
        if nulls is None:
            nulls = tuple(i for i in range(I) if np.all(d[i] == 0))
        nulls = tuple(sorted(int(i) for i in nulls))
        if any(not 0 <= i < I for i in nulls):
            raise InputError(f"true nulls {nulls} outside 0..{I - 1}")
        object.__setattr__(self, "true_nulls", nulls)


@dataclass(frozen=True)
class SimResult:
    estimate: np.ndarray
    se: np.ndarray
    reps: int
    seed: int
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        est = np.atleast_1d(self.estimate).tolist()
        se = np.atleast_1d(self.se).tolist()
        out = {"reps": self.reps, "seed": self.seed, "estimate": est, "se": se}
        out.update(self.extra)
        return out


def _correlation(table):
    I, K = table.n_populations, table.n_analyses
    order = [StatIndex(i, k) for i in range(I) for k in range(K)]
    return ccs_matrix(table.information, order)


def _run(config: SimConfig):
    """Per-population rejection counts and the count of any true-null rejection."""
    table = config.table
    I, K = table.n_populations, table.n_analyses
    L = _factor(_correlation(table))
    mean = config.drift.ravel()
    n_chunks = math.ceil(config.reps / config.chunk)
    seqs = np.random.SeedSequence(config.seed).spawn(n_chunks)
    nulls = list(config.true_nulls)

    def chunk(c):
        size = min(config.chunk, config.reps - c * config.chunk)
        rng = np.random.default_rng(seqs[c])
        z = rng.standard_normal((size, I * K)) @ L.T + mean
        rej = closed_test_batch(table, z.reshape(size, I, K))
        fw = int(np.any(rej[:, nulls], axis=1).sum()) if nulls else 0
        return rej.sum(axis=0), fw

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as ex:
            parts = list(ex.map(chunk, range(n_chunks)))
    else:
        parts = [chunk(c) for c in range(n_chunks)]
    per_pop = np.sum([p[0] for p in parts], axis=0)
    any_null = sum(p[1] for p in parts)
    return per_pop, any_null


def _se(p, n):
    return np.sqrt(p * (1 - p) / n)


def estimate_fwer(config: SimConfig):
    """Fraction of replications rejecting at least one true null hypothesis."""
    _, fw = _run(config)
    p = fw / config.reps
    return SimResult(np.float64(p), np.float64(_se(p, config.reps)), config.reps, config.seed,
                     {"true_nulls": [i + 1 for i in config.true_nulls]})


def estimate_power(config: SimConfig):
    """Per-population rejection rates."""
    per_pop, _ = _run(config)
    p = per_pop / config.reps
    return SimResult(p, _se(p, config.reps), config.reps, config.seed)
