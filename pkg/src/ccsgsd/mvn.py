"""Multivariate normal rectangle probabilities.

Low dimensions are handled deterministically (closed form in one dimension,
Drezner-Wesolowsky/Genz quadrature in two, a one-dimensional Gauss-Legendre
integral over bivariate probabilities in three).  Everything else goes through
Genz's separation-of-variables transform with Genz-Bretz variable ordering,
integrated by a randomly shifted rank-1 lattice rule.  Independent shifts give
the error estimate.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.fft import fft, ifft
from scipy.special import ndtr, ndtri

from .exceptions import CorrelationError, NumericalError

__all__ = [
    "ProbabilityEstimate",
    "normal_cdf",
    "normal_quantile",
    "validate_correlation",
    "bvn_lower",
    "rect_prob",
    "upper_rect_prob",
]

PSD_TOL = 1e-10
DEFAULT_TOL = 1e-6
MAX_DIM = 32

_COLLAPSE_TOL = 1e-12
_DEGENERATE = 1e-12
_N_SHIFTS = 10
# two-sided 99% quantile of Student t with _N_SHIFTS - 1 degrees of freedom
_T_99 = 3.2498355
_MIN_POINTS = 2 ** 11
_MAX_POINTS = 2 ** 20
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class ProbabilityEstimate:
    """Probability with an absolute error estimate.

    ``error_bound`` is a ~99% confidence half-width for randomized evaluations
    and a rounding-level constant for the deterministic low-dimension paths.
    """

    value: float
    error_bound: float
    evaluations: int

    def __float__(self):
        return self.value


def normal_cdf(z):
    """Standard normal distribution function."""
    out = ndtr(z)
    return float(out) if np.ndim(out) == 0 else out


def normal_quantile(p):
    """Inverse of :func:`normal_cdf` on the open interval (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0) | ~(arr < 1)):
        raise ValueError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    out = ndtri(arr)
    return float(out) if out.ndim == 0 else out


def validate_correlation(corr, psd_tol=PSD_TOL):
    """Check a correlation matrix and return a float copy.

    Eigenvalues in ``[-psd_tol, 0)`` are clipped to zero and the diagonal is
    rescaled to one. Anything more negative raises :class:`CorrelationError`.
    """
    c = np.array(corr, dtype=float, copy=True)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
        raise CorrelationError(f"correlation matrix must be square and non-empty, got shape {c.shape}")
    if c.shape[0] > MAX_DIM:
        raise CorrelationError(f"dimension {c.shape[0]} exceeds the supported maximum {MAX_DIM}")
    if not np.all(np.isfinite(c)):
        raise CorrelationError("correlation matrix has non-finite entries")
    if not np.allclose(c, c.T, atol=1e-12, rtol=0):
        raise CorrelationError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(c), 1.0, atol=1e-12, rtol=0):
        raise CorrelationError("correlation matrix must have a unit diagonal")
    if np.any(np.abs(c) > 1 + 1e-12):
        raise CorrelationError("correlations must lie in [-1, 1]")
    c = (c + c.T) / 2
    np.fill_diagonal(c, 1.0)
    eig, vec = np.linalg.eigh(c)
    if eig[0] < -psd_tol:
        raise CorrelationError(
            f"correlation matrix is not positive semi-definite (min eigenvalue {eig[0]:.3e})"
        )
    if eig[0] < 0:
        c = (vec * np.clip(eig, 0, None)) @ vec.T
        d = np.sqrt(np.diag(c))
        c = c / np.outer(d, d)
        c = (c + c.T) / 2
        np.fill_diagonal(c, 1.0)
    return np.clip(c, -1.0, 1.0)


# -- bivariate ---------------------------------------------------------------

_GL_HALF = {
    6: (
        np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970]),
        np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    ),
    12: (
        np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                  0.5873179542866171, 0.3678314989981802, 0.1252334085114692]),
        np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                  0.2031674267230659, 0.2334925365383547, 0.2491470458134029]),
    ),
    20: (
        np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                  0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                  0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                  0.07652652113349733]),
        np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                  0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                  0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                  0.1527533871307259]),
    ),
}


def _bvnu_finite(h, k, r):
    # Genz's BVNU: P(X > h, Y > k), h and k finite arrays, |r| <= 1
    ar = abs(r)
    nodes, weights = _GL_HALF[6 if ar < 0.3 else 12 if ar < 0.75 else 20]
    hk = h * k
    if ar < 0.925:
        hs = (h * h + k * k) / 2
        asr = math.asin(r)
        bvn = np.zeros_like(h)
        for x, w in zip(nodes, weights):
            for sgn in (-1.0, 1.0):
                sn = math.sin(asr * (1 + sgn * x) / 2)
                bvn += w * np.exp((sn * hk - hs) / (1 - sn * sn))
        return bvn * asr / (4 * math.pi) + ndtr(-h) * ndtr(-k)

    if r < 0:
        k = -k
        hk = -hk
    bvn = np.zeros_like(h)
    if ar < 1:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            as_ = (1 - r) * (1 + r)
            a = math.sqrt(as_)
            bs = (h - k) ** 2
            c = (4 - hk) / 8
            d = (12 - hk) / 16
            asr = -(bs / as_ + hk) / 2
            t1 = a * np.exp(asr) * (1 - c * (bs - as_) * (1 - d * bs / 5) / 3 + c * d * as_ * as_ / 5)
            bvn = np.where(asr > -100, t1, 0.0)
            b = np.sqrt(bs)
            sp = math.sqrt(2 * math.pi) * ndtr(-b / a)
            t2 = np.exp(-hk / 2) * sp * b * (1 - c * bs * (1 - d * bs / 5) / 3)
            bvn = bvn - np.where(hk > -100, t2, 0.0)
            a2 = a / 2
            for x, w in zip(nodes, weights):
                for sgn in (-1.0, 1.0):
                    xs = (a2 + a2 * sgn * x) ** 2
                    rs = math.sqrt(1 - xs)
                    asr = -(bs / xs + hk) / 2
                    spx = 1 + c * xs * (1 + d * xs)
                    ep = np.exp(-hk * (1 - rs) / (2 * (1 + rs))) / rs
                    bvn = bvn + np.where(asr > -100, a2 * w * np.exp(asr) * (ep - spx), 0.0)
            bvn = -bvn / (2 * math.pi)
    if r > 0:
        return bvn + ndtr(-np.maximum(h, k))
    lower = np.where(h < 0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
    return np.where(h >= k, -bvn, lower - bvn)


def _bvnu(h, k, r):
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    out = np.zeros(h.shape)
    fin = np.isfinite(h) & np.isfinite(k)
    if np.any(fin):
        out[fin] = _bvnu_finite(h[fin], k[fin], float(r))
    inf = ~fin
    if np.any(inf):
        hh, kk = h[inf], k[inf]
        val = np.where(hh == -np.inf, ndtr(-kk), ndtr(-hh))
        val = np.where((hh == np.inf) | (kk == np.inf), 0.0, val)
        out[inf] = val
    return np.clip(out, 0.0, 1.0)


def bvn_lower(h, k, r):
    """P(X < h, Y < k) for a standard bivariate normal with correlation ``r``.

    ``h`` and ``k`` broadcast; infinite values are allowed.
    """
    out = _bvnu(-np.asarray(h, dtype=float), -np.asarray(k, dtype=float), r)
    return float(out) if out.ndim == 0 else out


def _bvn_rect(lo, hi, r):
    # inclusion-exclusion over the four corners
    total = 0.0
    for a, sa in ((hi[0], 1), (lo[0], -1)):
        for b, sb in ((hi[1], 1), (lo[1], -1)):
            if a == -np.inf or b == -np.inf:
                continue
            total += sa * sb * bvn_lower(a, b, r)
    return min(max(total, 0.0), 1.0)


# -- trivariate --------------------------------------------------------------

_GL20 = leggauss(20)


def _tvn_lower(b, corr):
    # P(X1<b1, X2<b2, X3<b3) by integrating the first variable against
    # the conditional bivariate probability; returns None if too ill-conditioned
    best = None
    for m in range(3):
        others = [j for j in range(3) if j != m]
        worst = max(abs(corr[m, j]) for j in others)
        if best is None or worst < best[0]:
            best = (worst, m, others)
    _, m, (j1, j2) = best
    r1, r2 = corr[m, j1], corr[m, j2]
    s1, s2 = math.sqrt(max(1 - r1 * r1, 0.0)), math.sqrt(max(1 - r2 * r2, 0.0))
    if min(s1, s2) < 1e-3:
        return None
    rc = (corr[j1, j2] - r1 * r2) / (s1 * s2)
    rc = min(max(rc, -1.0), 1.0)
    lo, hi = -10.0, min(b[m], 10.0)
    if hi <= lo:
        return 0.0
    width = min(0.5, min(s1, s2) / 2)
    panels = min(int(math.ceil((hi - lo) / width)), 4000)
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    x = (mid[:, None] + half[:, None] * _GL20[0][None, :]).ravel()
    w = (half[:, None] * _GL20[1][None, :]).ravel()
    with np.errstate(invalid="ignore"):
        h = (b[j1] - r1 * x) / s1
        k = (b[j2] - r2 * x) / s2
    dens = np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    return float(np.clip(np.sum(w * dens * bvn_lower(h, k, rc)), 0.0, 1.0))


# -- lattice rule ------------------------------------------------------------

def _is_prime(n):
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _prev_prime(n):
    n = int(n)
    while not _is_prime(n):
        n -= 1
    return n


def _prime_factors(n):
    out, f = set(), 2
    while f * f <= n:
        while n % f == 0:
            out.add(f)
            n //= f
        f += 1
    if n > 1:
        out.add(n)
    return sorted(out)


def _primitive_root(p):
    factors = _prime_factors(p - 1)
    g = 2
    while any(pow(g, (p - 1) // f, p) == 1 for f in factors):
        g += 1
    return g


def _powers_mod(g, count, n):
    out = np.empty(count, dtype=np.int64)
    out[0] = 1
    filled = 1
    while filled < count:
        step = min(filled, count - filled)
        mult = pow(int(g), filled, n)
        out[filled:filled + step] = out[:step] * mult % n
        filled += step
    return out


def _omega(x):
    return x * x - x + 1.0 / 6.0


@lru_cache(maxsize=64)
def _lattice_generator(dim, n):
    """Generating vector of a rank-1 lattice with prime ``n`` points.

    Fast component-by-component construction (Nuyens-Cools) for product
    weights ``0.8**j`` and the order-2 Korobov kernel.
    """
    z = np.ones(dim, dtype=np.int64)
    if dim == 1:
        return z
    m = n - 1
    perm = _powers_mod(_primitive_root(n), m, n)
    fc = fft(_omega(perm / n))
    gamma = 0.8 ** np.arange(dim)
    k = np.arange(n, dtype=np.int64)
    prod = 1 + gamma[0] * _omega((k * z[0] % n) / n)
    back = perm[(-np.arange(m)) % m]
    for s in range(1, dim):
        err = ifft(fc * fft(prod[back])).real
        z[s] = perm[int(np.argmin(err))]
        prod *= 1 + gamma[s] * _omega((k * z[s] % n) / n)
    return z


# -- Genz transform ----------------------------------------------------------

def _genz_order(corr, lo, hi):
    # pivoted Cholesky choosing at each step the variable with the smallest
    # conditional interval probability (Genz & Bretz)
    n = len(lo)
    cov = corr.copy()
    lo, hi = lo.copy(), hi.copy()
    L = np.zeros((n, n))
    y = np.zeros(n)
    for i in range(n):
        best_p, best_j = np.inf, i
        for j in range(i, n):
            var = cov[j, j] - L[j, :i] @ L[j, :i]
            if var <= _DEGENERATE:
                p = 2.0
            else:
                s = L[j, :i] @ y[:i]
                sd = math.sqrt(var)
                p = ndtr((hi[j] - s) / sd) - ndtr((lo[j] - s) / sd)
            if p < best_p:
                best_p, best_j = p, j
        if best_j != i:
            for arr in (lo, hi):
                arr[[i, best_j]] = arr[[best_j, i]]
            cov[[i, best_j], :] = cov[[best_j, i], :]
            cov[:, [i, best_j]] = cov[:, [best_j, i]]
            L[[i, best_j], :] = L[[best_j, i], :]
        var = cov[i, i] - L[i, :i] @ L[i, :i]
        if var <= _DEGENERATE:
            L[i, i] = 0.0
            y[i] = L[i, :i] @ y[:i]
            continue
        L[i, i] = math.sqrt(var)
        for j in range(i + 1, n):
            L[j, i] = (cov[j, i] - L[j, :i] @ L[i, :i]) / L[i, i]
        s = L[i, :i] @ y[:i]
        a, b = (lo[i] - s) / L[i, i], (hi[i] - s) / L[i, i]
        p = ndtr(b) - ndtr(a)
        if p > 1e-300:
            phi_a = 0.0 if np.isinf(a) else math.exp(-a * a / 2)
            phi_b = 0.0 if np.isinf(b) else math.exp(-b * b / 2)
            y[i] = (phi_a - phi_b) / (math.sqrt(2 * math.pi) * p)
        else:
            y[i] = a if np.isfinite(a) else b
    return L, lo, hi


def _genz_shift(L, lo, hi, points):
    """Mean of the Genz integrand over one shifted, tent-transformed point set.

    ``points`` has shape ``(dim - 1, N)``.
    """
    n = L.shape[0]
    npts = points.shape[1]
    c = np.full(npts, ndtr(lo[0] / L[0, 0]))
    dc = np.full(npts, ndtr(hi[0] / L[0, 0])) - c
    pv = dc.copy()
    y = np.zeros((n - 1, npts))
    for i in range(1, n):
        u = np.clip(c + points[i - 1] * dc, _TINY, 1 - 1e-16)
        y[i - 1] = ndtri(u)
        s = L[i, :i] @ y[:i]
        if L[i, i] > 0:
            c = ndtr((lo[i] - s) / L[i, i])
            dc = ndtr((hi[i] - s) / L[i, i]) - c
        else:
            c = np.zeros(npts)
            dc = ((s > lo[i]) & (s < hi[i])).astype(float)
        pv *= dc
    return float(pv.mean())


def _qmc_rect(corr, lo, hi, tol, seed, max_points):
    L, lo, hi = _genz_order(corr, lo, hi)
    dim = len(lo)
    if L[0, 0] == 0:
        raise NumericalError("leading variable has zero variance after ordering")
    rng = np.random.default_rng(seed)
    target = _MIN_POINTS
    evaluations = 0
    while True:
        npts = _prev_prime(target)
        gen = _lattice_generator(dim - 1, npts)
        base = (np.arange(1, npts + 1, dtype=np.int64)[None, :] * gen[:, None] % npts) / npts
        estimates = np.empty(_N_SHIFTS)
        for r in range(_N_SHIFTS):
            pts = base + rng.random(dim - 1)[:, None]
            pts -= np.floor(pts)
            estimates[r] = _genz_shift(L, lo, hi, np.abs(2 * pts - 1))
        evaluations += npts * _N_SHIFTS
        value = estimates.mean()
        err = _T_99 * estimates.std(ddof=1) / math.sqrt(_N_SHIFTS)
        if err <= tol or target >= max_points:
            break
        target *= 2
    return ProbabilityEstimate(float(min(max(value, 0.0), 1.0)), float(err), evaluations)


# -- public entry points -----------------------------------------------------

def _reduce(lo, hi, corr):
    # drop unconstrained coordinates and merge perfectly (anti)correlated ones
    keep = [i for i in range(len(lo)) if not (lo[i] == -np.inf and hi[i] == np.inf)]
    lo, hi = lo[keep].copy(), hi[keep].copy()
    corr = corr[np.ix_(keep, keep)]
    alive = list(range(len(lo)))
    i = 0
    while i < len(alive):
        a = alive[i]
        j = i + 1
        while j < len(alive):
            b = alive[j]
            rho = corr[a, b]
            if rho >= 1 - _COLLAPSE_TOL:
                lo[a], hi[a] = max(lo[a], lo[b]), min(hi[a], hi[b])
                alive.pop(j)
            elif rho <= -1 + _COLLAPSE_TOL:
                lo[a], hi[a] = max(lo[a], -hi[b]), min(hi[a], -lo[b])
                alive.pop(j)
            else:
                j += 1
        i += 1
    return lo[alive], hi[alive], corr[np.ix_(alive, alive)]


def rect_prob(lower, upper, corr, tol=DEFAULT_TOL, seed=0, method="auto",
              max_points=_MAX_POINTS, validate=True):
    """P(lower < Z < upper) for Z ~ N(0, corr).

    Parameters
    ----------
    lower, upper : array_like
        Integration limits; ``-inf``/``inf`` allowed.
    corr : array_like
        Correlation matrix.
    tol : float
        Absolute error target for the randomized lattice rule.
    seed : int
        Seed for the lattice shifts. Results are deterministic given the seed.
    method : {"auto", "qmc"}
        ``"qmc"`` skips the deterministic two- and three-dimensional paths.
    max_points : int
        Cap on lattice points per shift.

    Returns
    -------
    ProbabilityEstimate
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method not in ("auto", "qmc"):
        raise ValueError(f"unknown method {method!r}")
    lo = np.array(lower, dtype=float).ravel()
    hi = np.array(upper, dtype=float).ravel()
    c = validate_correlation(corr) if validate else np.asarray(corr, dtype=float)
    if lo.shape != hi.shape or lo.size != c.shape[0]:
        raise ValueError("limits and correlation matrix have inconsistent dimensions")
    if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
        raise ValueError("limits must not be NaN")
    if np.any(hi <= lo):
        return ProbabilityEstimate(0.0, 0.0, 0)
    lo, hi, c = _reduce(lo, hi, c)
    if np.any(hi <= lo):
        return ProbabilityEstimate(0.0, 0.0, 0)
    dim = lo.size
    if dim == 0:
        return ProbabilityEstimate(1.0, 0.0, 0)
    if dim == 1:
        return ProbabilityEstimate(float(ndtr(hi[0]) - ndtr(lo[0])), 1e-15, 1)
    if method == "auto":
        if dim == 2:
            return ProbabilityEstimate(_bvn_rect(lo, hi, c[0, 1]), 1e-14, 1)
        if dim == 3 and np.all(lo == -np.inf):
            val = _tvn_lower(hi, c)
            if val is not None:
                return ProbabilityEstimate(val, 1e-12, 1)
    return _qmc_rect(c, lo, hi, tol, seed, max_points)


def upper_rect_prob(bounds, corr, tol=DEFAULT_TOL, seed=0, method="auto",
                    max_points=_MAX_POINTS):
    """P(Z_m < bounds_m for all m) for Z ~ N(0, corr).

    >>> round(upper_rect_prob([0.0, 0.0], [[1, 0], [0, 1]]).value, 12)
    0.25
    """
    b = np.array(bounds, dtype=float).ravel()
    return rect_prob(np.full(b.shape, -np.inf), b, corr, tol=tol, seed=seed,
                     method=method, max_points=max_points)
