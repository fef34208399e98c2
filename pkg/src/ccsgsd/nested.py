"""Deterministic orthant probabilities for two nested populations.

For a subgroup ``a`` inside a population ``b`` the cumulative sums behave
like two independent Gaussian random walks: the subgroup sum ``S`` (variance
``n_a``) and the complement sum ``R`` (variance ``n_b - n_a``).  The pair
``(S_k, R_k)`` is Markov in the analysis index, so with at most three
constrained analyses the rectangle probability reduces to a two-dimensional
integral over the middle (or last) analysis of two conditional bivariate
normal probabilities.  The integral is done with composite Gauss-Legendre
rules in the independent coordinates ``S/sqrt(n_a)`` and ``R/sqrt(n_b - n_a)``.

This is the fast path used for two-population intersection hypotheses; the
randomized lattice rule in :mod:`ccsgsd.mvn` remains the general method.
"""

import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from .mvn import bvn_lower

__all__ = ["nested_pair_orthant"]

_L = 8.5
_GL = leggauss(10)
_MAX_PANELS = 800


def _panel_nodes(edges):
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    x = (mid[:, None] + half[:, None] * _GL[0][None, :]).ravel()
    w = (half[:, None] * _GL[1][None, :]).ravel()
    return x, w


def _edges(lo, hi, width, refine=None):
    n = max(int(math.ceil((hi - lo) / width)), 1)
    pts = [np.linspace(lo, hi, n + 1)]
    if refine is not None:
        centre, scale = refine
        if scale < width:
            window = np.linspace(centre - 8 * scale, centre + 8 * scale, 33)
            pts.append(window[(window > lo) & (window < hi)])
    edges = np.unique(np.concatenate(pts))
    keep = np.concatenate([[True], np.diff(edges) > 1e-12])
    return edges[keep]


def nested_pair_orthant(bounds, info, panel=0.5):
    """P(Z_ak < bounds[0, k] and Z_bk < bounds[1, k] for all k).

    Parameters
    ----------
    bounds : array_like, shape (2, K)
        Upper limits for the subgroup (row 0) and the enclosing population
        (row 1). Infinite entries drop the constraint.
    info : array_like, shape (2, K)
        Cumulative information of the subgroup and of the enclosing
        population at each analysis.
    panel : float
        Largest Gauss-Legendre panel width in standard-normal units.

    Returns
    -------
    float or None
        The probability, or ``None`` when the configuration is outside what
        this method handles (more than three constrained analyses, a
        degenerate complement, or a non-monotone complement).
    """
    b = np.asarray(bounds, dtype=float)
    n = np.asarray(info, dtype=float)
    if b.shape != n.shape or b.ndim != 2 or b.shape[0] != 2:
        raise ValueError("bounds and info must both have shape (2, K)")
    if np.any(b == -np.inf):
        return 0.0
    active = [k for k in range(b.shape[1]) if np.isfinite(b[:, k]).any()]
    if not active:
        return 1.0
    if len(active) > 3:
        return None
    b, n = b[:, active], n[:, active]
    na, nb = n
    r = nb - na
    if np.any(np.diff(na) <= 0) or np.any(r < -1e-12 * nb) or np.any(np.diff(r) < -1e-12 * nb[1:]):
        return None
    r = np.clip(r, 0.0, None)
    if len(active) == 1:
        return float(bvn_lower(b[0, 0], b[1, 0], math.sqrt(na[0] / nb[0])))

    m = 1
    if r[m] <= 1e-8 * nb[m]:
        return None
    sa, sr = math.sqrt(na[m]), math.sqrt(r[m])
    ca = b[0] * np.sqrt(na)
    cb = b[1] * np.sqrt(nb)

    # conditional pieces: (corr, x1 coefficient and x2 coefficient of the
    # standardized limit for each constraint, offsets)
    scales1, scales2 = [panel], [panel]
    pieces = []
    for j in range(len(active)):
        if j == m:
            continue
        if j > m:
            va, vc = na[j] - na[m], r[j] - r[m]
            sd_a, sd_b = math.sqrt(va), math.sqrt(va + vc)
            # S_j = S_m + A, S_j + R_j = S_m + R_m + A + C
            pieces.append((ca[j], sd_a, sa, 0.0, cb[j], sd_b, sa, sr, math.sqrt(va / (va + vc))))
        else:
            fa = na[j] / na[m]
            fr = r[j] / r[m]
            vs = na[j] * (na[m] - na[j]) / na[m]
            vr = r[j] * (r[m] - r[j]) / r[m]
            sd_a, sd_b = math.sqrt(vs), math.sqrt(vs + vr)
            pieces.append((ca[j], sd_a, fa * sa, 0.0, cb[j], sd_b, fa * sa, fr * sr,
                           math.sqrt(vs / (vs + vr))))
        scales1 += [sd_a / pieces[-1][2], sd_b / pieces[-1][6]]
        if pieces[-1][7] > 0:
            scales2.append(sd_b / pieces[-1][7])
    h1 = min(panel, 0.5 * min(scales1))
    h2 = min(panel, 0.5 * min(scales2))

    hi1 = min(b[0, m], _L)
    if hi1 <= -_L:
        return 0.0
    refine = None
    if np.isfinite(cb[m]):
        refine = (cb[m] / sa, sr / sa)
    e1 = _edges(-_L, hi1, h1, refine)
    if len(e1) > _MAX_PANELS:
        return None
    x1, w1 = _panel_nodes(e1)

    hi2 = np.minimum((cb[m] - sa * x1) / sr, _L) if np.isfinite(cb[m]) else np.full(x1.shape, _L)
    span = hi2 + _L
    n2 = max(int(math.ceil(span.max() / h2)), 1)
    if n2 > _MAX_PANELS:
        return None
    # equal-width panels per x1 node on [-L, hi2(x1)]
    frac_edges = np.linspace(0.0, 1.0, n2 + 1)
    u, wu = _panel_nodes(frac_edges)
    spanp = np.clip(span, 0.0, None)
    x2 = -_L + spanp[:, None] * u[None, :]
    w2 = spanp[:, None] * wu[None, :]

    X1 = np.broadcast_to(x1[:, None], x2.shape)
    dens = np.exp(-0.5 * (X1 * X1 + x2 * x2)) / (2 * math.pi)
    val = dens * w1[:, None] * w2
    for c1, s1, k1, _, c2, s2, k2a, k2r, rho in pieces:
        with np.errstate(invalid="ignore"):
            h = (c1 - k1 * X1) / s1
            k = (c2 - k2a * X1 - k2r * x2) / s2
        val = val * bvn_lower(h, k, rho)
    return float(min(max(val.sum(), 0.0), 1.0))
