"""Discrepancy metrics between densities: IAE, root-ISE, Wasserstein-2,
Hellinger, and tail-exceedance difference.

Densities enter through DensityHandle, a uniform functional wrapper: a
vectorized pdf, a vectorized cdf, an optional quantile function, and a
support hint.  W2 is computed by Gauss-Legendre quadrature over the
quantile coupling; handles without a quantile are inverted by monotone
bisection on the cdf.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

DEFAULT_GRID_POINTS = 4001
DEFAULT_GRID_RANGE = (-10.0, 10.0)

_W2_NODES = 10_000
_gl_cache: dict = {}


def default_grid():
    return np.linspace(*DEFAULT_GRID_RANGE, DEFAULT_GRID_POINTS)


@dataclass
class DensityHandle:
    """Functional access to a density: pdf, cdf, optional quantile.

    pdf and cdf must accept numpy arrays.  `support` is a search hint
    (quantile bisection expands beyond it as needed), not a hard range.
    """

    pdf: callable
    cdf: callable
    quantile: callable | None = None
    support: tuple = (-50.0, 50.0)
    diagnostics: dict = field(default_factory=dict)

    @staticmethod
    def from_scipy(dist, support=None):
        lo, hi = dist.ppf(1e-12), dist.ppf(1 - 1e-12)
        return DensityHandle(
            pdf=dist.pdf,
            cdf=dist.cdf,
            quantile=dist.ppf,
            support=support or (float(lo), float(hi)),
        )

    @staticmethod
    def from_grid(grid, values, diagnostics=None):
        """Tabulated density; pdf/cdf interpolate, quantile inverts the cdf."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        cdf_vals = cumulative_trapezoid(values, grid, initial=0.0)
        total = cdf_vals[-1]

        def pdf(x):
            return np.interp(np.asarray(x, dtype=float), grid, values, left=0.0, right=0.0)

        def cdf(x):
            return np.interp(
                np.asarray(x, dtype=float), grid, cdf_vals, left=0.0, right=total
            )

        def quantile(u):
            return np.interp(
                np.clip(np.asarray(u, dtype=float), 0.0, total), cdf_vals, grid
            )

        return DensityHandle(
            pdf=pdf,
            cdf=cdf,
            quantile=quantile,
            support=(float(grid[0]), float(grid[-1])),
            diagnostics=dict(diagnostics or {}),
        )

    @staticmethod
    def from_mixture(params, support=None):
        """Closed-form handle for one Gamma-mixture parameter draw."""
        from .model import eval_latent_cdf, eval_latent_density, latent_support_radius

        r = latent_support_radius(params)
        return DensityHandle(
            pdf=lambda x: eval_latent_density(params, x),
            cdf=lambda x: eval_latent_cdf(params, x),
            quantile=None,
            support=support or (-r, r),
        )


def _pdf_pair(f1, f2, grid):
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    return f1.pdf(grid), f2.pdf(grid), grid


def iae(f1: DensityHandle, f2: DensityHandle, grid=None):
    """Integrated absolute error, trapezoid rule; lies in [0, 2]."""
    p1, p2, grid = _pdf_pair(f1, f2, grid)
    return float(np.trapezoid(np.abs(p1 - p2), grid))


def rise(f1: DensityHandle, f2: DensityHandle, grid=None):
    """Square root of the integrated squared error."""
    p1, p2, grid = _pdf_pair(f1, f2, grid)
    return float(np.sqrt(np.trapezoid((p1 - p2) ** 2, grid)))


def hellinger(f1: DensityHandle, f2: DensityHandle, grid=None):
    """Hellinger distance h in [0, 1] (h^2 = 1/2 int (sqrt p1 - sqrt p2)^2)."""
    p1, p2, grid = _pdf_pair(f1, f2, grid)
    h2 = 0.5 * np.trapezoid((np.sqrt(np.maximum(p1, 0)) - np.sqrt(np.maximum(p2, 0))) ** 2, grid)
    return float(np.sqrt(min(max(h2, 0.0), 1.0)))


def _gl_nodes(n):
    if n not in _gl_cache:
        x, w = np.polynomial.legendre.leggauss(n)
        _gl_cache[n] = (0.5 * (x + 1.0), 0.5 * w)  # mapped to (0, 1)
    return _gl_cache[n]


def quantile_by_bisection(handle: DensityHandle, u, iterations=80):
    """Monotone bisection of the cdf at probabilities u (array)."""
    u = np.asarray(u, dtype=float)
    lo, hi = handle.support
    span = max(hi - lo, 1.0)
    lo, hi = lo - 0.01 * span, hi + 0.01 * span
    for _ in range(200):
        grew = False
        if float(np.atleast_1d(handle.cdf(np.array([lo])))[0]) > u.min():
            lo -= span
            grew = True
        if float(np.atleast_1d(handle.cdf(np.array([hi])))[0]) < u.max():
            hi += span
            grew = True
        if not grew:
            break
        span *= 2.0
    a = np.full(u.shape, lo)
    b = np.full(u.shape, hi)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        below = handle.cdf(mid) < u
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


def _quantiles(handle, u):
    if handle.quantile is not None:
        return np.asarray(handle.quantile(u), dtype=float)
    return quantile_by_bisection(handle, u)


def wasserstein2(f1: DensityHandle, f2: DensityHandle, n_nodes=_W2_NODES):
    """W2 distance via the quantile coupling:
    W2^2 = int_0^1 (F1^{-1}(u) - F2^{-1}(u))^2 du."""
    u, w = _gl_nodes(n_nodes)
    q1 = _quantiles(f1, u)
    q2 = _quantiles(f2, u)
    return float(np.sqrt(np.sum(w * (q1 - q2) ** 2)))


def tail_probability(handle: DensityHandle, threshold):
    """P(|X| > threshold) from the cdf."""
    t = float(threshold)
    vals = np.atleast_1d(handle.cdf(np.array([t, -t])))
    return float(1.0 - vals[0] + vals[1])


def exceedance_diff(f_est: DensityHandle, f_true: DensityHandle, threshold):
    """|P_est(|X| > tau) - P_true(|X| > tau)|."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    return abs(tail_probability(f_est, threshold) - tail_probability(f_true, threshold))


METRIC_COLUMNS = ("iae", "rise", "w2", "hellinger", "exceedance")


def score(f_est, f_true, grid=None, threshold=None):
    """All metrics at once; exceedance is NaN when no threshold applies."""
    return {
        "iae": iae(f_est, f_true, grid),
        "rise": rise(f_est, f_true, grid),
        "w2": wasserstein2(f_est, f_true),
        "hellinger": hellinger(f_est, f_true, grid),
        "exceedance": (
            exceedance_diff(f_est, f_true, threshold) if threshold else float("nan")
        ),
    }
