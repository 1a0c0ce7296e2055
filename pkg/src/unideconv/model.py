"""Domain types and density evaluation for the hierarchical model.

The latent density is a scale mixture of symmetric uniforms whose
half-widths follow a K-component Gamma mixture; integrating the uniform
against the Gamma tail gives the closed form

    f(x)   = sum_k p_k * b_k / (2 (a_k - 1)) * Q(a_k - 1, b_k |x|)
    F(x)   = 1/2 + sign(x) * [ P(a_k, b_k |x|) / 2
             + b_k |x| / (2 (a_k - 1)) * Q(a_k - 1, b_k |x|) ]   (mixed over k)

with P and Q the regularized lower/upper incomplete gamma functions;
validity needs every shape a_k > 1, which the truncated prior enforces.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .exceptions import NumericError
from .kernels import ErrorKernel


def _as_float_array(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class Dataset:
    """Observed values w and their known noise SDs sigma, same length."""

    w: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        w = _as_float_array(self.w, "w")
        sigma = _as_float_array(self.sigma, "sigma")
        if len(w) != len(sigma) or len(w) < 1:
            raise ValueError("w and sigma must have equal, nonzero length")
        if np.any(sigma <= 0):
            raise ValueError("all noise scales must be positive")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "sigma", sigma)

    def __len__(self):
        return len(self.w)


@dataclass(frozen=True)
class Hyperparams:
    """Prior hyperparameters; defaults follow the method's standard choice."""

    lam: float = 2.0
    t: float = 2.5
    xi1: float = 1.0
    xi2: float = 4.0
    K: int = 8
    m: float = 20.0

    def __post_init__(self):
        if not self.t > 1.0:
            raise ValueError("truncation floor t must exceed 1")
        for name in ("lam", "xi1", "xi2", "m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.K) < 1:
            raise ValueError("K must be at least 1")
        object.__setattr__(self, "K", int(self.K))


@dataclass(frozen=True)
class MixtureParams:
    """K-component Gamma-mixture parameters (weights, shapes, rates)."""

    p: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        p = _as_float_array(self.p, "p")
        alpha = _as_float_array(self.alpha, "alpha")
        beta = _as_float_array(self.beta, "beta")
        if not (len(p) == len(alpha) == len(beta)) or len(p) < 1:
            raise ValueError("p, alpha, beta must share a common length >= 1")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("p must be a probability vector (sum 1 within 1e-12)")
        if np.any(alpha <= 1.0):
            raise ValueError("all shapes alpha must exceed 1")
        if np.any(beta <= 0):
            raise ValueError("all rates beta must be positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n_components(self):
        return len(self.p)

    def check_floor(self, t):
        if np.any(self.alpha <= t):
            raise ValueError(f"all shapes alpha must exceed the floor t = {t}")


@dataclass(frozen=True)
class LatentState:
    """Per-observation latents carried by the chain: x, theta, z (0-based)."""

    x: np.ndarray
    theta: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = _as_float_array(self.x, "x")
        theta = _as_float_array(self.theta, "theta")
        z = np.asarray(self.z)
        if not (len(x) == len(theta) == len(z)):
            raise ValueError("x, theta, z must share a common length")
        if np.any(theta <= 0):
            raise ValueError("all theta must be positive")
        if np.any(np.abs(x) > theta):
            raise ValueError("support constraint |x_i| <= theta_i violated")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "z", z.astype(np.int64))


@dataclass
class PosteriorDraws:
    """Thinned post-burn-in mixture snapshots, plus run metadata.

    `latent_x` optionally stores the latent-effect vector at each kept
    draw (rows align with `draws`) for downstream projection use.
    """

    draws: list
    burn_in: int
    thin: int
    seed: int
    latent_x: list | None = None
    accept_rate: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    def __len__(self):
        return len(self.draws)

    def to_csv(self):
        """Long-format CSV: one row per kept draw and component."""
        buf = io.StringIO()
        buf.write("iter,k,p,alpha,beta\n")
        for j, d in enumerate(self.draws):
            for k in range(d.n_components):
                buf.write(
                    f"{j},{k + 1},{float(d.p[k])!r},"
                    f"{float(d.alpha[k])!r},{float(d.beta[k])!r}\n"
                )
        return buf.getvalue()

    @staticmethod
    def from_csv(text, burn_in=0, thin=1, seed=0):
        rows = text.strip().splitlines()
        if not rows or rows[0].strip() != "iter,k,p,alpha,beta":
            raise ValueError("draws CSV must start with header 'iter,k,p,alpha,beta'")
        data = {}
        for line in rows[1:]:
            it, k, p, a, b = line.split(",")
            data.setdefault(int(it), []).append((int(k), float(p), float(a), float(b)))
        draws = []
        for it in sorted(data):
            comps = sorted(data[it])
            draws.append(
                MixtureParams(
                    p=[c[1] for c in comps],
                    alpha=[c[2] for c in comps],
                    beta=[c[3] for c in comps],
                )
            )
        return PosteriorDraws(draws=draws, burn_in=burn_in, thin=thin, seed=seed)


@dataclass(frozen=True)
class DensityEstimate:
    """A density tabulated on a strictly increasing grid."""

    grid: np.ndarray
    values: np.ndarray
    source_draws: PosteriorDraws | None = None

    def __post_init__(self):
        grid = _as_float_array(self.grid, "grid")
        values = _as_float_array(self.values, "values")
        if len(grid) != len(values):
            raise ValueError("grid and values must have equal length")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("x,density\n")
        for x, d in zip(self.grid, self.values):
            buf.write(f"{float(x)!r},{float(d)!r}\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text):
        rows = text.strip().splitlines()
        if not rows or rows[0].strip() != "x,density":
            raise ValueError("density CSV must start with header 'x,density'")
        pairs = [tuple(map(float, line.split(","))) for line in rows[1:]]
        grid = [p[0] for p in pairs]
        vals = [p[1] for p in pairs]
        return DensityEstimate(grid=grid, values=vals)


def _check_eval_points(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("evaluation points must be finite")
    return arr


def eval_latent_density(params: MixtureParams, x):
    """Latent density f at x (scalar or array); symmetric, unimodal at 0."""
    arr = _check_eval_points(x)
    a = params.alpha - 1.0
    scale = params.p * params.beta / (2.0 * a)
    tail = special.gammaincc(a, params.beta * np.abs(arr[..., None]))
    out = tail @ scale
    return out if out.shape else float(out)


def eval_latent_cdf(params: MixtureParams, x):
    """Latent CDF F at x; F(0) = 1/2 and F(-x) = 1 - F(x)."""
    arr = _check_eval_points(x)
    a = params.alpha - 1.0
    ax = np.abs(arr[..., None]) * params.beta
    inner = 0.5 * special.gammainc(params.alpha, ax)
    outer = np.abs(arr[..., None]) * params.beta / (2.0 * a) * special.gammaincc(a, ax)
    half = (inner + outer) @ params.p
    out = 0.5 + np.sign(arr) * half
    return out if out.shape else float(out)


def latent_support_radius(params: MixtureParams, eps=1e-14):
    """Radius beyond which the latent density mass is below eps."""
    a = params.alpha - 1.0
    return float(np.max(special.gammainccinv(a, eps) / params.beta))


def eval_observed_density(params: MixtureParams, kernel: ErrorKernel, sigma, w):
    """Observed-data density p(w) = int psi_sigma(w - x) f(x) dx by
    adaptive quadrature over the effective support of the integrand."""
    if not np.isscalar(sigma) and np.asarray(sigma).shape:
        raise ValueError("sigma must be a scalar here; vectorize over calls")
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    warr = _check_eval_points(w)
    scalar = warr.ndim == 0
    warr = np.atleast_1d(warr)

    halfwidth = sigma * (8.5 if kernel.family == "normal" else 16.0)
    radius = latent_support_radius(params)

    out = np.empty(warr.shape)
    for i, wi in enumerate(warr):
        lo = max(-radius, wi - halfwidth)
        hi = min(radius, wi + halfwidth)
        if lo >= hi:
            lo, hi = -radius, radius
        pts = [p for p in (0.0, wi) if lo < p < hi]
        val, abserr, info, *msg = integrate.quad(
            lambda x: eval_latent_density(params, x) * kernel.pdf(wi - x, sigma=sigma),
            lo,
            hi,
            points=pts or None,
            limit=200,
            full_output=True,
        )
        if msg:
            raise NumericError(
                f"observed-density quadrature failed at w={wi}: {msg[0]} "
                f"(abserr={abserr:.3g})"
            )
        out[i] = val
    return float(out[0]) if scalar else out


def posterior_mean_density(draws: PosteriorDraws, grid) -> DensityEstimate:
    """Pointwise average of the latent density over posterior draws."""
    if len(draws) == 0:
        raise ValueError("draws must be nonempty")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a strictly increasing 1-d sequence")
    acc = np.zeros_like(grid)
    # the density depends on |x| only: evaluate on unique magnitudes once
    mags, inverse = np.unique(np.abs(grid), return_inverse=True)
    for d in draws.draws:
        acc += eval_latent_density(d, mags)[inverse]
    return DensityEstimate(grid=grid, values=acc / len(draws), source_draws=draws)
