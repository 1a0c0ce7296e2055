"""Discovery projection from posterior effect-size draws.

For one hypothetical study of n_new individuals, a marginal effect beta
with residual SD sigma is declared significant at level alpha when its
z statistic clears z_{alpha/2}; the detection probability is

    pow(beta) = 1 - Phi(z_{alpha/2} - sqrt(n) beta / sigma)
                  + Phi(-z_{alpha/2} - sqrt(n) beta / sigma).

Summing over effects and averaging over posterior draws gives the
expected number of discoveries with an empirical credible interval.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class PosteriorEffectMatrix:
    """Posterior effect samples, one row per effect, one column per draw,
    with the per-effect residual SD (estimate variance is sigma^2 / n)."""

    beta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if beta.ndim != 2 or beta.shape[1] < 1:
            raise ValueError("beta must be a (n_effects, n_draws) matrix")
        if np.any(~np.isfinite(beta)):
            raise ValueError("beta must be finite (no NaN)")
        if sigma.shape != (beta.shape[0],):
            raise ValueError("sigma must have one entry per effect row")
        if np.any(sigma <= 0) or np.any(~np.isfinite(sigma)):
            raise ValueError("sigma must be positive and finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_effects(self):
        return self.beta.shape[0]

    @property
    def n_draws(self):
        return self.beta.shape[1]


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    return alpha


def power(beta, sigma, n_new, alpha):
    """Detection probability of effect `beta` at sample size `n_new`.

    Exceeds `alpha` for nonzero beta and is monotone in |beta| and n_new.
    Vectorized over beta/sigma.
    """
    alpha = _check_alpha(alpha)
    n_new = int(n_new)
    if n_new < 1:
        raise ValueError("n_new must be a positive integer")
    beta = np.asarray(beta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~np.isfinite(beta)) or np.any(sigma <= 0):
        raise ValueError("beta must be finite and sigma positive")
    z = special.ndtri(1.0 - alpha / 2.0)
    shift = np.sqrt(n_new) * beta / sigma
    out = special.ndtr(shift - z) + special.ndtr(-z - shift)
    return out if out.shape else float(out)


def expected_discoveries(pem: PosteriorEffectMatrix, n_new, alpha):
    """Projected number of significant effects at sample size n_new.

    Returns (point, (ci_lo, ci_hi), per_draw): per draw j the sum over
    effects of power(beta_ij); point is the mean over draws and the CI
    the empirical 2.5%/97.5% quantiles (linear interpolation).
    """
    alpha = _check_alpha(alpha)
    if pem.n_draws < 40:
        warnings.warn(
            f"only {pem.n_draws} posterior draws; the 95% interval is unstable",
            stacklevel=2,
        )
    per_draw = power(pem.beta, pem.sigma[:, None], n_new, alpha).sum(axis=0)
    point = float(per_draw.mean())
    lo, hi = np.quantile(per_draw, [0.025, 0.975])
    return point, (float(lo), float(hi)), per_draw
