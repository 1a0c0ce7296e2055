"""Sampler-correctness diagnostics.

The joint-distribution check compares two ways of sampling the full
model (parameters, latents, data): pure forward simulation from the
prior, and a successive-conditional chain alternating one Gibbs sweep
with a redraw of the data given the latents.  If every transition
targets the right conditionals, both produce the same joint law, so
tracked moments must agree up to Monte Carlo error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .kernels import ErrorKernel
from .model import Dataset, Hyperparams, LatentState, MixtureParams
from .rng import RngStream
from .sampler import sample_alpha_prior, sample_beta_prior, sweep

STAT_NAMES = (
    "alpha_mean",
    "alpha_sq_mean",
    "beta_mean",
    "beta_sq_mean",
    "p_first",
    "p_first_sq",
    "theta_mean",
    "theta_sq_mean",
)


def tracked_stats(state: LatentState, params: MixtureParams):
    """Eight scalar summaries of one joint draw."""
    return np.array(
        [
            params.alpha.mean(),
            (params.alpha**2).mean(),
            params.beta.mean(),
            (params.beta**2).mean(),
            params.p[0],
            params.p[0] ** 2,
            state.theta.mean(),
            (state.theta**2).mean(),
        ]
    )


def forward_joint(n, hp: Hyperparams, sigma, kernel: ErrorKernel, gen):
    """One exact draw of (state, params, w) from the prior-predictive joint."""
    alpha = sample_alpha_prior(hp, gen, size=hp.K)
    beta = sample_beta_prior(hp, gen, size=hp.K)
    p = gen.dirichlet(np.full(hp.K, hp.m / hp.K))
    z = _rng.categorical_log_rows(np.broadcast_to(np.log(p), (n, hp.K)), gen)
    theta = gen.gamma(alpha[z], 1.0 / beta[z])
    x = gen.uniform(-theta, theta)
    w = kernel.sample(x, sigma, gen)
    params = MixtureParams(p=p, alpha=alpha, beta=beta)
    state = LatentState(x=x, theta=theta, z=z)
    return state, params, w


def forward_stats(n, hp, sigma, kernel, rounds, gen):
    """Vectorized iid forward simulation; returns (rounds, 8) stats."""
    alpha = sample_alpha_prior(hp, gen, size=(rounds, hp.K))
    beta = sample_beta_prior(hp, gen, size=(rounds, hp.K))
    p = gen.dirichlet(np.full(hp.K, hp.m / hp.K), size=rounds)
    cum = np.cumsum(p, axis=1)
    u = gen.random((rounds, n))
    z = (cum[:, None, :] < u[..., None]).sum(axis=2)
    rows = np.arange(rounds)[:, None]
    theta = gen.gamma(alpha[rows, z], 1.0 / beta[rows, z])
    out = np.empty((rounds, len(STAT_NAMES)))
    out[:, 0] = alpha.mean(axis=1)
    out[:, 1] = (alpha**2).mean(axis=1)
    out[:, 2] = beta.mean(axis=1)
    out[:, 3] = (beta**2).mean(axis=1)
    out[:, 4] = p[:, 0]
    out[:, 5] = p[:, 0] ** 2
    out[:, 6] = theta.mean(axis=1)
    out[:, 7] = (theta**2).mean(axis=1)
    return out


def successive_stats(n, hp, sigma, kernel, rounds, gen):
    """Successive-conditional chain: redraw data given latents, then one
    Gibbs sweep; starts from an exact joint draw so it is stationary from
    round zero.  Returns (rounds, 8) stats."""
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    state, params, w = forward_joint(n, hp, sigma, kernel, gen)
    out = np.empty((rounds, len(STAT_NAMES)))
    for r in range(rounds):
        w = kernel.sample(state.x, sigma, gen)
        data = Dataset(w=w, sigma=sigma)
        state, params, _ = sweep(state, params, data, kernel, hp, gen)
        out[r] = tracked_stats(state, params)
    return out


def batch_means_se(samples, n_batches=100):
    """Standard error of the mean of an autocorrelated scalar series."""
    samples = np.asarray(samples, dtype=float)
    m = len(samples) // n_batches
    if m < 2:
        raise ValueError("series too short for the requested batch count")
    batches = samples[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return float(batches.std(ddof=1) / np.sqrt(n_batches))


@dataclass(frozen=True)
class GewekeResult:
    names: tuple
    forward_mean: np.ndarray
    gibbs_mean: np.ndarray
    z_scores: np.ndarray

    @property
    def max_abs_z(self):
        return float(np.max(np.abs(self.z_scores)))

    def summary(self):
        lines = [f"{'stat':<16}{'forward':>12}{'gibbs':>12}{'z':>8}"]
        for i, name in enumerate(self.names):
            lines.append(
                f"{name:<16}{self.forward_mean[i]:>12.5f}"
                f"{self.gibbs_mean[i]:>12.5f}{self.z_scores[i]:>8.2f}"
            )
        return "\n".join(lines)


def geweke_joint_test(
    n=20, hp=None, sigma=0.6, family="normal", rounds=100_000, seed=0
) -> GewekeResult:
    """Run both simulators and z-score the tracked-moment differences.

    The Gibbs-side standard errors use batch means to absorb the chain's
    autocorrelation; the forward side is iid.
    """
    hp = hp or Hyperparams(K=2)
    kernel = ErrorKernel(family)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    fwd = forward_stats(n, hp, sigma, kernel, rounds, RngStream(seed, 1).generator)
    gib = successive_stats(n, hp, sigma, kernel, rounds, RngStream(seed, 2).generator)

    fm, gm = fwd.mean(axis=0), gib.mean(axis=0)
    se_f = fwd.std(axis=0, ddof=1) / np.sqrt(rounds)
    se_g = np.array([batch_means_se(gib[:, j]) for j in range(gib.shape[1])])
    z = (gm - fm) / np.sqrt(se_f**2 + se_g**2)
    return GewekeResult(
        names=STAT_NAMES, forward_mean=fm, gibbs_mean=gm, z_scores=z
    )
