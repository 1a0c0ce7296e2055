"""Gibbs sampler for the constrained deconvolution posterior.

One sweep refreshes, in fixed order: the latent values x (truncated
error kernel), the uniform half-widths theta (truncated Gamma), the
component labels z (log-space categorical), the mixture weights p
(Dirichlet), the component rates beta (Gamma), and the component shapes
alpha (Metropolis-Hastings with a truncated Gamma proposal, exact
Hastings correction for the truncation).
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import rng as _rng
from .kernels import ErrorKernel
from .model import Dataset, Hyperparams, LatentState, MixtureParams, PosteriorDraws
from .rng import RngStream

logger = logging.getLogger(__name__)

_SITE_BLOCKS = 4  # fixed partition used when parallel_sites is enabled


@dataclass(frozen=True)
class ChainConfig:
    """MCMC run settings."""

    n_iter: int = 5000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    n_chains: int = 1
    parallel_sites: bool = False

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("require 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.n_chains < 1:
            raise ValueError("n_chains must be positive")


@dataclass(frozen=True)
class SufficientStats:
    """Per-component counts r_k and theta sums s_k."""

    r: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=np.int64))
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))
        if len(self.r) != len(self.s):
            raise ValueError("r and s must have equal length")
        if np.any(self.s < 0):
            raise ValueError("s must be nonnegative")
        if np.any((self.r == 0) & (self.s != 0)):
            raise ValueError("s_k must be 0 for empty components")


def component_stats(state: LatentState, K: int) -> SufficientStats:
    r = np.bincount(state.z, minlength=K)
    s = np.bincount(state.z, weights=state.theta, minlength=K)
    s[r == 0] = 0.0
    return SufficientStats(r=r, s=s)


def sample_alpha_prior(hp: Hyperparams, rng, size=None):
    return _rng.sample_truncated_exponential(hp.lam, hp.t, np.inf, rng, size=size)


def sample_beta_prior(hp: Hyperparams, rng, size=None):
    return _rng._generator(rng).gamma(hp.xi1, 1.0 / hp.xi2, size=size)


def init_state(data: Dataset, hp: Hyperparams, rng):
    """Deterministic-given-rng starting point inside all constraints:
    x at the observations, theta just above |x|, labels uniform, mixture
    parameters from their priors, equal weights."""
    gen = _rng._generator(rng)
    n, K = len(data), hp.K
    x = data.w.copy()
    theta = np.abs(x) + 0.1 * float(np.median(data.sigma))
    z = gen.integers(0, K, size=n)
    alpha = sample_alpha_prior(hp, gen, size=K)
    beta = sample_beta_prior(hp, gen, size=K)
    state = LatentState(x=x, theta=theta, z=z)
    params = MixtureParams(p=np.full(K, 1.0 / K), alpha=alpha, beta=beta)
    return state, params


def update_x(state: LatentState, params, data: Dataset, kernel: ErrorKernel, rng):
    """Latent values: error kernel at (w_i, sigma_i) truncated to
    [-theta_i, theta_i]; degenerate truncation masses clamp to the
    boundary nearest the observation."""
    x = kernel.sample_truncated(
        data.w, data.sigma, -state.theta, state.theta, rng, degenerate="nan"
    )
    x = np.atleast_1d(np.asarray(x, dtype=float))
    bad = ~np.isfinite(x)
    if np.any(bad):
        logger.warning(
            "clamped %d latent value(s) with vanishing truncation mass", bad.sum()
        )
        x[bad] = np.sign(data.w[bad]) * state.theta[bad] * (1.0 - 1e-12)
    return x


def update_theta(state: LatentState, params: MixtureParams, rng):
    """Half-widths: Ga(alpha_z - 1, beta_z) truncated to [|x_i|, inf)."""
    shape = params.alpha[state.z] - 1.0
    rate = params.beta[state.z]
    return _rng.sample_truncated_gamma(shape, rate, np.abs(state.x), np.inf, rng)


def update_z(state: LatentState, params: MixtureParams, rng):
    """Labels from log-space weights log p_k + a_k log(b_k th) - b_k th - lnG(a_k)."""
    with np.errstate(divide="ignore"):
        logp = np.log(params.p)
    bt = state.theta[:, None] * params.beta[None, :]
    logw = (
        logp[None, :]
        + params.alpha[None, :] * np.log(bt)
        - bt
        - special.gammaln(params.alpha)[None, :]
    )
    return _rng.categorical_log_rows(logw, rng)


def update_p(stats: SufficientStats, hp: Hyperparams, rng):
    """Weights from Dirichlet(m/K + r_1, ..., m/K + r_K)."""
    return _rng.sample_dirichlet(hp.m / hp.K + stats.r, rng)


def update_beta(stats: SufficientStats, params: MixtureParams, hp: Hyperparams, rng):
    """Rates from Ga(xi1 + alpha_k r_k, xi2 + s_k)."""
    shape = hp.xi1 + params.alpha * stats.r
    rate = hp.xi2 + stats.s
    return _rng._generator(rng).gamma(shape, 1.0 / rate)


def _alpha_log_target(alpha, r, beta, log_theta_sum, hp):
    c = hp.lam - r * np.log(beta) - log_theta_sum
    return -r * special.gammaln(alpha) - alpha * c


def _proposal_logpdf(y, center, hp):
    # Ga(2, 2/center) truncated to (t, inf); Gamma(2) = 1
    rate = 2.0 / center
    log_norm = np.log(special.gammaincc(2.0, rate * hp.t))
    return 2.0 * np.log(rate) + np.log(y) - rate * y - log_norm


def update_alpha_mh(stats, params, state, hp, rng):
    """Metropolis-Hastings refresh of the shapes alpha_k.

    Proposal Ga(2, 2/alpha_k) truncated to (t, inf); the Hastings ratio
    includes the truncation normalizations of both directions.  Returns
    the new shapes together with per-component accept flags.
    """
    gen = _rng._generator(rng)
    log_theta = np.zeros(hp.K)
    occupied = stats.r > 0
    if np.any(occupied):
        sums = np.bincount(state.z, weights=np.log(state.theta), minlength=hp.K)
        log_theta[occupied] = sums[occupied]

    alpha = params.alpha
    prop = _rng.sample_truncated_gamma(2.0, 2.0 / alpha, hp.t, np.inf, gen)
    prop = np.atleast_1d(np.asarray(prop, dtype=float))

    log_ratio = (
        _alpha_log_target(prop, stats.r, params.beta, log_theta, hp)
        - _alpha_log_target(alpha, stats.r, params.beta, log_theta, hp)
        + _proposal_logpdf(alpha, prop, hp)
        - _proposal_logpdf(prop, alpha, hp)
    )
    accept = np.log(gen.random(hp.K)) < log_ratio
    return np.where(accept, prop, alpha), accept


def mh_log_ratio(alpha, prop, r, beta, log_theta_sum, hp):
    """Scalar log acceptance ratio for one component; exposed for audit."""
    return float(
        _alpha_log_target(prop, r, beta, log_theta_sum, hp)
        - _alpha_log_target(alpha, r, beta, log_theta_sum, hp)
        + _proposal_logpdf(alpha, prop, hp)
        - _proposal_logpdf(prop, alpha, hp)
    )


def _site_update(state, params, data, kernel, rng, parallel):
    """x, theta, z refreshed per observation; optionally in fixed blocks,
    each on its own substream (identical results serial or threaded).

    In parallel mode `rng` must be an RngStream not used by any other
    sweep; blocks draw from its children."""
    if not parallel:
        x = update_x(state, params, data, kernel, rng)
        state = LatentState(x=x, theta=state.theta, z=state.z)
        theta = update_theta(state, params, rng)
        state = LatentState(x=x, theta=theta, z=state.z)
        z = update_z(state, params, rng)
        return LatentState(x=x, theta=theta, z=z)

    n = len(data)
    bounds = np.linspace(0, n, _SITE_BLOCKS + 1).astype(int)
    slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    streams = [rng.substream(i) for i in range(len(slices))]
    x = np.empty(n)
    theta = np.empty(n)
    z = np.empty(n, dtype=np.int64)

    def work(block, sub):
        srng = sub.generator
        sub_data = Dataset(w=data.w[block], sigma=data.sigma[block])
        st = LatentState(x=state.x[block], theta=state.theta[block], z=state.z[block])
        xb = update_x(st, params, sub_data, kernel, srng)
        st = LatentState(x=xb, theta=st.theta, z=st.z)
        tb = update_theta(st, params, srng)
        st = LatentState(x=xb, theta=tb, z=st.z)
        zb = update_z(st, params, srng)
        return block, xb, tb, zb

    with ThreadPoolExecutor(max_workers=len(slices)) as pool:
        for block, xb, tb, zb in pool.map(work, slices, streams):
            x[block] = xb
            theta[block] = tb
            z[block] = zb
    return LatentState(x=x, theta=theta, z=z)


def sweep(state, params, data, kernel, hp, rng, site_rng=None, parallel_sites=False):
    """One full Gibbs sweep; returns (state, params, accept flags).

    `rng` drives the serial updates.  With parallel_sites, `site_rng`
    must be an RngStream unique to this sweep (e.g. a per-iteration
    substream); the x/theta/z blocks then draw from its children.
    """
    if parallel_sites and not isinstance(site_rng, RngStream):
        raise ValueError("parallel_sites requires a per-sweep RngStream site_rng")
    gen = rng.generator if isinstance(rng, RngStream) else rng

    state = _site_update(
        state, params, data, kernel, site_rng if parallel_sites else gen, parallel_sites
    )

    stats = component_stats(state, hp.K)
    p = update_p(stats, hp, gen)
    params = MixtureParams(p=p, alpha=params.alpha, beta=params.beta)
    beta = update_beta(stats, params, hp, gen)
    params = MixtureParams(p=p, alpha=params.alpha, beta=beta)
    alpha, accept = update_alpha_mh(stats, params, state, hp, gen)
    params = MixtureParams(p=p, alpha=alpha, beta=beta)
    return state, params, accept


def run_chain(data, kernel, hp, cfg: ChainConfig, keep_latent=False) -> PosteriorDraws:
    """Run one chain: cfg.n_iter sweeps, drop burn_in, keep every thin-th.

    Draw j of the output is the state after sweep burn_in + 1 + j*thin.
    """
    stream = RngStream(cfg.seed)
    gen = stream.generator
    state, params = init_state(data, hp, gen)

    draws = []
    latent = [] if keep_latent else None
    accepted = 0
    start = time.perf_counter()
    for it in range(cfg.n_iter):
        site_rng = stream.substream(it) if cfg.parallel_sites else None
        try:
            state, params, accept = sweep(
                state,
                params,
                data,
                kernel,
                hp,
                gen,
                site_rng=site_rng,
                parallel_sites=cfg.parallel_sites,
            )
        except Exception as exc:
            raise type(exc)(f"sweep {it} failed: {exc}") from exc
        accepted += int(accept.sum())
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            draws.append(params)
            if keep_latent:
                latent.append(state.x.copy())
    runtime = time.perf_counter() - start

    return PosteriorDraws(
        draws=draws,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        seed=cfg.seed,
        latent_x=latent,
        accept_rate=accepted / (cfg.n_iter * hp.K),
        meta={"n_iter": cfg.n_iter, "runtime_s": runtime, "n": len(data)},
    )


def run_chains(data, kernel, hp, cfg: ChainConfig, keep_latent=False):
    """cfg.n_chains independent chains on substreams seed, seed+1, ..."""
    out = []
    for c in range(cfg.n_chains):
        ccfg = ChainConfig(
            n_iter=cfg.n_iter,
            burn_in=cfg.burn_in,
            thin=cfg.thin,
            seed=cfg.seed + c,
            n_chains=1,
            parallel_sites=cfg.parallel_sites,
        )
        out.append(run_chain(data, kernel, hp, ccfg, keep_latent=keep_latent))
    return out
