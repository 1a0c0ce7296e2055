"""Simulation benchmark loop: simulate, fit all estimators, score.

One replicate simulates a scenario, fits the constrained Bayes
deconvolution chain plus the kernel baselines, and scores every
estimate against the exact truth handle.  Replicates fan out over a
process pool; everything is deterministic given (seed, rep).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import metrics as M
from .baselines import KernelSpec, decon_kde, naive_kde
from .kernels import ErrorKernel
from .model import Hyperparams, posterior_mean_density
from .rng import RngStream
from .sampler import ChainConfig, run_chain
from .simulate import Scenario, gen

METHODS = ("cb", "decon", "naive")


@dataclass(frozen=True)
class BenchmarkConfig:
    scenario: str = "T5_HOMO"
    family: str = "normal"
    n: int = 1000
    reps: int = 20
    seed: int = 0
    n_iter: int = 5000
    burn_in: int = 1000
    thin: int = 2
    methods: tuple = METHODS
    threads: int = 1

    def __post_init__(self):
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.reps < 1 or self.threads < 1:
            raise ValueError("reps and threads must be positive")


def _chain_seed(seed, rep):
    return seed * 1_000_003 + rep


def fit_cb_handle(data, kernel, hp, cfg, grid=None, keep_latent=False):
    """Fit the chain and wrap the posterior mean density in a handle."""
    draws = run_chain(data, kernel, hp, cfg, keep_latent=keep_latent)
    grid = M.default_grid() if grid is None else np.asarray(grid, dtype=float)
    est = posterior_mean_density(draws, grid)
    handle = M.DensityHandle.from_grid(
        grid, est.values, diagnostics={"accept_rate": draws.accept_rate}
    )
    return handle, draws


def benchmark_replicate(cfg: BenchmarkConfig, rep: int, hp: Hyperparams | None = None):
    """Run one replicate; returns one metrics row per method."""
    scn = Scenario(cfg.scenario, cfg.family, cfg.n)
    data, truth, _ = gen(scn, RngStream(cfg.seed, rep))
    kernel = ErrorKernel(cfg.family)
    threshold = scn.exceedance_threshold
    grid = M.default_grid()

    estimates = {}
    if "cb" in cfg.methods:
        chain_cfg = ChainConfig(
            n_iter=cfg.n_iter,
            burn_in=cfg.burn_in,
            thin=cfg.thin,
            seed=_chain_seed(cfg.seed, rep),
        )
        estimates["cb"], _ = fit_cb_handle(data, kernel, hp or Hyperparams(), chain_cfg, grid)
    if "decon" in cfg.methods:
        mode = "hetero" if scn.heteroscedastic else "homo"
        estimates["decon"] = decon_kde(data, kernel, KernelSpec(), mode=mode, grid=grid)
    if "naive" in cfg.methods:
        estimates["naive"] = naive_kde(data)

    rows = []
    for method in cfg.methods:
        scores = M.score(estimates[method], truth, grid, threshold)
        rows.append(
            {"scenario": cfg.scenario, "n": cfg.n, "rep": rep, "method": method, **scores}
        )
    return rows


def run_benchmark(cfg: BenchmarkConfig, hp: Hyperparams | None = None):
    """All replicates, optionally on a process pool; returns flat rows."""
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            chunks = list(
                pool.map(
                    benchmark_replicate,
                    [cfg] * cfg.reps,
                    range(cfg.reps),
                    [hp] * cfg.reps,
                )
            )
    else:
        chunks = [benchmark_replicate(cfg, rep, hp) for rep in range(cfg.reps)]
    return [row for chunk in chunks for row in chunk]


def aggregate(rows):
    """Mean (SD) per method and metric, in the benchmark-table layout."""
    out = []
    for method in dict.fromkeys(r["method"] for r in rows):
        sub = [r for r in rows if r["method"] == method]
        entry = {"method": method, "reps": len(sub)}
        for metric in M.METRIC_COLUMNS:
            vals = np.array([r[metric] for r in sub], dtype=float)
            entry[f"{metric}_mean"] = float(np.mean(vals))
            entry[f"{metric}_sd"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        out.append(entry)
    return out
