"""Deconvolution of a symmetric unimodal latent density from noisy data.

The estimator treats each observation as the latent value plus additive
noise of known per-observation scale (Normal or Laplace), represents the
latent density as a mixture of symmetric uniforms whose half-widths get
a finite Gamma-mixture prior, and explores the posterior with a Gibbs
sampler (Metropolis step for the Gamma shapes).  Companion modules
provide simulation scenarios, density metrics, kernel-deconvolution
baselines, and discovery projection for effect-size applications.
"""

from .exceptions import NumericError
from .kernels import ErrorKernel
from .model import (
    Dataset,
    DensityEstimate,
    Hyperparams,
    LatentState,
    MixtureParams,
    PosteriorDraws,
    eval_latent_cdf,
    eval_latent_density,
    eval_observed_density,
    posterior_mean_density,
)
from .rng import RngStream
from .sampler import ChainConfig, SufficientStats, init_state, run_chain, sweep

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "Dataset",
    "DensityEstimate",
    "ErrorKernel",
    "Hyperparams",
    "LatentState",
    "MixtureParams",
    "NumericError",
    "PosteriorDraws",
    "RngStream",
    "SufficientStats",
    "eval_latent_cdf",
    "eval_latent_density",
    "eval_observed_density",
    "init_state",
    "posterior_mean_density",
    "run_chain",
    "sweep",
    "__version__",
]
