"""Reproducible generators for the benchmark scenarios.

Two latent laws: a raw t distribution with 5 degrees of freedom
(variance 5/3), and a sharp-peak mixture 0.8 N(0, s00^2) + 0.2 t5 with
s00 in {0.2, 0.1}.  Noise is homoscedastic (variance matched to the
latent law) or heteroscedastic with SD depending on the realized latent
value; the per-observation SDs are recorded with the data as known.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .kernels import FAMILIES, ErrorKernel
from .metrics import DensityHandle
from .model import Dataset
from .rng import RngStream

SCENARIO_IDS = (
    "T5_HOMO",
    "T5_HETERO",
    "PEAK_HOMO",
    "PEAK_HETERO",
    "PEAK01_HOMO",
    "PEAK01_HETERO",
)

_T5_NOISE_VAR = 1.66  # matched (up to rounding) to var(t5) = 5/3
_PEAK_NOISE_VAR = 0.36  # matched to var of the s00=0.2 peak mixture


@dataclass(frozen=True)
class Scenario:
    """One benchmark design: latent law + noise rule + error family."""

    id: str
    error_family: str = "normal"
    n: int = 1000

    def __post_init__(self):
        if self.id not in SCENARIO_IDS:
            raise ValueError(f"unknown scenario {self.id!r}; choose from {SCENARIO_IDS}")
        if self.error_family not in FAMILIES:
            raise ValueError(f"error_family must be one of {FAMILIES}")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def peak_sd(self):
        """SD of the tight-peak component, or None for the plain t5 law."""
        if self.id.startswith("PEAK01"):
            return 0.1
        if self.id.startswith("PEAK"):
            return 0.2
        return None

    @property
    def exceedance_threshold(self):
        """3x the tight-peak SD; None when the scenario has no peak."""
        s = self.peak_sd
        return None if s is None else 3.0 * s

    @property
    def heteroscedastic(self):
        return self.id.endswith("HETERO")

    def noise_sd(self, x):
        """Per-observation noise SD given realized latent values."""
        x = np.asarray(x, dtype=float)
        if self.id == "T5_HOMO":
            return np.full(x.shape, np.sqrt(_T5_NOISE_VAR))
        if self.id == "T5_HETERO":
            return np.abs(1.0 + x / 4.0)
        if self.heteroscedastic:
            return np.abs(0.75 + x / 4.0)
        return np.full(x.shape, np.sqrt(_PEAK_NOISE_VAR))

    def kernel(self):
        return ErrorKernel(self.error_family)


def _sample_latent(scn: Scenario, gen, n):
    if scn.peak_sd is None:
        return gen.standard_t(5, size=n)
    spike = gen.random(n) < 0.8
    return np.where(spike, gen.normal(0.0, scn.peak_sd, n), gen.standard_t(5, n))


def truth_pdf(scn: Scenario, x):
    x = np.asarray(x, dtype=float)
    t5 = stats.t(5).pdf(x)
    if scn.peak_sd is None:
        out = t5
    else:
        out = 0.8 * stats.norm(0.0, scn.peak_sd).pdf(x) + 0.2 * t5
    return out if out.shape else float(out)


def truth_cdf(scn: Scenario, x):
    x = np.asarray(x, dtype=float)
    t5 = stats.t(5).cdf(x)
    if scn.peak_sd is None:
        out = t5
    else:
        out = 0.8 * stats.norm(0.0, scn.peak_sd).cdf(x) + 0.2 * t5
    return out if out.shape else float(out)


def truth_handle(scn: Scenario) -> DensityHandle:
    if scn.peak_sd is None:
        return DensityHandle.from_scipy(stats.t(5), support=(-80.0, 80.0))
    return DensityHandle(
        pdf=lambda x: truth_pdf(scn, x),
        cdf=lambda x: truth_cdf(scn, x),
        quantile=None,
        support=(-80.0, 80.0),
    )


def gen(scn: Scenario, seed):
    """Simulate the scenario; returns (Dataset, truth handle, latent x)."""
    rng = seed if isinstance(seed, RngStream) else RngStream(int(seed))
    g = rng.generator
    x = _sample_latent(scn, g, scn.n)
    sd = scn.noise_sd(x)
    w = scn.kernel().sample(x, sd, g)
    return Dataset(w=w, sigma=sd), truth_handle(scn), x
