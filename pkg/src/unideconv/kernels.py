"""Additive-noise kernels: symmetric unimodal error families.

A kernel is parameterized everywhere by its standard deviation, so the
Normal and Laplace families are interchangeable at call sites; the
Laplace scale b is recovered internally from var = 2 b^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from . import rng as _rng

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)

FAMILIES = ("normal", "laplace")


@dataclass(frozen=True)
class ErrorKernel:
    """Noise family for the additive measurement-error model.

    `family` is "normal" or "laplace".  All methods take the noise
    standard deviation `sigma` per call; the per-observation scales live
    with the data, not here.
    """

    family: str = "normal"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")

    def _b(self, sigma):
        # Laplace scale from SD: var = 2 b^2
        return np.asarray(sigma, dtype=float) / _SQRT2

    def pdf(self, x, loc=0.0, sigma=1.0):
        x = np.asarray(x, dtype=float)
        t = x - loc
        if self.family == "normal":
            out = np.exp(-0.5 * (t / sigma) ** 2) / (sigma * _SQRT2PI)
        else:
            b = self._b(sigma)
            out = np.exp(-np.abs(t) / b) / (2.0 * b)
        return out if out.shape else float(out)

    def cdf(self, x, loc=0.0, sigma=1.0):
        x = np.asarray(x, dtype=float)
        t = x - loc
        if self.family == "normal":
            out = special.ndtr(t / sigma)
        else:
            y = t / self._b(sigma)
            out = np.where(y < 0, 0.5 * np.exp(y), 1.0 - 0.5 * np.exp(-np.abs(y)))
        return out if out.shape else float(out)

    def quantile(self, u, loc=0.0, sigma=1.0):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)):
            raise ValueError("quantile argument must lie in (0, 1)")
        if self.family == "normal":
            out = loc + sigma * special.ndtri(u)
        else:
            b = self._b(sigma)
            y = np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))
            out = loc + b * y
        return out if out.shape else float(out)

    def char_fn(self, t, sigma=1.0):
        """Characteristic function of the zero-mean noise at SD `sigma`."""
        t = np.asarray(t, dtype=float)
        if self.family == "normal":
            out = np.exp(-0.5 * (sigma * t) ** 2)
        else:
            b = self._b(sigma)
            out = 1.0 / (1.0 + (b * t) ** 2)
        return out if out.shape else float(out)

    def sample(self, loc, sigma, rng, size=None):
        gen = _rng._generator(rng)
        loc, sigma = np.broadcast_arrays(
            np.asarray(loc, dtype=float), np.asarray(sigma, dtype=float)
        )
        shape = loc.shape if size is None else size
        if self.family == "normal":
            return loc + sigma * gen.standard_normal(shape)
        return gen.laplace(loc, self._b(sigma), size=shape)

    def sample_truncated(self, loc, sigma, lo, hi, rng, size=None, degenerate="raise"):
        """Draw from the kernel centered at `loc`, conditioned to [lo, hi]."""
        if self.family == "normal":
            return _rng.sample_truncated_normal(
                loc, sigma, lo, hi, rng, size=size, degenerate=degenerate
            )
        return _rng.sample_truncated_laplace(
            loc, self._b(sigma), lo, hi, rng, size=size, degenerate=degenerate
        )
