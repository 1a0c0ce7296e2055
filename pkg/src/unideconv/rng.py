"""Seedable random generation for truncated and simplex distributions.

All samplers are vectorized over their parameters and draw from a
``numpy.random.Generator``.  Truncated draws use inverse-CDF transforms
written to stay accurate deep in the tails (interval masses down to
1e-300); the truncated Gamma falls back to a shifted-exponential
rejection sampler when the upper-tail interval mass drops below 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .exceptions import NumericError

# Smallest truncation mass any inverse-CDF path will attempt.
_LOG_MASS_FLOOR = np.log(1e-300)

# Upper-tail mass under which the truncated Gamma switches to rejection.
_GAMMA_TAIL_SWITCH = 1e-12

_LOG_HALF = np.log(0.5)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (seed, stream_id).

    Identical ``(seed, stream_id)`` pairs reproduce identical draw
    sequences bit for bit.  ``substream`` derives independent child
    streams for parallel workers without sharing state.
    """

    seed: int
    stream_id: int = 0
    _path: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_gen", None)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(
                entropy=int(self.seed), spawn_key=(int(self.stream_id),) + self._path
            )
            object.__setattr__(self, "_gen", np.random.default_rng(ss))
        return self._gen

    def substream(self, index: int) -> "RngStream":
        """Child stream `index`; children of distinct indices are independent."""
        return RngStream(self.seed, self.stream_id, self._path + (int(index),))


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise ValueError(f"rng must be an RngStream or numpy Generator, got {type(rng)!r}")


def _broadcast(*arrays, size=None):
    out = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in arrays])
    if size is not None:
        out = [np.broadcast_to(a, size) for a in out]
    return [np.array(a) for a in out]


def _handle_degenerate(x, bad, degenerate, what):
    if not np.any(bad):
        return x
    if degenerate == "nan":
        x = np.where(bad, np.nan, x)
        return x
    idx = np.flatnonzero(np.atleast_1d(bad))
    raise NumericError(
        f"truncation mass below 1e-300 in {what} at {bad.sum()} site(s), "
        f"first index {idx[0]}"
    )


def sample_truncated_normal(mu, sigma, lo, hi, rng, size=None, degenerate="raise"):
    """Draw Normal(mu, sigma) conditioned to [lo, hi].

    Parameters broadcast against each other; `size` forces the output
    shape.  Intervals whose probability mass is below 1e-300 raise
    NumericError, or yield NaN when ``degenerate="nan"``.
    """
    gen = _generator(rng)
    mu, sigma, lo, hi = _broadcast(mu, sigma, lo, hi, size=size)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    if np.any(lo >= hi):
        raise ValueError("require lo < hi for truncation bounds")

    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    # Reflect so the interval midpoint is at or below zero; deep-tail
    # intervals then live entirely in the lower tail where log_ndtr and
    # ndtri_exp keep full precision.
    with np.errstate(invalid="ignore"):
        flip = (a + b) > 0
    a_, b_ = np.where(flip, -b, a), np.where(flip, -a, b)

    u = gen.random(a_.shape)
    z = np.empty_like(a_)
    bad = np.zeros(a_.shape, dtype=bool)

    tail = b_ <= 0
    if np.any(tail):
        at, bt = a_[tail], b_[tail]
        la = special.log_ndtr(at)
        lb = special.log_ndtr(bt)
        with np.errstate(divide="ignore"):
            ratio = np.exp(la - lb)  # in [0, 1]
            log_mass = lb + np.log1p(-ratio)
        bad_t = ~(log_mass >= _LOG_MASS_FLOOR)
        lt = lb + np.log(u[tail] + (1.0 - u[tail]) * ratio)
        z[tail] = special.ndtri_exp(np.minimum(lt, 0.0))
        bad[tail] = bad_t

    mid = ~tail
    if np.any(mid):
        am, bm = a_[mid], b_[mid]
        fa = special.ndtr(am)
        sb = special.ndtr(-bm)
        mass = 1.0 - fa - sb
        bad_m = ~(mass >= 1e-300)
        um = u[mid]
        f_target = fa + um * mass
        # invert through whichever tail the target sits in
        upper = f_target > 0.5
        zm = np.empty_like(am)
        zm[~upper] = special.ndtri(np.maximum(f_target[~upper], 1e-300))
        s_target = sb + (1.0 - um) * mass
        zm[upper] = -special.ndtri(np.maximum(s_target[upper], 1e-300))
        z[mid] = zm
        bad[mid] = bad_m

    z = np.where(flip, -z, z)
    x = mu + sigma * z
    x = np.clip(x, lo, hi)
    x = _handle_degenerate(x, bad, degenerate, "sample_truncated_normal")
    return x if x.shape else float(x)


def sample_truncated_laplace(mu, b, lo, hi, rng, size=None, degenerate="raise"):
    """Draw Laplace(mu, b) conditioned to [lo, hi] by piecewise-exponential
    inverse CDF (exact in both tails)."""
    gen = _generator(rng)
    mu, b, lo, hi = _broadcast(mu, b, lo, hi, size=size)
    if np.any(b <= 0):
        raise ValueError("scale b must be positive")
    if np.any(lo >= hi):
        raise ValueError("require lo < hi for truncation bounds")

    a = (lo - mu) / b
    c = (hi - mu) / b
    with np.errstate(invalid="ignore"):
        flip = (a + c) > 0
    a_, c_ = np.where(flip, -c, a), np.where(flip, -a, c)

    u = gen.random(a_.shape)
    y = np.empty_like(a_)
    bad = np.zeros(a_.shape, dtype=bool)

    tail = c_ <= 0
    if np.any(tail):
        at, ct = a_[tail], c_[tail]
        ratio = np.exp(at - ct)
        log_mass = _LOG_HALF + ct + np.log1p(-ratio)
        bad[tail] = ~(log_mass >= _LOG_MASS_FLOOR)
        lt = ct + np.log(u[tail] + (1.0 - u[tail]) * ratio)
        y[tail] = lt  # log(2 F) = log target shifted by log 0.5

    mid = ~tail
    if np.any(mid):
        am, cm = a_[mid], c_[mid]
        fa = 0.5 * np.exp(am)
        sc = 0.5 * np.exp(-cm)
        mass = 1.0 - fa - sc
        bad[mid] = ~(mass >= 1e-300)
        um = u[mid]
        f_target = fa + um * mass
        upper = f_target > 0.5
        ym = np.empty_like(am)
        ym[~upper] = np.log(2.0 * np.maximum(f_target[~upper], 1e-300))
        s_target = sc + (1.0 - um) * mass
        ym[upper] = -np.log(2.0 * np.maximum(s_target[upper], 1e-300))
        y[mid] = ym

    y = np.where(flip, -y, y)
    x = np.clip(mu + b * y, lo, hi)
    x = _handle_degenerate(x, bad, degenerate, "sample_truncated_laplace")
    return x if x.shape else float(x)


def _gamma_tail_rejection(shape, rate, lo, gen):
    """Ga(shape, rate) conditioned to [lo, inf) for lo deep in the upper
    tail, by rejection from a shifted exponential (envelope tangent at lo).
    """
    shape = np.atleast_1d(shape).astype(float)
    rate = np.atleast_1d(rate).astype(float)
    lo = np.atleast_1d(lo).astype(float)
    # For shape > 1 tilt the proposal rate so the density ratio peaks at lo;
    # lo > (shape-1)/rate holds whenever the tail mass is small.
    prop_rate = np.where(shape > 1.0, rate - (shape - 1.0) / lo, rate)
    prop_rate = np.maximum(prop_rate, 0.5 * rate)
    out = np.empty_like(lo)
    pending = np.ones(lo.shape, dtype=bool)
    for _ in range(1000):
        idx = np.flatnonzero(pending)
        if idx.size == 0:
            break
        y = lo[idx] + gen.exponential(1.0 / prop_rate[idx])
        # log acceptance: target/envelope, equal to 1 at y = lo
        la = (shape[idx] - 1.0) * np.log(y / lo[idx]) - (rate[idx] - prop_rate[idx]) * (
            y - lo[idx]
        )
        accept = np.log(gen.random(idx.size)) < la
        out[idx[accept]] = y[accept]
        pending[idx[accept]] = False
    else:
        raise NumericError("truncated-gamma rejection sampler failed to accept")
    return out


def sample_truncated_gamma(shape, rate, lo, hi, rng, size=None, degenerate="raise"):
    """Draw Ga(shape, rate) conditioned to [lo, hi] (hi may be inf).

    Inverse CDF on the regularized incomplete gamma, switching to the
    numerically smaller tail; far upper-tail one-sided intervals
    (mass < 1e-12) use rejection with a shifted-exponential proposal.
    """
    gen = _generator(rng)
    shape, rate, lo, hi = _broadcast(shape, rate, lo, hi, size=size)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ValueError("shape and rate must be positive")
    if np.any(lo >= hi):
        raise ValueError("require lo < hi for truncation bounds")
    lo = np.maximum(lo, 0.0)

    xlo = rate * lo
    xhi = np.where(np.isinf(hi), np.inf, rate * hi)
    plo = special.gammainc(shape, xlo)
    qlo = special.gammaincc(shape, xlo)
    phi = np.where(np.isinf(xhi), 1.0, special.gammainc(shape, xhi))
    qhi = np.where(np.isinf(xhi), 0.0, special.gammaincc(shape, xhi))

    reject = (qlo < _GAMMA_TAIL_SWITCH) & np.isinf(hi)
    mass_p = phi - plo
    mass_q = qlo - qhi
    bad = ~((mass_p >= 1e-300) | (mass_q >= 1e-300) | reject)

    u = gen.random(shape.shape)
    x = np.empty_like(shape)

    inv = ~reject
    if np.any(inv):
        # pick the tail with more headroom: lower-P when the interval sits
        # left of the median, upper-Q when it sits right
        use_q = qlo[inv] <= plo[inv]
        xi = np.empty(inv.sum())
        si, ui = shape[inv], u[inv]
        if np.any(use_q):
            q_target = qlo[inv][use_q] - ui[use_q] * mass_q[inv][use_q]
            q_target = np.clip(q_target, 1e-300, 1.0)
            xi[use_q] = special.gammainccinv(si[use_q], q_target)
        if np.any(~use_q):
            p_target = plo[inv][~use_q] + ui[~use_q] * mass_p[inv][~use_q]
            p_target = np.clip(p_target, 1e-300, 1.0)
            xi[~use_q] = special.gammaincinv(si[~use_q], p_target)
        x[inv] = xi / rate[inv]

    if np.any(reject):
        x[reject] = _gamma_tail_rejection(
            shape[reject], rate[reject], lo[reject], gen
        )

    x = np.clip(x, lo, hi)
    x = _handle_degenerate(x, bad, degenerate, "sample_truncated_gamma")
    return x if x.shape else float(x)


def sample_truncated_exponential(rate, lo, hi, rng, size=None):
    """Draw Expon(rate) conditioned to [lo, hi]; hi may be inf.

    For hi = inf this is lo + Expon(rate) by memorylessness.
    """
    gen = _generator(rng)
    rate, lo, hi = _broadcast(rate, lo, hi, size=size)
    if np.any(rate <= 0):
        raise ValueError("rate must be positive")
    if np.any(lo >= hi):
        raise ValueError("require lo < hi for truncation bounds")
    lo = np.maximum(lo, 0.0)

    x = np.empty_like(lo)
    open_top = np.isinf(hi)
    if np.any(open_top):
        x[open_top] = lo[open_top] + gen.exponential(1.0 / rate[open_top])
    closed = ~open_top
    if np.any(closed):
        delta = hi[closed] - lo[closed]
        u = gen.random(delta.shape)
        scaled = -np.expm1(-rate[closed] * delta)  # interval mass / e^{-rate lo}
        x[closed] = lo[closed] - np.log1p(-u * scaled) / rate[closed]
    x = np.clip(x, lo, hi)
    return x if x.shape else float(x)


def sample_dirichlet(conc, rng):
    """One draw from Dirichlet(conc); components sum to 1."""
    conc = np.asarray(conc, dtype=float)
    if conc.ndim != 1 or conc.size < 1:
        raise ValueError("conc must be a nonempty 1-d sequence")
    if np.any(conc <= 0) or not np.all(np.isfinite(conc)):
        raise ValueError("Dirichlet concentrations must be positive and finite")
    return _generator(rng).dirichlet(conc)


def sample_categorical_log(logw, rng):
    """Index k with probability proportional to exp(logw_k - max(logw))."""
    logw = np.asarray(logw, dtype=float)
    if logw.ndim != 1 or logw.size < 1:
        raise ValueError("logw must be a nonempty 1-d sequence")
    return int(categorical_log_rows(logw[None, :], rng)[0])


def categorical_log_rows(logw, rng):
    """Row-wise categorical draws from log weights (n, K) -> (n,) indices.

    Stable for log-weight spreads up to +-700: each row is shifted by its
    maximum before exponentiation.  Rows that are all -inf raise.
    """
    gen = _generator(rng)
    logw = np.asarray(logw, dtype=float)
    m = np.max(logw, axis=1)
    finite = np.isfinite(m)
    if not np.all(finite):
        raise NumericError(
            f"all-(-inf) categorical weights at row(s) {np.flatnonzero(~finite)[:5]}"
        )
    w = np.exp(logw - m[:, None])
    cdf = np.cumsum(w, axis=1)
    u = gen.random(logw.shape[0]) * cdf[:, -1]
    return (cdf < u[:, None]).sum(axis=1)
