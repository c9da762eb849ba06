"""Auxiliary particle filter for the filtered log-volatility path.

Adapts the auxiliary sampling-importance-resampling scheme of Pitt &
Shephard (1999): when the effective sample size falls below a threshold,
particles are resampled with first-stage weights that look ahead through
the deterministic part of the state transition; otherwise the swarm is
propagated and reweighted without resampling.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError, NumericalError
from .model import SvParams

LOG_2PI = np.log(2.0 * np.pi)


def _loglik(y: float, h: np.ndarray) -> np.ndarray:
    # y | h ~ N(0, exp(h)); overflow to -inf is handled by the caller
    with np.errstate(over="ignore", invalid="ignore"):
        return -0.5 * (LOG_2PI + h + y * y * np.exp(-h))


def _stratified_resample(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = probs.size
    positions = (np.arange(n) + rng.uniform(size=n)) / n
    return np.searchsorted(np.cumsum(probs), positions).clip(max=n - 1)


def filter_volatility(returns, params: SvParams, n_particles: int = 10_000,
                      seed=None, resample_fraction: float = 0.5) -> np.ndarray:
    """Filtered mean of h_t given returns up to t, for each t.

    Deterministic for a fixed seed. Raises NumericalError if the particle
    weights degenerate completely at some time step.
    """
    if n_particles < 100:
        raise ConfigError(f"n_particles must be >= 100, got {n_particles}")
    y = np.asarray(returns, dtype=float)
    if y.ndim != 1 or y.size < 1:
        raise DataError("need a 1-d return series")
    if not np.isfinite(y).all():
        raise DataError("return series contains non-finite values")

    rng = np.random.default_rng(seed)
    mu, phi, sig = params.mu, params.phi, params.sigma_eta
    threshold = resample_fraction * n_particles

    h = mu + np.sqrt(params.stationary_var) * rng.standard_normal(n_particles)
    logw = np.full(n_particles, -np.log(n_particles))
    out = np.empty(y.size)

    for t in range(y.size):
        look = mu + phi * (h - mu)
        w = np.exp(logw - logw.max())
        w /= w.sum()
        ess = 1.0 / np.sum(w * w)
        if ess < threshold:
            first = logw + _loglik(y[t], look)
            m = first.max()
            if not np.isfinite(m):
                raise NumericalError(f"particle filter degenerated at t={t}")
            fw = np.exp(first - m)
            fw /= fw.sum()
            idx = _stratified_resample(fw, rng)
            h = look[idx] + sig * rng.standard_normal(n_particles)
            logw = _loglik(y[t], h) - _loglik(y[t], look[idx])
        else:
            h = look + sig * rng.standard_normal(n_particles)
            logw = logw + _loglik(y[t], h)
        m = logw.max()
        if not np.isfinite(m):
            raise NumericalError(f"particle filter degenerated at t={t}")
        w = np.exp(logw - m)
        total = w.sum()
        if total <= 0.0 or not np.isfinite(total):
            raise NumericalError(f"particle filter degenerated at t={t}")
        w /= total
        out[t] = np.sum(w * h)

    return out
