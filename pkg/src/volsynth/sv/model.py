"""Stochastic volatility model: parameters, simulation, and return helpers.

The model for a mean-corrected daily return y_t is

    y_t = exp(h_t / 2) * eps_t,            eps_t ~ N(0, 1)
    h_{t+1} = mu + phi * (h_t - mu) + sigma_eta * eta_t,   eta_t ~ N(0, 1)
    h_1 ~ N(mu, sigma_eta^2 / (1 - phi^2))

with the return scale normalized to one for identifiability, so the
time-varying conditional variance is exp(h_t).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import ConfigError, DataError


@dataclass(frozen=True)
class SvParams:
    """Log-volatility level, AR(1) persistence, and innovation std-dev."""

    mu: float
    phi: float
    sigma_eta: float

    def __post_init__(self):
        if not np.isfinite([self.mu, self.phi, self.sigma_eta]).all():
            raise ConfigError("SV parameters must be finite")
        if abs(self.phi) >= 1.0:
            raise ConfigError(f"|phi| must be < 1 for stationarity, got {self.phi}")
        if self.sigma_eta <= 0.0:
            raise ConfigError(f"sigma_eta must be positive, got {self.sigma_eta}")

    @property
    def stationary_var(self) -> float:
        """Unconditional variance of the log-volatility process."""
        return self.sigma_eta**2 / (1.0 - self.phi**2)


@dataclass(frozen=True)
class SvPosterior:
    """MCMC output for one return series."""

    draws: pd.DataFrame  # columns mu, phi, sigma_eta; one row per retained draw
    posterior_mean: SvParams
    h_filtered: np.ndarray  # particle-filter mean of h_t | y_{1:t} at posterior-mean params
    h_smoothed: np.ndarray  # posterior mean of h_t from the Gibbs sampler
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return len(self.draws)

    def credible_interval(self, param: str, level: float = 0.9) -> tuple[float, float]:
        a = (1.0 - level) / 2.0
        lo, hi = self.draws[param].quantile([a, 1.0 - a])
        return float(lo), float(hi)

    def summary(self) -> dict:
        out = {
            "n_draws": self.n_draws,
            "posterior_mean": {
                "mu": self.posterior_mean.mu,
                "phi": self.posterior_mean.phi,
                "sigma_eta": self.posterior_mean.sigma_eta,
            },
            "posterior_sd": {k: float(self.draws[k].std(ddof=1)) for k in ("mu", "phi", "sigma_eta")},
            "ci90": {k: self.credible_interval(k) for k in ("mu", "phi", "sigma_eta")},
        }
        out.update(self.diagnostics)
        return out


def mean_correct(log_returns) -> np.ndarray:
    """Subtract the sample mean from a daily return series."""
    x = np.asarray(log_returns, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DataError("need at least 2 observations to mean-correct a return series")
    if not np.isfinite(x).all():
        raise DataError("return series contains non-finite values")
    return x - x.mean()


def log_returns_from_prices(prices) -> np.ndarray:
    """First difference of log prices; drops the first observation."""
    p = np.asarray(prices, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DataError("need at least 2 prices to form log returns")
    if not np.isfinite(p).all() or (p <= 0).any():
        raise DataError("prices must be finite and positive")
    return np.diff(np.log(p))


def simulate_sv(params: SvParams, T: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Simulate (returns, h) of length T from the model; reproducible per seed."""
    if T < 1:
        raise ConfigError("T must be >= 1")
    rng = np.random.default_rng(seed)
    h = np.empty(T)
    h[0] = params.mu + np.sqrt(params.stationary_var) * rng.standard_normal()
    eta = rng.standard_normal(T - 1)
    for t in range(1, T):
        h[t] = params.mu + params.phi * (h[t - 1] - params.mu) + params.sigma_eta * eta[t - 1]
    y = np.exp(h / 2.0) * rng.standard_normal(T)
    return y, h
