"""Auxiliary mixture Gibbs sampler for the stochastic volatility model.

Follows Kim, Shephard & Chib (1998): the observation equation is linearized
as log y_t^2 = h_t + z_t with z_t ~ log chi-square(1) approximated by a
seven-component Gaussian mixture. Each sweep draws (a) mixture indicators,
(b) the whole h path from a forward-filter backward-sampling pass over the
resulting linear Gaussian state space, and (c) mu, phi, sigma_eta from their
conditionals (phi via a Metropolis-Hastings step against its Beta prior).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from numba import njit

from ..errors import ConfigError, DataError
from .mixture import MIXTURE_MEANS, MIXTURE_VARIANCES, MIXTURE_WEIGHTS
from .model import SvParams, SvPosterior


@dataclass(frozen=True)
class SvPriors:
    """Weakly informative priors: mu ~ N(mean, var); (phi+1)/2 ~ Beta(a, b);
    sigma_eta^2 ~ InverseGamma(shape, scale)."""

    mu_mean: float = 0.0
    mu_var: float = 100.0
    phi_beta_a: float = 20.0
    phi_beta_b: float = 1.5
    sigma2_shape: float = 2.5
    sigma2_scale: float = 0.025


@dataclass(frozen=True)
class SvConfig:
    iterations: int = 20_000
    burn_in: int = 1_000
    seed: int | None = None
    priors: SvPriors = field(default_factory=SvPriors)
    offset_scale: float = 1e-4  # c = offset_scale * var(returns) inside log(y^2 + c)
    n_particles: int = 10_000
    run_filter: bool = True


@njit(cache=True)
def _gibbs_core(ystar, iterations, burn_in,
                mu_prior_mean, mu_prior_var, phi_a, phi_b, sig_shape, sig_scale,
                logq, b, v2, mu_init, phi_init, sigma_init, seed):
    np.random.seed(seed)
    T = ystar.shape[0]
    K = logq.shape[0]

    h = np.full(T, mu_init)
    mu = mu_init
    phi = phi_init
    sig2 = sigma_init * sigma_init

    n_keep = iterations - burn_in
    draws = np.empty((n_keep, 3))
    h_sum = np.zeros(T)
    accept = 0

    obs_mean = np.empty(T)
    obs_var = np.empty(T)
    a_filt = np.empty(T)
    p_filt = np.empty(T)
    lp = np.empty(K)

    for it in range(iterations):
        # (a) mixture indicators given h, theta
        for t in range(T):
            resid = ystar[t] - h[t]
            maxlp = -1.0e300
            for k in range(K):
                d = resid - b[k]
                val = logq[k] - 0.5 * np.log(v2[k]) - 0.5 * d * d / v2[k]
                lp[k] = val
                if val > maxlp:
                    maxlp = val
            tot = 0.0
            for k in range(K):
                lp[k] = np.exp(lp[k] - maxlp)
                tot += lp[k]
            u = np.random.uniform(0.0, tot)
            acc = 0.0
            kk = K - 1
            for k in range(K):
                acc += lp[k]
                if u <= acc:
                    kk = k
                    break
            obs_mean[t] = b[kk]
            obs_var[t] = v2[kk]

        # (b) h path by forward filtering, backward sampling
        a_pred = mu
        p_pred = sig2 / (1.0 - phi * phi)
        for t in range(T):
            innov = ystar[t] - obs_mean[t] - a_pred
            s = p_pred + obs_var[t]
            gain = p_pred / s
            a_filt[t] = a_pred + gain * innov
            p_filt[t] = p_pred * (1.0 - gain)
            if t < T - 1:
                a_pred = mu + phi * (a_filt[t] - mu)
                p_pred = phi * phi * p_filt[t] + sig2

        h[T - 1] = a_filt[T - 1] + np.sqrt(p_filt[T - 1]) * np.random.normal(0.0, 1.0)
        for t in range(T - 2, -1, -1):
            denom = phi * phi * p_filt[t] + sig2
            gain = p_filt[t] * phi / denom
            cmean = a_filt[t] + gain * (h[t + 1] - mu - phi * (a_filt[t] - mu))
            cvar = p_filt[t] * (1.0 - gain * phi)
            if cvar < 1.0e-300:
                cvar = 1.0e-300
            h[t] = cmean + np.sqrt(cvar) * np.random.normal(0.0, 1.0)

        # (c1) mu | h, phi, sigma2  (conjugate normal)
        sum_e = 0.0
        for t in range(T - 1):
            sum_e += h[t + 1] - phi * h[t]
        prec = (1.0 - phi * phi) / sig2 + (T - 1) * (1.0 - phi) * (1.0 - phi) / sig2 + 1.0 / mu_prior_var
        num = (1.0 - phi * phi) / sig2 * h[0] + (1.0 - phi) / sig2 * sum_e + mu_prior_mean / mu_prior_var
        mu = num / prec + np.sqrt(1.0 / prec) * np.random.normal(0.0, 1.0)

        # (c2) phi | h, mu, sigma2  (MH with likelihood-based normal proposal)
        sxx = 0.0
        sxy = 0.0
        for t in range(T - 1):
            dx = h[t] - mu
            sxx += dx * dx
            sxy += dx * (h[t + 1] - mu)
        if sxx < 1.0e-12:
            sxx = 1.0e-12
        phi_hat = sxy / sxx
        phi_sd = np.sqrt(sig2 / sxx)
        phi_prop = phi_hat + phi_sd * np.random.normal(0.0, 1.0)
        if np.abs(phi_prop) < 1.0:
            d0 = h[0] - mu
            g_prop = ((phi_a - 1.0) * np.log(0.5 * (1.0 + phi_prop))
                      + (phi_b - 1.0) * np.log(0.5 * (1.0 - phi_prop))
                      + 0.5 * np.log(1.0 - phi_prop * phi_prop)
                      - 0.5 * (1.0 - phi_prop * phi_prop) * d0 * d0 / sig2)
            g_cur = ((phi_a - 1.0) * np.log(0.5 * (1.0 + phi))
                     + (phi_b - 1.0) * np.log(0.5 * (1.0 - phi))
                     + 0.5 * np.log(1.0 - phi * phi)
                     - 0.5 * (1.0 - phi * phi) * d0 * d0 / sig2)
            if np.log(np.random.uniform(0.0, 1.0)) <= g_prop - g_cur:
                phi = phi_prop
                accept += 1

        # (c3) sigma2 | h, mu, phi  (conjugate inverse gamma)
        sse = (h[0] - mu) * (h[0] - mu) * (1.0 - phi * phi)
        for t in range(T - 1):
            e = h[t + 1] - mu - phi * (h[t] - mu)
            sse += e * e
        shape_post = sig_shape + 0.5 * T
        rate_post = sig_scale + 0.5 * sse
        g = np.random.gamma(shape_post)
        sig2 = rate_post / g

        if it >= burn_in:
            j = it - burn_in
            draws[j, 0] = mu
            draws[j, 1] = phi
            draws[j, 2] = np.sqrt(sig2)
            for t in range(T):
                h_sum[t] += h[t]

    return draws, h_sum / n_keep, accept


def effective_sample_size(chain: np.ndarray) -> float:
    """ESS via the initial-positive-sequence autocorrelation sum."""
    x = np.asarray(chain, float)
    n = x.size
    if n < 4:
        return float(n)
    x = x - x.mean()
    denom = np.dot(x, x)
    if denom <= 0:
        return float(n)
    rho_sum = 0.0
    for lag in range(1, min(n - 1, 2000)):
        rho = np.dot(x[:-lag], x[lag:]) / denom
        if rho <= 0:
            break
        rho_sum += rho
    return float(n / (1.0 + 2.0 * rho_sum))


def estimate_sv(returns, config: SvConfig | None = None) -> SvPosterior:
    """Posterior sampling of (mu, phi, sigma_eta) and the latent h path.

    Squared returns are offset by c = offset_scale * var(returns) before
    taking logs so exact zero returns never produce -inf.
    """
    from .particle import filter_volatility

    cfg = config or SvConfig()
    if cfg.burn_in < 1 or cfg.iterations <= cfg.burn_in:
        raise ConfigError(
            f"iterations ({cfg.iterations}) must exceed burn_in ({cfg.burn_in}) and burn_in must be >= 1"
        )
    y = np.asarray(returns, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise DataError("need a 1-d return series with at least 2 observations")
    if not np.isfinite(y).all():
        raise DataError("return series contains non-finite values")

    offset = cfg.offset_scale * float(np.var(y))
    if offset <= 0.0:  # all-zero series still needs a usable floor
        offset = cfg.offset_scale
    ystar = np.log(y**2 + offset)

    ss = np.random.SeedSequence(cfg.seed)
    gibbs_seed, filter_seed = [int(s.generate_state(1)[0] >> 1) for s in ss.spawn(2)]

    pri = cfg.priors
    mu_init = float(np.mean(ystar)) + 1.2704
    draws_arr, h_mean, accept = _gibbs_core(
        ystar, cfg.iterations, cfg.burn_in,
        pri.mu_mean, pri.mu_var, pri.phi_beta_a, pri.phi_beta_b,
        pri.sigma2_shape, pri.sigma2_scale,
        np.log(MIXTURE_WEIGHTS), MIXTURE_MEANS, MIXTURE_VARIANCES,
        mu_init, 0.95, 0.2, gibbs_seed,
    )
    draws = pd.DataFrame(draws_arr, columns=["mu", "phi", "sigma_eta"])
    post_mean = SvParams(
        mu=float(draws["mu"].mean()),
        phi=float(np.clip(draws["phi"].mean(), -0.999999, 0.999999)),
        sigma_eta=float(draws["sigma_eta"].mean()),
    )
    diagnostics = {
        "ess": {k: effective_sample_size(draws[k].values) for k in draws.columns},
        "phi_accept_rate": accept / cfg.iterations,
        "log_offset": offset,
    }
    h_filtered = (
        filter_volatility(y, post_mean, n_particles=cfg.n_particles, seed=filter_seed)
        if cfg.run_filter
        else np.full(y.size, np.nan)
    )
    return SvPosterior(
        draws=draws,
        posterior_mean=post_mean,
        h_filtered=h_filtered,
        h_smoothed=h_mean,
        diagnostics=diagnostics,
    )
