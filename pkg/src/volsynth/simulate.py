"""Synthetic panel generation with known ground truth.

Outcomes follow the estimating equation: covariate effects, additive unit
and time effects, an r-factor interactive component, an injected treatment
effect on treated units post-adoption, and iid noise. Covariates can be
correlated with the factor structure so the factor step has real
confounding to absorb.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

from .dataio import PanelData, assemble_panel
from .errors import ConfigError


def simulate_panel(
    n_control: int = 24,
    n_treated: int = 3,
    n_periods: int = 166,
    r: int = 2,
    pre_lengths=(121, 70, 126),
    beta=(1.0, -0.5, 0.25),
    delta=1.0,
    noise_sd: float = 0.3,
    snr: float | None = None,
    x_factor_mix: float = 0.5,
    start_month: str = "2008-03",
    seed=None,
) -> tuple[PanelData, dict]:
    """Simulated balanced panel plus the ground truth that generated it.

    `snr`, when given, overrides `noise_sd` so that the variance ratio of
    the factor component to the noise equals it. `delta` may be a scalar or
    one value per treated unit.
    """
    rng = np.random.default_rng(seed)
    n = n_control + n_treated
    pre = np.asarray(pre_lengths, dtype=int)
    if pre.size != n_treated:
        raise ConfigError(f"{n_treated} treated units but {pre.size} pre-treatment lengths")
    if np.any((pre < 1) | (pre >= n_periods)):
        raise ConfigError("pre-treatment lengths must lie in [1, n_periods)")
    beta = np.asarray(beta, dtype=float)
    p = beta.size
    delta_vec = np.broadcast_to(np.asarray(delta, dtype=float), (n_treated,)).copy()
    if snr is not None:
        if r == 0:
            raise ConfigError("snr is defined relative to the factor component; need r >= 1")
        noise_sd = float(np.sqrt(r / snr))

    alpha = rng.normal(0.0, 0.5, size=n)
    xi = rng.normal(0.0, 0.5, size=n_periods)
    F = rng.standard_normal((n_periods, r))
    Lam = rng.standard_normal((n, r))
    factor_part = Lam @ F.T if r else np.zeros((n, n_periods))

    X = np.empty((n, n_periods, p))
    w = float(np.clip(x_factor_mix, 0.0, 0.99))
    shared = factor_part / np.sqrt(max(r, 1))
    for k in range(p):
        X[:, :, k] = np.sqrt(1.0 - w * w) * rng.standard_normal((n, n_periods)) + w * shared

    D = np.zeros((n, n_periods), dtype=np.int64)
    for j in range(n_treated):
        D[n_control + j, pre[j]:] = 1

    eps = rng.normal(0.0, noise_sd, size=(n, n_periods))
    Y = (
        np.tensordot(X, beta, axes=([2], [0]))
        + factor_part
        + alpha[:, None]
        + xi[None, :]
        + D * np.concatenate([np.zeros(n_control), delta_vec])[:, None]
        + eps
    )

    units = [f"C{i + 1:02d}" for i in range(n_control)] + [f"T{j + 1:02d}" for j in range(n_treated)]
    times = pd.period_range(start_month, periods=n_periods, freq="M").astype(str).tolist()
    cov_names = [f"x{k + 1}" for k in range(p)]
    panel = assemble_panel(units, times, Y, D, X, cov_names)
    truth = {
        "beta": beta,
        "delta": delta_vec,
        "alpha": alpha,
        "xi": xi,
        "F": F,
        "Lambda": Lam,
        "noise_sd": noise_sd,
        "r": r,
        "pre_lengths": pre,
    }
    return panel, truth
