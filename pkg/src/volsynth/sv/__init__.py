"""Stochastic volatility estimation for daily return series."""

from .gibbs import SvConfig, SvPriors, effective_sample_size, estimate_sv
from .mixture import (
    LOG_CHI2_MEAN_OFFSET,
    MIXTURE_MEANS,
    MIXTURE_MEANS_RAW,
    MIXTURE_VARIANCES,
    MIXTURE_WEIGHTS,
)
from .model import SvParams, SvPosterior, log_returns_from_prices, mean_correct, simulate_sv
from .monthly import aggregate_monthly, month_labels
from .particle import filter_volatility

__all__ = [
    "SvConfig",
    "SvParams",
    "SvPosterior",
    "SvPriors",
    "aggregate_monthly",
    "effective_sample_size",
    "estimate_sv",
    "filter_volatility",
    "log_returns_from_prices",
    "mean_correct",
    "month_labels",
    "simulate_sv",
    "LOG_CHI2_MEAN_OFFSET",
    "MIXTURE_MEANS",
    "MIXTURE_MEANS_RAW",
    "MIXTURE_VARIANCES",
    "MIXTURE_WEIGHTS",
]
