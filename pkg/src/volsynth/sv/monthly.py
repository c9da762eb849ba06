"""Daily-to-monthly volatility aggregation.

Monthly volatility is the root mean square of the daily volatilities
sigma_d = exp(h_d / 2) within the month:

    vol_m = sqrt( (1/n_m) * sum_{d in m} exp(h_d) )

so a month of constant daily volatility c aggregates to exactly c.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
import pandas as pd

from ..errors import DataError


def month_labels(dates) -> np.ndarray:
    """Map daily dates to 'YYYY-MM' labels."""
    try:
        idx = pd.PeriodIndex(pd.to_datetime(list(dates)), freq="M")
    except Exception as exc:
        raise DataError(f"cannot parse daily dates: {exc}") from None
    return idx.astype(str).to_numpy()


def aggregate_monthly(dates, daily_h, months: Sequence[str] | None = None) -> pd.Series:
    """Root-mean-square monthly volatility from daily log-volatility.

    `months`, when given, fixes the output calendar; a listed month with no
    contributing days is an error rather than a silent gap.
    """
    h = np.asarray(daily_h, dtype=float)
    labels = month_labels(dates)
    if labels.shape[0] != h.shape[0]:
        raise DataError(f"{labels.shape[0]} dates but {h.shape[0]} log-volatility values")
    if h.size == 0:
        raise DataError("empty daily series")
    if not np.isfinite(h).all():
        raise DataError("daily log-volatility contains non-finite values")

    frame = pd.DataFrame({"month": labels, "var": np.exp(h)})
    vol = frame.groupby("month", sort=True)["var"].mean().pow(0.5)
    vol.name = "volatility"
    vol.index.name = "month"

    if months is not None:
        wanted = [str(pd.Period(m, freq="M")) for m in months]
        empty = [m for m in wanted if m not in vol.index]
        if empty:
            raise DataError(f"aggregation error: no daily observations in month {empty[0]}")
        vol = vol.loc[wanted]
    return vol
