"""Panel ingestion, covariate derivation, and treatment-structure validation.

Input panels are long-format CSVs with one row per (unit, month). Units are
reordered controls-first, treated-last; the internal time index is 0-based
over calendar months normalized to "YYYY-MM".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import DataError

DEFAULT_SCHEMA = {
    "unit": "unit",
    "time": "time",
    "outcome": "outcome",
    "treatment": "treatment",
}


def _normalize_month(value, row=None) -> str:
    """Parse a year-month label to canonical 'YYYY-MM'."""
    s = str(value).strip()
    try:
        period = pd.Period(s, freq="M")
    except Exception:
        where = f" (row {row})" if row is not None else ""
        raise DataError(f"cannot parse time value {value!r} as year-month{where}") from None
    return str(period)


@dataclass(frozen=True)
class TreatmentReport:
    """Outcome of treatment-matrix validation."""

    ok: bool
    t0: np.ndarray  # per-row count of pre-treatment periods (T for never-treated rows)
    ever_treated: np.ndarray  # boolean per row


def validate_treatment(D: np.ndarray, units: Sequence[str] | None = None) -> TreatmentReport:
    """Check that every treatment row is monotone non-decreasing in time.

    Raises DataError on a reversal (a 1 followed by a 0) or on a row that is
    treated from the first period (no pre-treatment observations). Returns a
    report carrying each row's pre-treatment length T0.
    """
    D = np.asarray(D)
    if not np.isin(D, (0, 1)).all():
        bad = np.argwhere(~np.isin(D, (0, 1)))[0]
        raise DataError(f"treatment values must be 0/1; found {D[tuple(bad)]!r} at unit {bad[0]}, time {bad[1]}")
    D = D.astype(np.int64)
    n, t_len = D.shape
    names = list(units) if units is not None else [str(i) for i in range(n)]
    t0 = np.full(n, t_len, dtype=np.int64)
    ever = np.zeros(n, dtype=bool)
    for i in range(n):
        row = D[i]
        drops = np.nonzero(np.diff(row) < 0)[0]
        if drops.size:
            t = int(drops[0]) + 1
            raise DataError(f"treatment reversal at unit {names[i]}, time index {t}")
        if row.any():
            ever[i] = True
            first = int(np.argmax(row))
            if first == 0:
                raise DataError(f"unit {names[i]} has no pre-treatment periods")
            t0[i] = first
    return TreatmentReport(ok=True, t0=t0, ever_treated=ever)


@dataclass(frozen=True)
class PanelData:
    """Balanced outcome/treatment/covariate panel over units x months.

    Units are ordered controls first, treated last. Y and D are (N, T);
    X is (N, T, p). T0 maps each treated unit to its pre-treatment length.
    """

    units: tuple[str, ...]
    times: tuple[str, ...]
    Y: np.ndarray
    D: np.ndarray
    X: np.ndarray
    covariate_names: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        D = np.asarray(self.D)
        n, t_len = len(self.units), len(self.times)
        if Y.shape != (n, t_len):
            raise DataError(f"Y shape {Y.shape} does not match {n} units x {t_len} periods")
        if D.shape != (n, t_len):
            raise DataError(f"D shape {D.shape} does not match Y shape {Y.shape}")
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 2:  # p = 0 stored as (N, T) empty third axis
            X = X.reshape(n, t_len, 0)
        if X.shape[:2] != (n, t_len) or X.shape[2] != len(self.covariate_names):
            raise DataError(
                f"X shape {X.shape} does not match {n}x{t_len}x{len(self.covariate_names)}"
            )
        if not np.isfinite(Y).all():
            i, t = np.argwhere(~np.isfinite(Y))[0]
            raise DataError(f"missing or non-finite outcome at unit {self.units[i]}, time {self.times[t]}")
        if X.size and not np.isfinite(X).all():
            i, t, k = np.argwhere(~np.isfinite(X))[0]
            raise DataError(
                f"missing or non-finite covariate {self.covariate_names[k]} "
                f"at unit {self.units[i]}, time {self.times[t]}"
            )
        report = validate_treatment(D, self.units)
        ctrl = np.nonzero(~report.ever_treated)[0]
        treat = np.nonzero(report.ever_treated)[0]
        if treat.size and ctrl.size and treat.min() < ctrl.max():
            raise DataError("units must be ordered controls first, treated last")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "D", D.astype(np.int64))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "times", tuple(self.times))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        object.__setattr__(self, "_t0", report.t0)
        object.__setattr__(self, "_treated_idx", treat)
        object.__setattr__(self, "_control_idx", ctrl)

    # -- shape accessors -------------------------------------------------
    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_periods(self) -> int:
        return len(self.times)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_names)

    @property
    def control_idx(self) -> np.ndarray:
        return self._control_idx

    @property
    def treated_idx(self) -> np.ndarray:
        return self._treated_idx

    @property
    def control_units(self) -> tuple[str, ...]:
        return tuple(self.units[i] for i in self._control_idx)

    @property
    def treated_units(self) -> tuple[str, ...]:
        return tuple(self.units[i] for i in self._treated_idx)

    @property
    def n_control(self) -> int:
        return int(self._control_idx.size)

    @property
    def n_treated(self) -> int:
        return int(self._treated_idx.size)

    @property
    def t0(self) -> dict[str, int]:
        """Pre-treatment length per treated unit."""
        return {self.units[i]: int(self._t0[i]) for i in self._treated_idx}

    def t0_array(self) -> np.ndarray:
        """Pre-treatment lengths aligned with treated_idx."""
        return self._t0[self._treated_idx].copy()

    def time_index(self, label: str) -> int:
        label = _normalize_month(label)
        try:
            return self.times.index(label)
        except ValueError:
            raise DataError(f"time {label} not present in panel") from None

    def to_frame(self) -> pd.DataFrame:
        """Long-format frame with columns unit,time,outcome,treatment,<covariates>."""
        n, t_len = self.n_units, self.n_periods
        frame = pd.DataFrame(
            {
                "unit": np.repeat(self.units, t_len),
                "time": np.tile(self.times, n),
                "outcome": self.Y.ravel(),
                "treatment": self.D.ravel(),
            }
        )
        for k, name in enumerate(self.covariate_names):
            frame[name] = self.X[:, :, k].ravel()
        return frame

    def save_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def assemble_panel(units, times, Y, D, X, covariate_names=(), metadata=None) -> PanelData:
    """Build a PanelData, reordering rows controls-first (stable within group)."""
    D = np.asarray(D)
    ever = D.astype(bool).any(axis=1)
    order = [i for i, e in enumerate(ever) if not e] + [i for i, e in enumerate(ever) if e]
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X.reshape(len(units), len(times), 0)
    return PanelData(
        units=tuple(units[i] for i in order),
        times=tuple(times),
        Y=np.asarray(Y, float)[order],
        D=D[order],
        X=X[order],
        covariate_names=tuple(covariate_names),
        metadata=metadata or {},
    )


def subset_units(panel: PanelData, keep: Sequence[str]) -> PanelData:
    """Panel restricted to the named units (panel order preserved)."""
    keep_set = set(keep)
    unknown = keep_set - set(panel.units)
    if unknown:
        raise DataError(f"unknown units: {sorted(unknown)}")
    idx = [i for i, u in enumerate(panel.units) if u in keep_set]
    return assemble_panel(
        [panel.units[i] for i in idx], panel.times,
        panel.Y[idx], panel.D[idx], panel.X[idx],
        panel.covariate_names, dict(panel.metadata),
    )


def replace_treatment(panel: PanelData, D_new: np.ndarray) -> PanelData:
    """Panel with a new treatment matrix; rows reordered controls-first."""
    D_new = np.asarray(D_new)
    if D_new.shape != panel.D.shape:
        raise DataError(f"treatment shape {D_new.shape} does not match panel {panel.D.shape}")
    return assemble_panel(
        list(panel.units), panel.times, panel.Y, D_new, panel.X,
        panel.covariate_names, dict(panel.metadata),
    )


def truncate_periods(panel: PanelData, n_periods: int) -> PanelData:
    """Panel restricted to the first n_periods months."""
    if not 1 <= n_periods <= panel.n_periods:
        raise DataError(f"cannot truncate {panel.n_periods}-period panel to {n_periods}")
    return assemble_panel(
        list(panel.units), panel.times[:n_periods],
        panel.Y[:, :n_periods], panel.D[:, :n_periods], panel.X[:, :n_periods],
        panel.covariate_names, dict(panel.metadata),
    )


def load_panel(path, schema: Mapping[str, str] | None = None,
               covariates: Sequence[str] | None = None) -> PanelData:
    """Load a long-format CSV into a validated, balanced PanelData.

    `schema` maps the logical column names (unit, time, outcome, treatment)
    to the CSV's column names. `covariates` names covariate columns; when
    None, every remaining column is taken as a covariate.
    """
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(DEFAULT_SCHEMA)
        if unknown:
            raise DataError(f"unknown schema keys: {sorted(unknown)}")
        colmap.update(schema)
    df = pd.read_csv(path)
    missing = [c for c in colmap.values() if c not in df.columns]
    if missing:
        raise DataError(f"input file missing columns: {missing}")
    if covariates is None:
        covariates = [c for c in df.columns if c not in set(colmap.values())]
    else:
        absent = [c for c in covariates if c not in df.columns]
        if absent:
            raise DataError(f"covariate columns not in file: {absent}")
    covariates = list(covariates)

    df = df.rename(columns={v: k for k, v in colmap.items()})
    df["unit"] = df["unit"].astype(str)
    df["time"] = [
        _normalize_month(v, row=i + 2)  # +2: 1-based with header row
        for i, v in zip(df.index, df["time"])
    ]
    treat_vals = pd.unique(df["treatment"])
    try:
        numeric = set(pd.Series(treat_vals).astype(float))
    except (TypeError, ValueError):
        raise DataError(f"treatment column must be binary 0/1; found values {list(treat_vals)}") from None
    if not numeric <= {0.0, 1.0}:
        raise DataError(f"treatment column must be binary 0/1; found values {sorted(numeric)}")

    dup = df.duplicated(subset=["unit", "time"])
    if dup.any():
        r = df[dup].iloc[0]
        raise DataError(f"duplicate observation for unit {r['unit']}, time {r['time']}")

    times = sorted(df["time"].unique())
    units_seen = sorted(df["unit"].unique())
    counts = df.groupby("unit")["time"].count()
    if counts.nunique() > 1 or counts.iloc[0] != len(times):
        by_unit = df.groupby("unit")["time"].apply(set)
        full = set(times)
        for unit in units_seen:
            gap = sorted(full - by_unit[unit])
            if gap:
                raise DataError(f"unbalanced panel: unit {unit} missing time {gap[0]}")

    wide_y = df.pivot(index="unit", columns="time", values="outcome").loc[units_seen, times]
    wide_d = df.pivot(index="unit", columns="time", values="treatment").loc[units_seen, times]
    if wide_y.isna().any().any():
        i, t = np.argwhere(wide_y.isna().values)[0]
        raise DataError(f"unbalanced panel: unit {units_seen[i]} missing time {times[t]}")

    d_mat = wide_d.values.astype(np.int64)
    ever = d_mat.any(axis=1)
    order = [u for u, e in zip(units_seen, ever) if not e] + [u for u, e in zip(units_seen, ever) if e]
    wide_y = wide_y.loc[order]
    d_mat = wide_d.loc[order].values.astype(np.int64)

    x = np.empty((len(order), len(times), len(covariates)))
    for k, name in enumerate(covariates):
        wide_x = df.pivot(index="unit", columns="time", values=name).loc[order, times]
        if wide_x.isna().any().any():
            i, t = np.argwhere(wide_x.isna().values)[0]
            raise DataError(f"missing covariate {name} for unit {order[i]}, time {times[t]}")
        x[:, :, k] = wide_x.values

    return PanelData(
        units=tuple(order),
        times=tuple(times),
        Y=wide_y.values,
        D=d_mat,
        X=x,
        covariate_names=tuple(covariates),
    )


def compound_to_monthly(annual_rate):
    """Convert a percent-per-annum rate to the equivalent percent-per-month rate.

    100 * ((1 + r/100)^(1/12) - 1); accepts scalars or arrays.
    """
    rate = np.asarray(annual_rate, dtype=float)
    if np.any(rate <= -100.0):
        raise DataError("annual rate must exceed -100 percent")
    out = 100.0 * ((1.0 + rate / 100.0) ** (1.0 / 12.0) - 1.0)
    return float(out) if np.isscalar(annual_rate) else out


def _align_series(a, b, what: str) -> tuple[pd.Series, pd.Series]:
    sa = pd.Series(a, dtype=float) if not isinstance(a, pd.Series) else a.astype(float)
    sb = pd.Series(b, dtype=float) if not isinstance(b, pd.Series) else b.astype(float)
    if isinstance(a, pd.Series) or isinstance(b, pd.Series) or isinstance(a, Mapping) or isinstance(b, Mapping):
        missing_in_b = sorted(set(sa.index) - set(sb.index))
        missing_in_a = sorted(set(sb.index) - set(sa.index))
        if missing_in_a or missing_in_b:
            raise DataError(
                f"{what} series are misaligned; months missing from first: {missing_in_a}, "
                f"from second: {missing_in_b}"
            )
        sb = sb.loc[sa.index]
    elif len(sa) != len(sb):
        raise DataError(f"{what} series have different lengths ({len(sa)} vs {len(sb)})")
    return sa, sb


def compute_ird(base_rate, domestic_rate, sign: str = "base_minus_domestic"):
    """Interest rate differential between a base (reference) rate and a
    domestic rate, both in percent per month.

    The subtraction order is configurable; the convention used is recorded in
    the result's attrs so downstream outputs can report it.
    """
    if sign not in ("base_minus_domestic", "domestic_minus_base"):
        raise DataError(f"unknown sign convention {sign!r}")
    base, dom = _align_series(base_rate, domestic_rate, "interest rate")
    out = base - dom if sign == "base_minus_domestic" else dom - base
    out.attrs["sign_convention"] = sign
    return out


def compute_inflation_differential(domestic, reference):
    """Domestic minus reference inflation, aligned on the monthly calendar."""
    dom, ref = _align_series(domestic, reference, "inflation")
    out = dom - ref
    out.attrs["sign_convention"] = "domestic_minus_reference"
    return out
