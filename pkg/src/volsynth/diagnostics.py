"""Falsification and robustness checks for a fitted GSC analysis.

In-time placebo: pretend adoption happened earlier, on data truncated to
strictly before the earliest real adoption, and check that no effect is
found. In-space placebo: assign the policy to each control unit in turn
(real treated units removed) and compare the true ATT against the placebo
distribution. Equivalence test: check whether all pre-treatment ATT
confidence intervals fit inside an indifference margin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .dataio import PanelData, replace_treatment, subset_units, truncate_periods
from .errors import ConfigError, DataError, NumericalError
from .factor import FactorModel, TreatedProjection
from .gsc import AttResult, GscConfig, estimate_att

DEFAULT_PLACEBO_SHIFT = 12
DEFAULT_MARGIN_FACTOR = 0.36


@dataclass(frozen=True)
class PlaceboEntry:
    unit: str
    adoption: str
    placebo_att: float      # NaN when not applicable
    selected_r: int | None
    applicable: bool
    indicator: bool | None  # placebo_att >= true_att; None when not applicable
    note: str = ""


@dataclass(frozen=True)
class PlaceboReport:
    entries: tuple[PlaceboEntry, ...]
    true_att: float
    empirical_p: float            # NaN when no applicable entries
    per_date_p: dict
    mean_placebo_att: float

    @property
    def excluded(self) -> tuple[PlaceboEntry, ...]:
        return tuple(e for e in self.entries if not e.applicable)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {"unit": e.unit, "adoption": e.adoption,
                 "placebo_att": e.placebo_att, "selected_r": e.selected_r,
                 "indicator": (None if e.indicator is None else int(e.indicator)),
                 "note": e.note}
                for e in self.entries
            ]
        )


def compile_placebo_report(entries, true_att: float) -> PlaceboReport:
    """Empirical p-value bookkeeping: the share of applicable placebo runs
    whose ATT is at least the true ATT; excluded runs never enter the
    denominator. Pooled over all (unit, adoption) runs, with a per-date
    breakdown alongside."""
    entries = tuple(entries)
    applicable = [e for e in entries if e.applicable]
    hits = [e for e in applicable if e.indicator]
    empirical_p = len(hits) / len(applicable) if applicable else math.nan
    per_date: dict = {}
    for date in sorted({e.adoption for e in entries}):
        app = [e for e in applicable if e.adoption == date]
        per_date[date] = (sum(bool(e.indicator) for e in app) / len(app)) if app else math.nan
    mean_att = (
        float(np.mean([e.placebo_att for e in applicable])) if applicable else math.nan
    )
    return PlaceboReport(
        entries=entries,
        true_att=float(true_att),
        empirical_p=empirical_p,
        per_date_p=per_date,
        mean_placebo_att=mean_att,
    )


def in_time_placebo(panel: PanelData, placebo_start: str | int | None = None,
                    config: GscConfig | None = None) -> AttResult:
    """Backdated-adoption falsification run.

    The panel is truncated to periods strictly before the earliest real
    adoption, every treated unit is re-coded as adopting at `placebo_start`
    (default: 12 periods before the earliest real adoption), and the full
    pipeline is re-run on the truncated data.
    """
    if panel.n_treated == 0:
        raise ConfigError("in-time placebo needs treated units")
    earliest = int(panel.t0_array().min())
    if placebo_start is None:
        start_idx = earliest - DEFAULT_PLACEBO_SHIFT
    elif isinstance(placebo_start, (int, np.integer)):
        start_idx = int(placebo_start)
    else:
        start_idx = panel.time_index(placebo_start)
    if not 1 <= start_idx < earliest:
        raise ConfigError(
            f"placebo start index {start_idx} must lie in [1, {earliest - 1}], "
            "strictly before every true adoption"
        )
    truncated = truncate_periods(panel, earliest)
    D_new = np.zeros_like(truncated.D)
    for u in panel.treated_units:
        i = truncated.units.index(u)
        D_new[i, start_idx:] = 1
    pseudo = replace_treatment(truncated, D_new)
    return estimate_att(pseudo, config)


def in_space_placebo(panel: PanelData, true_att: float, adoption_dates=None,
                     config: GscConfig | None = None) -> PlaceboReport:
    """Assign the policy to each control unit in turn at each adoption date.

    The real treated units are removed from every placebo panel so the
    pseudo-treated unit is evaluated against a clean donor pool. Runs for
    which cross-validation selects r = 0 are recorded as not applicable and
    excluded from the empirical p-value. Inference is skipped inside each
    run: only the placebo point ATT is needed.
    """
    cfg = config or GscConfig()
    if adoption_dates is None:
        if panel.n_treated == 0:
            raise ConfigError("need adoption dates or treated units to derive them")
        adoption_dates = sorted({panel.times[t] for t in panel.t0_array()})
    controls = list(panel.control_units)
    if len(controls) < 3:
        raise ConfigError("in-space placebo needs at least 3 control units")
    base = subset_units(panel, controls)
    run_cfg = replace(cfg, inference=False, r="auto")

    entries: list[PlaceboEntry] = []
    for unit in controls:
        row = base.units.index(unit)
        for date in adoption_dates:
            t_idx = base.time_index(date)
            if not 1 <= t_idx < base.n_periods:
                raise ConfigError(f"adoption date {date} leaves no pre- or post-periods")
            D_new = np.zeros_like(base.D)
            D_new[row, t_idx:] = 1
            pseudo = replace_treatment(base, D_new)
            try:
                res = estimate_att(pseudo, run_cfg)
            except (ConfigError, NumericalError) as exc:
                entries.append(PlaceboEntry(unit=unit, adoption=date, placebo_att=math.nan,
                                            selected_r=None, applicable=False,
                                            indicator=None, note=f"run failed: {exc}"))
                continue
            r_sel = res.cv_table.selected_r if res.cv_table is not None else res.model.r
            if r_sel == 0:
                entries.append(PlaceboEntry(unit=unit, adoption=date, placebo_att=math.nan,
                                            selected_r=0, applicable=False,
                                            indicator=None, note="r=0 selected"))
            else:
                entries.append(PlaceboEntry(unit=unit, adoption=date,
                                            placebo_att=res.avg_att, selected_r=r_sel,
                                            applicable=True,
                                            indicator=bool(res.avg_att >= true_att)))
    return compile_placebo_report(entries, true_att)


@dataclass(frozen=True)
class EquivalenceResult:
    table: pd.DataFrame   # event_time, att, ci_lower, ci_upper, passed
    margin: float
    overall: bool
    verdict: str

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "overall_pass": self.overall,
            "verdict": self.verdict,
            "periods": self.table.replace({np.nan: None}).to_dict(orient="records"),
        }


def equivalence_test(att_result: AttResult, margin: float | None = None,
                     margin_factor: float = DEFAULT_MARGIN_FACTOR) -> EquivalenceResult:
    """Pre-treatment equivalence check.

    A pre-treatment period passes when its ATT confidence interval lies
    inside [-margin, +margin]. The default margin scales the std-dev of the
    treated units' pre-treatment outcomes residualized on covariates and
    additive effects only, so the benchmark keeps the systematic factor
    variation the counterfactual is supposed to track. The overall verdict
    distinguishes demonstrated equivalence from the inconclusive case where
    bands cross the margin.
    """
    path = att_result.att_path
    pre = path[path["event_time"] < 0].dropna(subset=["att"])
    if pre.empty:
        raise DataError("no pre-treatment ATT path available")
    if pre[["ci_lower", "ci_upper"]].isna().all().any():
        raise DataError("pre-treatment CIs missing: run bootstrap inference first")
    if margin is None:
        model, proj = att_result.model, att_result.projection
        cells = []
        for i in range(att_result.individual_effects.shape[0]):
            L = int(att_result.pre_lengths[i])
            resid = att_result.individual_effects[i, :L]
            if model.r:
                resid = resid + proj.Lambda[i] @ model.F[:L].T
            cells.append(resid)
        margin = margin_factor * float(np.std(np.concatenate(cells), ddof=1))
    if margin <= 0:
        raise ConfigError(f"equivalence margin must be positive, got {margin}")

    passed = (pre["ci_lower"] >= -margin) & (pre["ci_upper"] <= margin)
    table = pre[["event_time", "att", "ci_lower", "ci_upper"]].copy()
    table["passed"] = passed.values
    overall = bool(passed.all())
    verdict = (
        "equivalence shown: all pre-treatment effect bands lie inside the margin"
        if overall
        else "inconclusive: confidence bands cross the equivalence margin, so a "
             "non-zero effect can be neither shown nor ruled out"
    )
    return EquivalenceResult(table=table.reset_index(drop=True), margin=float(margin),
                             overall=overall, verdict=verdict)


@dataclass(frozen=True)
class FactorExport:
    factors: pd.DataFrame    # time x factor columns
    loadings: pd.DataFrame   # unit, status, loading columns, alpha
    fe_loading_corr: np.ndarray
    notice: str = ""


def export_factors(model: FactorModel, projection: TreatedProjection | None = None,
                   control_units=None, treated_units=None,
                   time_labels=None) -> FactorExport:
    """Latent factors, loadings with treated/control labels, and the
    correlation of each loading column with the unit fixed effects."""
    if model.r == 0:
        return FactorExport(
            factors=pd.DataFrame(), loadings=pd.DataFrame(),
            fe_loading_corr=np.zeros(0),
            notice="no latent factors to export (r=0)",
        )
    t_len = model.F.shape[0]
    times = list(time_labels) if time_labels is not None else list(range(t_len))
    fcols = {f"factor_{j + 1}": model.F[:, j] for j in range(model.r)}
    factors = pd.DataFrame({"time": times, **fcols})

    n_ctrl = model.Lambda.shape[0]
    ctrl_names = list(control_units) if control_units is not None else [f"control_{i}" for i in range(n_ctrl)]
    lam = model.Lambda
    alpha = model.alpha
    status = ["control"] * n_ctrl
    names = list(ctrl_names)
    if projection is not None and projection.Lambda.size:
        m = projection.Lambda.shape[0]
        tr_names = list(treated_units) if treated_units is not None else [f"treated_{i}" for i in range(m)]
        lam = np.vstack([lam, projection.Lambda])
        alpha = np.concatenate([alpha, projection.alpha])
        status += ["treated"] * m
        names += tr_names
    loadings = pd.DataFrame({"unit": names, "status": status, "alpha": alpha})
    for j in range(model.r):
        loadings[f"loading_{j + 1}"] = lam[:, j]

    corr = np.array([
        float(np.corrcoef(alpha, lam[:, j])[0, 1]) if np.std(lam[:, j]) > 0 and np.std(alpha) > 0 else math.nan
        for j in range(model.r)
    ])
    return FactorExport(factors=factors, loadings=loadings, fe_loading_corr=corr)
