"""Generalized synthetic control: counterfactuals, ATT, and bootstrap inference.

The factor model is fitted on control units only; treated units' intercepts
and loadings are projected from their pre-treatment periods, which yields
the counterfactual path

    Yhat_it(0) = X_it' beta + lambda_i' f_t + alpha_i + xi_t

for every treated unit and period. Treatment effects are the gaps
delta_it = Y_it - Yhat_it(0); the ATT path averages them on event time
(periods relative to each unit's adoption). Inference is a parametric
bootstrap that resamples whole control-unit residual series onto the fitted
systematic components and re-runs the estimation per replicate (Xu 2017).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import stats

from .dataio import PanelData, subset_units
from .errors import ConfigError, ConvergenceError, DataError, NumericalError
from .factor import (
    CvTable,
    FactorModel,
    TreatedProjection,
    _xbeta,
    cross_validate,
    fit_ife,
    project_treated,
)


@dataclass(frozen=True)
class GscConfig:
    """Estimation and inference settings for one GSC run."""

    r: int | str = "auto"        # fixed factor count, or "auto" for cross-validation
    cv_max: int = 5
    bootstrap_reps: int = 1000
    seed: int | None = None
    ci_scheme: str = "percentile"  # percentile | normal
    ci_level: float = 0.95
    inference: bool = True
    tol: float = 1e-7
    max_iter: int = 2000

    def __post_init__(self):
        if isinstance(self.r, str) and self.r != "auto":
            raise ConfigError(f"r must be an integer or 'auto', got {self.r!r}")
        if self.ci_scheme not in ("percentile", "normal"):
            raise ConfigError(f"unknown ci scheme {self.ci_scheme!r}")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError(f"ci_level must be in (0, 1), got {self.ci_level}")


@dataclass(frozen=True)
class AttResult:
    """ATT path, average effect, bootstrap inference, and counterfactuals."""

    att_path: pd.DataFrame          # event_time, att, n_units, ci_lower, ci_upper
    individual_effects: np.ndarray  # (N_treat, T) observed minus counterfactual
    counterfactuals: np.ndarray     # (N_treat, T)
    avg_att: float
    se: float
    ci_lower: float
    ci_upper: float
    p_value: float
    model: FactorModel
    projection: TreatedProjection
    treated_units: tuple[str, ...]
    pre_lengths: np.ndarray
    times: tuple[str, ...] = ()
    cv_table: CvTable | None = None
    beta_inference: pd.DataFrame | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        att = self.att_path.replace({np.nan: None})
        return {
            "avg_att": self.avg_att,
            "se": self.se,
            "ci": [self.ci_lower, self.ci_upper],
            "p_value": self.p_value,
            "att_path": att.to_dict(orient="records"),
            "individual_effects": self.individual_effects.tolist(),
            "counterfactuals": self.counterfactuals.tolist(),
            "treated_units": list(self.treated_units),
            "pre_lengths": self.pre_lengths.tolist(),
            "r": self.model.r,
            "beta": (
                self.beta_inference.replace({np.nan: None}).to_dict(orient="records")
                if self.beta_inference is not None
                else [{"name": n, "coef": float(b)} for n, b in
                      zip(self.model.info.get("covariate_names", []), self.model.beta)]
            ),
            "cv_table": (
                self.cv_table.to_frame().replace({np.nan: None}).to_dict(orient="records")
                if self.cv_table is not None
                else None
            ),
            "details": {k: v for k, v in self.details.items() if not isinstance(v, np.ndarray)},
        }


def estimate_counterfactual(panel: PanelData, model: FactorModel,
                            projection: TreatedProjection) -> np.ndarray:
    """Counterfactual untreated outcomes for every treated unit and period."""
    treat = panel.treated_idx
    if projection.Lambda.shape != (treat.size, model.r):
        raise ConfigError(
            f"loadings shape {projection.Lambda.shape} does not match "
            f"{treat.size} treated units x r={model.r}"
        )
    X_t = panel.X[treat]
    out = _xbeta(X_t, model.beta) + projection.alpha[:, None] + model.xi[None, :]
    if model.r:
        out = out + projection.Lambda @ model.F.T
    return out


def _event_grid(pre_lengths: np.ndarray, t_len: int) -> np.ndarray:
    lo = int(-(pre_lengths.max()))
    hi = int((t_len - 1) - pre_lengths.min())
    return np.arange(lo, hi + 1)


def _att_on_grid(delta: np.ndarray, pre_lengths: np.ndarray, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average effects by event time; entries with no unit stay NaN."""
    m, t_len = delta.shape
    att = np.full(grid.size, np.nan)
    n_units = np.zeros(grid.size, dtype=int)
    for g, e in enumerate(grid):
        vals = []
        for i in range(m):
            t = int(pre_lengths[i]) + int(e)
            if 0 <= t < t_len:
                vals.append(delta[i, t])
        if vals:
            att[g] = float(np.mean(vals))
            n_units[g] = len(vals)
    return att, n_units


def _fit_pipeline(panel: PanelData, r: int, init: FactorModel | None = None,
                  tol: float = 1e-7, max_iter: int = 2000):
    ctrl = panel.control_idx
    treat = panel.treated_idx
    model = fit_ife(panel.Y[ctrl], panel.X[ctrl], r, init=init, tol=tol,
                    max_iter=max_iter, covariate_names=panel.covariate_names)
    projection = project_treated(
        model, panel.Y[treat], panel.X[treat], panel.t0_array()
    )
    counterfactual = estimate_counterfactual(panel, model, projection)
    delta = panel.Y[treat] - counterfactual
    return model, projection, counterfactual, delta


def _avg_att(delta: np.ndarray, pre_lengths: np.ndarray) -> float:
    post = [delta[i, int(pre_lengths[i]):] for i in range(delta.shape[0])]
    return float(np.mean(np.concatenate(post)))


def estimate_att(panel: PanelData, config: GscConfig | None = None) -> AttResult:
    """Full GSC pipeline: factor-count selection, control fit, loading
    projection, counterfactuals, event-time ATT, and bootstrap inference."""
    cfg = config or GscConfig()
    if panel.n_treated == 0:
        raise ConfigError("ATT is undefined: panel has no treated units")

    cv_table = None
    if cfg.r == "auto":
        cv_table = cross_validate(panel, range(0, cfg.cv_max + 1))
        r = cv_table.selected_r
    else:
        r = int(cfg.r)

    model, projection, counterfactual, delta = _fit_pipeline(panel, r, tol=cfg.tol,
                                                             max_iter=cfg.max_iter)
    pre_lengths = panel.t0_array()
    grid = _event_grid(pre_lengths, panel.n_periods)
    att, n_units = _att_on_grid(delta, pre_lengths, grid)
    avg_att = _avg_att(delta, pre_lengths)

    att_path = pd.DataFrame(
        {"event_time": grid, "att": att, "n_units": n_units,
         "ci_lower": np.nan, "ci_upper": np.nan}
    )
    result = AttResult(
        att_path=att_path,
        individual_effects=delta,
        counterfactuals=counterfactual,
        avg_att=avg_att,
        se=np.nan,
        ci_lower=np.nan,
        ci_upper=np.nan,
        p_value=np.nan,
        model=model,
        projection=projection,
        treated_units=panel.treated_units,
        pre_lengths=pre_lengths,
        times=panel.times,
        cv_table=cv_table,
        details={"r": r, "seed": cfg.seed, "n_control": panel.n_control,
                 "tol": cfg.tol, "max_iter": cfg.max_iter},
    )
    if cfg.inference:
        result = bootstrap_inference(panel, result, B=cfg.bootstrap_reps,
                                     seed=cfg.seed, ci_scheme=cfg.ci_scheme,
                                     ci_level=cfg.ci_level)
    return result


def _percentile_ci(draws: np.ndarray, level: float) -> tuple[float, float]:
    a = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(draws, [a, 100.0 - a])
    return float(lo), float(hi)


def _two_sided_p(draws: np.ndarray) -> float:
    share_le = np.mean(draws <= 0.0)
    share_ge = np.mean(draws >= 0.0)
    return float(np.clip(2.0 * min(share_le, share_ge), 0.0, 1.0))


def bootstrap_inference(panel: PanelData, fitted: AttResult, B: int = 1000,
                        seed=None, ci_scheme: str = "percentile",
                        ci_level: float = 0.95) -> AttResult:
    """Parametric bootstrap for the fitted pipeline.

    Control-unit residual series are resampled (as whole length-T vectors,
    preserving serial structure) onto every unit's fitted systematic
    component; treated units keep their estimated effect path. Each
    replicate re-runs the estimation at the fitted factor count. Replicates
    that fail to converge are dropped and counted; more than 10% dropped is
    an error. Deterministic for a fixed seed regardless of execution order:
    each replicate consumes an independent spawned RNG stream.
    """
    if B < 200:
        raise ConfigError(f"bootstrap replicates must be >= 200, got {B}")
    ctrl = panel.control_idx
    treat = panel.treated_idx
    model, projection = fitted.model, fitted.projection
    pre_lengths = fitted.pre_lengths
    grid = fitted.att_path["event_time"].to_numpy()

    tol = fitted.details.get("tol", 1e-7)
    max_iter = fitted.details.get("max_iter", 2000)
    systematic_ctrl = model.fitted(panel.X[ctrl])
    resid_pool = panel.Y[ctrl] - systematic_ctrl
    # fitted residuals understate the error variance by the degrees of
    # freedom the fit consumed; rescale so resampled noise has the right size
    n_c, t_len = resid_pool.shape
    p_act = int(model.info.get("p_active", model.beta.size))
    df_resid = n_c * t_len - p_act - model.r * (n_c + t_len) + model.r**2 - (n_c + t_len - 1)
    resid_pool = resid_pool * np.sqrt(n_c * t_len / max(df_resid, 1))
    systematic_treat = fitted.counterfactuals + fitted.individual_effects * panel.D[treat]

    n_ctrl, n_treat = ctrl.size, treat.size
    streams = np.random.SeedSequence(seed).spawn(B)
    avg_draws = np.empty(B)
    path_draws = np.full((B, grid.size), np.nan)
    beta_draws = np.empty((B, model.beta.size))
    kept = 0
    dropped = 0
    for b in range(B):
        rng = np.random.default_rng(streams[b])
        pick = rng.integers(0, n_ctrl, size=n_ctrl + n_treat)
        Y_b = panel.Y.copy()
        Y_b[ctrl] = systematic_ctrl + resid_pool[pick[:n_ctrl]]
        Y_b[treat] = systematic_treat + resid_pool[pick[n_ctrl:]]
        panel_b = replace(panel, Y=Y_b)
        try:
            model_b, _, _, delta_b = _fit_pipeline(panel_b, model.r, init=model,
                                                   tol=tol, max_iter=max_iter)
        except (ConvergenceError, NumericalError):
            dropped += 1
            continue
        avg_draws[kept] = _avg_att(delta_b, pre_lengths)
        path_draws[kept], _ = _att_on_grid(delta_b, pre_lengths, grid)
        beta_draws[kept] = model_b.beta
        kept += 1

    if dropped > 0.1 * B:
        raise NumericalError(
            f"bootstrap unreliable: {dropped} of {B} replicates failed to converge"
        )
    avg_draws = avg_draws[:kept]
    path_draws = path_draws[:kept]
    beta_draws = beta_draws[:kept]

    se = float(np.std(avg_draws, ddof=1))
    if ci_scheme == "percentile":
        ci_lo, ci_hi = _percentile_ci(avg_draws, ci_level)
    else:
        z = stats.norm.ppf(0.5 + ci_level / 2.0)
        ci_lo, ci_hi = fitted.avg_att - z * se, fitted.avg_att + z * se
    p_value = _two_sided_p(avg_draws)

    att_path = fitted.att_path.copy()
    a = 100.0 * (1.0 - ci_level) / 2.0
    defined = ~np.isnan(path_draws).all(axis=0)
    lo = np.full(grid.size, np.nan)
    hi = np.full(grid.size, np.nan)
    lo[defined] = np.nanpercentile(path_draws[:, defined], a, axis=0)
    hi[defined] = np.nanpercentile(path_draws[:, defined], 100.0 - a, axis=0)
    att_path["ci_lower"] = lo
    att_path["ci_upper"] = hi

    names = model.info.get("covariate_names", [f"x{k}" for k in range(model.beta.size)])
    beta_rows = []
    for k, name in enumerate(names):
        bd = beta_draws[:, k]
        b_se = float(np.std(bd, ddof=1))
        if ci_scheme == "percentile":
            b_lo, b_hi = _percentile_ci(bd, ci_level)
        else:
            z = stats.norm.ppf(0.5 + ci_level / 2.0)
            b_lo, b_hi = model.beta[k] - z * b_se, model.beta[k] + z * b_se
        beta_rows.append(
            {"name": name, "coef": float(model.beta[k]), "se": b_se,
             "ci_lower": b_lo, "ci_upper": b_hi, "p_value": _two_sided_p(bd)}
        )
    beta_inf = pd.DataFrame(beta_rows) if beta_rows else None

    details = dict(fitted.details)
    details.update(
        {"bootstrap_reps": B, "bootstrap_kept": kept, "bootstrap_dropped": dropped,
         "ci_scheme": ci_scheme, "ci_level": ci_level}
    )
    return replace(
        fitted,
        att_path=att_path,
        se=se,
        ci_lower=ci_lo,
        ci_upper=ci_hi,
        p_value=p_value,
        beta_inference=beta_inf,
        details=details,
    )


def estimate_per_unit(panel: PanelData, unit: str, config: GscConfig | None = None) -> AttResult:
    """Re-run the pipeline with the treated set restricted to one unit,
    keeping the full control pool (other treated units are dropped)."""
    if unit not in panel.units:
        raise DataError(f"unknown unit {unit!r}")
    if unit not in panel.treated_units:
        raise DataError(f"unit {unit!r} is not treated")
    keep = list(panel.control_units) + [unit]
    return estimate_att(subset_units(panel, keep), config)
