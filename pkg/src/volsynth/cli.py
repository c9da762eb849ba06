"""Command-line driver: reproducible pipeline runs with file artifacts.

Every subcommand resolves its configuration from defaults, an optional flat
JSON config file, and command-line flags (flags win), then writes its
numeric artifacts plus a manifest (input hashes, seed, resolved config,
library versions) into the output directory. Re-running a subcommand with
the same resolved config reproduces the artifacts byte for byte.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .dataio import load_panel
from .diagnostics import (
    DEFAULT_MARGIN_FACTOR,
    equivalence_test,
    export_factors,
    in_space_placebo,
    in_time_placebo,
)
from .errors import ConfigError, DataError, NumericalError
from .factor import cross_validate
from .gsc import GscConfig, estimate_att, estimate_per_unit
from .simulate import simulate_panel
from .sv import (
    SvConfig,
    aggregate_monthly,
    estimate_sv,
    log_returns_from_prices,
    mean_correct,
)

OUT_ENV_VAR = "VOLSYNTH_OUT"


# ---------------------------------------------------------------------------
# plumbing

def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def write_json(path: Path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def write_csv(path: Path, frame: pd.DataFrame) -> None:
    _atomic_write(path, frame.to_csv(index=False))


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _versions() -> dict:
    import scipy

    return {
        "volsynth": __version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
    }


def write_manifest(out_dir: Path, command: str, config: dict, inputs: dict, artifacts: list[str]) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(Path(p).name): _sha256(p) for p in inputs.values()},
        "versions": _versions(),
        "artifacts": sorted(artifacts),
    }
    path = out_dir / f"{command.replace('-', '_')}_manifest.json"
    write_json(path, manifest)
    return path


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems should map to exit code 1
        raise ConfigError(message)


def _parse_schema(text: str | None) -> dict:
    if not text:
        return {}
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"schema entries must look like key=column, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a flat JSON object")
    return cfg


def _resolve(args, key: str, default=None):
    """flag > config-file entry > default"""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    file_cfg = getattr(args, "_file_config", {})
    if key in file_cfg:
        return file_cfg[key]
    return default


def _out_dir(args) -> Path:
    out = _resolve(args, "out") or os.environ.get(OUT_ENV_VAR) or "volsynth-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_input_panel(args):
    path = _resolve(args, "input")
    if not path:
        raise ConfigError("--input is required")
    schema = _parse_schema(_resolve(args, "schema"))
    cov = _resolve(args, "covariates")
    cov_list = [c.strip() for c in cov.split(",") if c.strip()] if cov else None
    return load_panel(path, schema=schema, covariates=cov_list), path


def _int_value(name, v):
    try:
        return int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {v!r}") from None


def _gsc_config(args, inference: bool = True) -> GscConfig:
    factors = _resolve(args, "factors", "auto")
    r = factors if factors == "auto" else _int_value("--factors", factors)
    return GscConfig(
        r=r,
        cv_max=_int_value("--cv-max", _resolve(args, "cv-max", 5)),
        bootstrap_reps=_int_value("--bootstrap-reps", _resolve(args, "bootstrap-reps", 1000)),
        seed=_opt_int(_resolve(args, "seed")),
        ci_scheme=_resolve(args, "ci-scheme", "percentile"),
        inference=inference,
    )


def _opt_int(v):
    return None if v is None else _int_value("seed", v)


def _config_dict(cfg: GscConfig, extra: dict | None = None) -> dict:
    out = {
        "r": cfg.r,
        "cv_max": cfg.cv_max,
        "bootstrap_reps": cfg.bootstrap_reps,
        "seed": cfg.seed,
        "ci_scheme": cfg.ci_scheme,
        "inference": cfg.inference,
    }
    if extra:
        out.update(extra)
    return out


# ---------------------------------------------------------------------------
# artifact writers shared by gsc-style commands

def _effects_frame(result) -> pd.DataFrame:
    rows = []
    for i, unit in enumerate(result.treated_units):
        t0 = int(result.pre_lengths[i])
        for t, label in enumerate(result.times):
            rows.append(
                {"unit": unit, "time": label, "event_time": t - t0,
                 "observed": result.counterfactuals[i, t] + result.individual_effects[i, t],
                 "counterfactual": result.counterfactuals[i, t],
                 "effect": result.individual_effects[i, t]}
            )
    return pd.DataFrame(rows)


def _counterfactual_path_frame(result) -> pd.DataFrame:
    eff = result.att_path.copy()
    treated_avg = np.full(len(eff), np.nan)
    delta = result.individual_effects
    cf = result.counterfactuals
    t_len = delta.shape[1]
    for g, e in enumerate(eff["event_time"]):
        vals, cvals = [], []
        for i in range(delta.shape[0]):
            t = int(result.pre_lengths[i]) + int(e)
            if 0 <= t < t_len:
                vals.append(cf[i, t] + delta[i, t])
                cvals.append(cf[i, t])
        if vals:
            treated_avg[g] = np.mean(vals)
    out = pd.DataFrame({
        "event_time": eff["event_time"],
        "treated_avg": treated_avg,
        "counterfactual_avg": treated_avg - eff["att"].to_numpy(),
        "counterfactual_lower": treated_avg - eff["ci_upper"].to_numpy(),
        "counterfactual_upper": treated_avg - eff["ci_lower"].to_numpy(),
    })
    return out


def _write_att_artifacts(out: Path, result, panel, prefix: str = "att") -> list[str]:
    artifacts = []

    def emit_csv(name, frame):
        write_csv(out / name, frame)
        artifacts.append(name)

    write_json(out / f"{prefix}.json", result.to_dict())
    artifacts.append(f"{prefix}.json")
    emit_csv(f"{prefix}_path.csv", result.att_path)
    emit_csv(f"{prefix}_individual_effects.csv", _effects_frame(result))
    emit_csv(f"{prefix}_counterfactual_path.csv", _counterfactual_path_frame(result))
    if result.beta_inference is not None:
        emit_csv(f"{prefix}_beta.csv", result.beta_inference)
    if result.cv_table is not None:
        emit_csv(f"{prefix}_cv_table.csv", result.cv_table.to_frame())
    if result.model.r:
        export = export_factors(
            result.model, result.projection,
            control_units=[u for u in panel.units if u not in result.treated_units],
            treated_units=result.treated_units, time_labels=result.times,
        )
        emit_csv(f"{prefix}_factors.csv", export.factors)
        emit_csv(f"{prefix}_loadings.csv", export.loadings)
    return artifacts


# ---------------------------------------------------------------------------
# subcommands

def _cmd_gsc(args) -> int:
    out = _out_dir(args)
    panel, input_path = _load_input_panel(args)
    cfg = _gsc_config(args)
    result = estimate_att(panel, cfg)
    artifacts = _write_att_artifacts(out, result, panel)
    write_manifest(out, "gsc", _config_dict(cfg, {"input": str(input_path)}),
                   {"input": input_path}, artifacts)
    print(f"gsc: avg_att={result.avg_att:.5f} se={result.se:.5f} "
          f"p={result.p_value:.5f} r={result.model.r} -> {out}")
    return 0


def _cmd_cv(args) -> int:
    out = _out_dir(args)
    panel, input_path = _load_input_panel(args)
    cv_max = _int_value("--cv-max", _resolve(args, "cv-max", 5))
    table = cross_validate(panel, range(0, cv_max + 1))
    write_csv(out / "cv_table.csv", table.to_frame())
    write_json(out / "cv.json", {
        "selected_r": table.selected_r,
        "rows": table.to_frame().replace({np.nan: None}).to_dict(orient="records"),
        "notices": list(table.notices),
    })
    write_manifest(out, "cv", {"cv_max": cv_max, "input": str(input_path)},
                   {"input": input_path}, ["cv_table.csv", "cv.json"])
    print(f"cv: selected r={table.selected_r} -> {out}")
    return 0


def _cmd_per_unit(args) -> int:
    out = _out_dir(args)
    panel, input_path = _load_input_panel(args)
    cfg = _gsc_config(args)
    units_arg = _resolve(args, "unit")
    units = ([u.strip() for u in units_arg.split(",") if u.strip()]
             if units_arg else list(panel.treated_units))
    artifacts = []
    summary = []
    for unit in units:
        result = estimate_per_unit(panel, unit, cfg)
        name = f"per_unit_{unit}.json"
        write_json(out / name, result.to_dict())
        artifacts.append(name)
        summary.append({
            "unit": unit, "avg_att": result.avg_att, "se": result.se,
            "ci_lower": result.ci_lower, "ci_upper": result.ci_upper,
            "p_value": result.p_value, "r": result.model.r,
            "mspe": (min(q.mspe for q in result.cv_table.rows)
                     if result.cv_table is not None else np.nan),
        })
        print(f"per-unit {unit}: avg_att={result.avg_att:.5f} p={result.p_value:.5f} r={result.model.r}")
    frame = pd.DataFrame(summary)
    write_csv(out / "per_unit_summary.csv", frame)
    artifacts.append("per_unit_summary.csv")
    write_manifest(out, "per-unit", _config_dict(cfg, {"input": str(input_path), "units": units}),
                   {"input": input_path}, artifacts)
    return 0


def _cmd_placebo_time(args) -> int:
    out = _out_dir(args)
    panel, input_path = _load_input_panel(args)
    cfg = _gsc_config(args)
    start = _resolve(args, "placebo-start")
    result = in_time_placebo(panel, start, cfg)
    artifacts = _write_att_artifacts(out, result, panel, prefix="placebo_time")
    write_manifest(out, "placebo-time",
                   _config_dict(cfg, {"input": str(input_path), "placebo_start": start}),
                   {"input": input_path}, artifacts)
    print(f"placebo-time: att={result.avg_att:.5f} p={result.p_value:.5f} -> {out}")
    return 0


def _cmd_placebo_space(args) -> int:
    out = _out_dir(args)
    panel, input_path = _load_input_panel(args)
    cfg = _gsc_config(args)
    true_att = _resolve(args, "true-att")
    if true_att is None:
        point = estimate_att(panel, GscConfig(r=cfg.r, cv_max=cfg.cv_max, inference=False))
        true_att = point.avg_att
    report = in_space_placebo(panel, float(true_att), config=cfg)
    write_csv(out / "placebo_space.csv", report.to_frame())
    write_json(out / "placebo_space.json", {
        "true_att": report.true_att,
        "empirical_p": report.empirical_p,
        "per_date_p": report.per_date_p,
        "mean_placebo_att": report.mean_placebo_att,
        "n_applicable": sum(1 for e in report.entries if e.applicable),
        "n_excluded": len(report.excluded),
    })
    write_manifest(out, "placebo-space",
                   _config_dict(cfg, {"input": str(input_path), "true_att": float(true_att)}),
                   {"input": input_path}, ["placebo_space.csv", "placebo_space.json"])
    print(f"placebo-space: empirical_p={report.empirical_p:.5f} -> {out}")
    return 0


def _cmd_equivalence(args) -> int:
    out = _out_dir(args)
    panel, input_path = _load_input_panel(args)
    cfg = _gsc_config(args)
    margin = _resolve(args, "margin")
    factor = float(_resolve(args, "margin-factor", DEFAULT_MARGIN_FACTOR))
    result = estimate_att(panel, cfg)
    eq = equivalence_test(result, margin=None if margin is None else float(margin),
                          margin_factor=factor)
    write_json(out / "equivalence.json", eq.to_dict())
    write_csv(out / "equivalence.csv", eq.table)
    write_manifest(out, "equivalence",
                   _config_dict(cfg, {"input": str(input_path), "margin": margin,
                                      "margin_factor": factor}),
                   {"input": input_path}, ["equivalence.json", "equivalence.csv"])
    print(f"equivalence: overall={'pass' if eq.overall else 'fail'} margin={eq.margin:.5f} -> {out}")
    return 0


def _cmd_sv_estimate(args) -> int:
    out = _out_dir(args)
    path = _resolve(args, "input")
    if not path:
        raise ConfigError("--input is required")
    df = pd.read_csv(path)
    if "log_return" in df.columns:
        dates = df["date"].astype(str).to_numpy()
        returns = df["log_return"].to_numpy(float)
    elif "price" in df.columns:
        dates = df["date"].astype(str).to_numpy()[1:]
        returns = log_returns_from_prices(df["price"].to_numpy(float))
    else:
        raise DataError("input must have columns date,log_return or date,price")
    demeaned = mean_correct(returns)
    cfg = SvConfig(
        iterations=_int_value("--iterations", _resolve(args, "iterations", 20_000)),
        burn_in=_int_value("--burn-in", _resolve(args, "burn-in", 1_000)),
        seed=_opt_int(_resolve(args, "seed")),
        n_particles=_int_value("--n-particles", _resolve(args, "n-particles", 10_000)),
        offset_scale=float(_resolve(args, "offset-scale", 1e-4)),
    )
    post = estimate_sv(demeaned, cfg)
    daily = pd.DataFrame({
        "date": dates,
        "h_filtered": post.h_filtered,
        "sigma": np.exp(post.h_filtered / 2.0),
        "h_smoothed": post.h_smoothed,
    })
    write_csv(out / "sv_daily.csv", daily)
    write_json(out / "sv_posterior.json", post.summary())
    cfg_dict = {"iterations": cfg.iterations, "burn_in": cfg.burn_in, "seed": cfg.seed,
                "n_particles": cfg.n_particles, "offset_scale": cfg.offset_scale,
                "input": str(path)}
    write_manifest(out, "sv-estimate", cfg_dict, {"input": path},
                   ["sv_daily.csv", "sv_posterior.json"])
    pm = post.posterior_mean
    print(f"sv-estimate: mu={pm.mu:.4f} phi={pm.phi:.4f} sigma_eta={pm.sigma_eta:.4f} -> {out}")
    return 0


def _cmd_sv_aggregate(args) -> int:
    out = _out_dir(args)
    path = _resolve(args, "input")
    if not path:
        raise ConfigError("--input is required")
    column = _resolve(args, "column", "h_filtered")
    df = pd.read_csv(path)
    if "date" not in df.columns or column not in df.columns:
        raise DataError(f"input must have columns date,{column}")
    monthly = aggregate_monthly(df["date"].tolist(), df[column].to_numpy(float))
    write_csv(out / "sv_monthly.csv", monthly.reset_index())
    write_manifest(out, "sv-aggregate", {"column": column, "input": str(path)},
                   {"input": path}, ["sv_monthly.csv"])
    print(f"sv-aggregate: {len(monthly)} months -> {out}")
    return 0


def _cmd_demo(args) -> int:
    out = _out_dir(args)
    preset = _resolve(args, "preset", "small")
    seed = _opt_int(_resolve(args, "seed")) or 0
    if preset == "paper-shaped":
        panel, truth = simulate_panel(seed=seed)
    elif preset == "small":
        panel, truth = simulate_panel(
            n_control=16, n_treated=2, n_periods=60, r=2,
            pre_lengths=(37, 45), delta=1.0, noise_sd=0.3, seed=seed,
        )
    else:
        raise ConfigError(f"unknown preset {preset!r}")
    panel.save_csv(out / "demo_panel.csv")
    write_json(out / "demo_truth.json", {
        "beta": truth["beta"], "delta": truth["delta"], "r": truth["r"],
        "noise_sd": truth["noise_sd"], "pre_lengths": truth["pre_lengths"],
        "seed": seed, "preset": preset,
    })
    write_manifest(out, "demo", {"preset": preset, "seed": seed}, {},
                   ["demo_panel.csv", "demo_truth.json"])
    print(f"demo: wrote {preset} panel ({panel.n_units} units x {panel.n_periods} months) -> {out}")
    return 0


def _fmt(x, nd=5):
    if x is None:
        return "NA"
    try:
        if isinstance(x, float) and np.isnan(x):
            return "NA"
        return f"{float(x):.{nd}f}"
    except (TypeError, ValueError):
        return str(x)


def _cmd_report(args) -> int:
    out = _out_dir(args)
    lines = ["# Pipeline report", ""]

    def section(title):
        lines.extend(["", f"## {title}", ""])

    cv_path = out / "att_cv_table.csv"
    if not cv_path.exists():
        cv_path = out / "cv_table.csv"
    section("Cross-validation of the factor count")
    if cv_path.exists():
        cv = pd.read_csv(cv_path)
        lines.append("| r | sigma2 | IC | PC | MSPE |")
        lines.append("|---|--------|----|----|------|")
        for _, row in cv.iterrows():
            star = "*" if row.get("selected", False) else ""
            lines.append(
                f"| {int(row['r'])}{star} | {_fmt(row['sigma2'])} | {_fmt(row['IC'])} "
                f"| {_fmt(row['PC'])} | {_fmt(row['MSPE'])} |"
            )
    else:
        lines.append("not available (run `cv` or `gsc --factors auto`)")

    section("Average treatment effect on the treated")
    att_path = out / "att.json"
    if att_path.exists():
        att = json.loads(att_path.read_text())
        lines.append("| Average ATT | Standard error | Lower CI | Upper CI | p-value |")
        lines.append("|-------------|----------------|----------|----------|---------|")
        ci = att.get("ci", [None, None])
        lines.append(
            f"| {_fmt(att['avg_att'])} | {_fmt(att['se'])} | {_fmt(ci[0])} "
            f"| {_fmt(ci[1])} | {_fmt(att['p_value'])} |"
        )
        beta = att.get("beta") or []
        if beta and "se" in beta[0]:
            section("Covariate coefficients")
            lines.append("| Covariate | Coefficient | Std. error | Lower CI | Upper CI | p-value |")
            lines.append("|-----------|-------------|-----------|----------|----------|---------|")
            for row in beta:
                lines.append(
                    f"| {row['name']} | {_fmt(row['coef'])} | {_fmt(row['se'])} | "
                    f"{_fmt(row['ci_lower'])} | {_fmt(row['ci_upper'])} | {_fmt(row['p_value'])} |"
                )
    else:
        lines.append("not available (run `gsc`)")

    section("Per-treated-unit runs")
    pu_path = out / "per_unit_summary.csv"
    if pu_path.exists():
        pu = pd.read_csv(pu_path)
        lines.append("| Unit | ATT | se | p-value | r |")
        lines.append("|------|-----|----|---------|---|")
        for _, row in pu.iterrows():
            lines.append(
                f"| {row['unit']} | {_fmt(row['avg_att'])} | {_fmt(row['se'])} "
                f"| {_fmt(row['p_value'])} | {int(row['r'])} |"
            )
    else:
        lines.append("not available (run `per-unit`)")

    section("In-time placebo")
    pt_path = out / "placebo_time.json"
    if pt_path.exists():
        pt = json.loads(pt_path.read_text())
        ci = pt.get("ci", [None, None])
        lines.append("| Placebo ATT | Standard error | Lower CI | Upper CI | p-value |")
        lines.append("|-------------|----------------|----------|----------|---------|")
        lines.append(
            f"| {_fmt(pt['avg_att'])} | {_fmt(pt['se'])} | {_fmt(ci[0])} "
            f"| {_fmt(ci[1])} | {_fmt(pt['p_value'])} |"
        )
    else:
        lines.append("not available (run `placebo-time`)")

    section("In-space placebo")
    ps_path = out / "placebo_space.json"
    if ps_path.exists():
        ps = json.loads(ps_path.read_text())
        lines.append(f"True ATT: {_fmt(ps['true_att'])}; "
                     f"mean placebo ATT: {_fmt(ps['mean_placebo_att'])}; "
                     f"empirical p-value: {_fmt(ps['empirical_p'])} "
                     f"({ps['n_applicable']} applicable runs, {ps['n_excluded']} excluded)")
        csv_path = out / "placebo_space.csv"
        if csv_path.exists():
            tab = pd.read_csv(csv_path)
            lines.append("")
            lines.append("| Unit | Adoption | Placebo ATT | indicator |")
            lines.append("|------|----------|-------------|-----------|")
            for _, row in tab.iterrows():
                ind = "NA" if pd.isna(row["indicator"]) else str(int(row["indicator"]))
                lines.append(f"| {row['unit']} | {row['adoption']} | {_fmt(row['placebo_att'])} | {ind} |")
    else:
        lines.append("not available (run `placebo-space`)")

    section("Equivalence test")
    eq_path = out / "equivalence.json"
    if eq_path.exists():
        eq = json.loads(eq_path.read_text())
        lines.append(f"Margin: {_fmt(eq['margin'])}; overall: "
                     f"{'pass' if eq['overall_pass'] else 'fail'}")
        lines.append(f"Verdict: {eq['verdict']}")
    else:
        lines.append("not available (run `equivalence`)")

    text = "\n".join(lines) + "\n"
    _atomic_write(out / "report.md", text)
    write_manifest(out, "report", {}, {}, ["report.md"])
    print(f"report -> {out / 'report.md'}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volsynth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV_VAR} or ./volsynth-out)")
        p.add_argument("--config", help="flat JSON config file; flags override")
        p.add_argument("--seed", type=int)

    def add_panel_flags(p):
        p.add_argument("--input", help="long-format panel CSV")
        p.add_argument("--schema", help="column mapping, e.g. unit=country,time=month")
        p.add_argument("--covariates", help="comma-separated covariate columns")

    def add_gsc_flags(p):
        p.add_argument("--factors", help="number of latent factors, or 'auto'")
        p.add_argument("--cv-max", type=int, help="largest factor count tried by cross-validation")
        p.add_argument("--bootstrap-reps", type=int, help="bootstrap replicates (>= 200)")
        p.add_argument("--ci-scheme", choices=["percentile", "normal"])

    p = sub.add_parser("gsc", help="estimate the ATT with bootstrap inference")
    add_common(p); add_panel_flags(p); add_gsc_flags(p)
    p.set_defaults(func=_cmd_gsc)

    p = sub.add_parser("cv", help="cross-validate the factor count")
    add_common(p); add_panel_flags(p)
    p.add_argument("--cv-max", type=int)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("per-unit", help="re-run the estimate for single treated units")
    add_common(p); add_panel_flags(p); add_gsc_flags(p)
    p.add_argument("--unit", help="treated unit name(s), comma separated; default all")
    p.set_defaults(func=_cmd_per_unit)

    p = sub.add_parser("placebo-time", help="backdated-adoption placebo run")
    add_common(p); add_panel_flags(p); add_gsc_flags(p)
    p.add_argument("--placebo-start", help="pretended adoption month (default: 12 before earliest)")
    p.set_defaults(func=_cmd_placebo_time)

    p = sub.add_parser("placebo-space", help="assign the policy to each control unit")
    add_common(p); add_panel_flags(p); add_gsc_flags(p)
    p.add_argument("--true-att", type=float, help="reference ATT (default: estimated from panel)")
    p.set_defaults(func=_cmd_placebo_space)

    p = sub.add_parser("equivalence", help="pre-treatment equivalence test")
    add_common(p); add_panel_flags(p); add_gsc_flags(p)
    p.add_argument("--margin", type=float, help="absolute equivalence margin")
    p.add_argument("--margin-factor", type=float,
                   help=f"margin as a multiple of pre-treatment gap std (default {DEFAULT_MARGIN_FACTOR})")
    p.set_defaults(func=_cmd_equivalence)

    p = sub.add_parser("sv-estimate", help="stochastic volatility estimation for daily returns")
    add_common(p)
    p.add_argument("--input", help="CSV with columns date,log_return or date,price")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--n-particles", type=int)
    p.add_argument("--offset-scale", type=float)
    p.set_defaults(func=_cmd_sv_estimate)

    p = sub.add_parser("sv-aggregate", help="aggregate daily volatility to monthly")
    add_common(p)
    p.add_argument("--input", help="CSV with columns date,h_filtered (from sv-estimate)")
    p.add_argument("--column", help="log-volatility column to aggregate (default h_filtered)")
    p.set_defaults(func=_cmd_sv_aggregate)

    p = sub.add_parser("demo", help="write a synthetic demo panel")
    add_common(p)
    p.add_argument("--preset", choices=["small", "paper-shaped"])
    p.set_defaults(func=_cmd_demo)

    p = sub.add_parser("report", help="collate prior artifacts into one summary document")
    add_common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args._file_config = _load_config_file(getattr(args, "config", None))
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
