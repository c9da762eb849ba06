"""Acceptance suite: one test per primary criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -s` to see the
lines as they complete; the full suite takes several minutes (dominated by
the 20 full-length MCMC runs).
"""
import json
import math
import time

import numpy as np
import pytest

from volsynth import (
    GscConfig,
    PlaceboEntry,
    SvConfig,
    SvParams,
    aggregate_monthly,
    compile_placebo_report,
    cross_validate,
    estimate_att,
    estimate_sv,
    fit_ife,
    fit_twoway,
    in_time_placebo,
    mean_correct,
    simulate_sv,
)
from volsynth.cli import main as cli_main
from volsynth.simulate import simulate_panel


def report(name: str, ok: bool, details: str) -> bool:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} - {details}")
    return ok


def test_sv_recovery():
    """90% credible intervals cover each true parameter in >= 80% of 20
    seeded runs at the full 20,000-iteration budget; one run under 2 min."""
    true = SvParams(mu=-1.0, phi=0.95, sigma_eta=0.2)
    n_runs = 20
    covered = {"mu": 0, "phi": 0, "sigma_eta": 0}
    single_run_time = None
    for s in range(n_runs):
        y, _ = simulate_sv(true, 3000, seed=s)
        t0 = time.time()
        post = estimate_sv(mean_correct(y),
                           SvConfig(iterations=20_000, burn_in=1_000, seed=1000 + s,
                                    run_filter=False))
        if s == 0:
            single_run_time = time.time() - t0
        for name, value in (("mu", true.mu), ("phi", true.phi), ("sigma_eta", true.sigma_eta)):
            lo, hi = post.credible_interval(name, 0.9)
            covered[name] += int(lo <= value <= hi)
    ok_cov = all(v >= 0.8 * n_runs for v in covered.values())
    ok_time = single_run_time <= 120.0
    ok = report(
        "sv-recovery", ok_cov and ok_time,
        f"coverage/{n_runs}: mu={covered['mu']} phi={covered['phi']} "
        f"sigma_eta={covered['sigma_eta']}; single run {single_run_time:.1f}s (limit 120s)",
    )
    assert ok


def test_twoway_oracle_equivalence():
    """fit_ife with r=0 matches a direct dummy-variable normal-equations
    solve on a 10 x 12 panel in beta and residuals to 1e-8."""
    rng = np.random.default_rng(42)
    n, t_len, p = 10, 12, 3
    Y = rng.normal(size=(n, t_len))
    X = rng.normal(size=(n, t_len, p))

    rows = []
    for i in range(n):
        for t in range(t_len):
            unit_d = np.zeros(n - 1)
            if i:
                unit_d[i - 1] = 1.0
            time_d = np.zeros(t_len - 1)
            if t:
                time_d[t - 1] = 1.0
            rows.append(np.concatenate([X[i, t], [1.0], unit_d, time_d]))
    design = np.asarray(rows)
    coef = np.linalg.solve(design.T @ design, design.T @ Y.ravel())
    resid_oracle = Y.ravel() - design @ coef

    model = fit_ife(Y, X, 0)
    beta_gap = float(np.abs(model.beta - coef[:p]).max())
    resid_gap = float(np.abs((Y - model.fitted(X)).ravel() - resid_oracle).max())
    twoway_gap = float(np.abs(model.beta - fit_twoway(Y, X).beta).max())
    ok = report(
        "twoway-oracle", beta_gap <= 1e-8 and resid_gap <= 1e-8 and twoway_gap == 0.0,
        f"max |beta gap| {beta_gap:.2e}, max |residual gap| {resid_gap:.2e} (limit 1e-8)",
    )
    assert ok


def test_ife_recovery():
    """N=30, T=160, true r=2 at 5:1 signal-to-noise: cross-validation picks
    r=2 in >= 80% of 20 seeds and beta is within 2 MC standard errors."""
    n_runs = 20
    beta_true = np.array([1.0, -0.5, 0.25])
    hits = 0
    betas = []
    for s in range(n_runs):
        panel, _ = simulate_panel(n_control=27, n_treated=3, n_periods=160, r=2,
                                  pre_lengths=(110, 65, 120), snr=5.0, delta=0.0,
                                  beta=beta_true, seed=300 + s)
        table = cross_validate(panel, range(0, 5))
        hits += int(table.selected_r == 2)
        ctrl = panel.control_idx
        betas.append(fit_ife(panel.Y[ctrl], panel.X[ctrl], table.selected_r).beta)
    betas = np.asarray(betas)
    mc_se = betas.std(axis=0, ddof=1) / math.sqrt(n_runs)
    beta_ok = bool(np.all(np.abs(betas.mean(axis=0) - beta_true) <= 2.0 * mc_se))
    ok = report(
        "ife-recovery", hits >= 0.8 * n_runs and beta_ok,
        f"selected r=2 in {hits}/{n_runs}; |mean beta - truth| = "
        f"{np.abs(betas.mean(0) - beta_true).round(5).tolist()} vs 2*MCSE = "
        f"{(2 * mc_se).round(5).tolist()}",
    )
    assert ok


def test_att_recovery_paper_shaped():
    """27 units x 166 months, 3 treated adopting after 121/70/126 periods,
    constant effect 1, noise 0.3: mean avg_att over 20 seeds within 0.1 of
    1; one full run with B=1000 bootstrap under 5 minutes."""
    n_runs = 20
    estimates = []
    for s in range(n_runs):
        panel, _ = simulate_panel(n_control=24, n_treated=3, n_periods=166, r=3,
                                  pre_lengths=(121, 70, 126), delta=1.0,
                                  noise_sd=0.3, seed=500 + s)
        res = estimate_att(panel, GscConfig(r="auto", cv_max=5, inference=False))
        estimates.append(res.avg_att)
    gap = abs(float(np.mean(estimates)) - 1.0)

    panel, _ = simulate_panel(n_control=24, n_treated=3, n_periods=166, r=3,
                              pre_lengths=(121, 70, 126), delta=1.0,
                              noise_sd=0.3, seed=500)
    t0 = time.time()
    full = estimate_att(panel, GscConfig(r="auto", cv_max=5, bootstrap_reps=1000, seed=1))
    elapsed = time.time() - t0
    ok = report(
        "att-recovery", gap <= 0.1 and elapsed <= 300.0,
        f"|mean avg_att - 1| = {gap:.4f} over {n_runs} seeds (limit 0.1); "
        f"B=1000 run took {elapsed:.1f}s (limit 300s), avg_att={full.avg_att:.4f}",
    )
    assert ok


def test_null_calibration():
    """On delta=0 noisy panels the bootstrap p-value is < 0.05 in at most
    10% of 50 runs, and the in-time placebo false-positive rate over 20
    seeds is likewise <= 10%."""
    rejections = 0
    n_null = 50
    for s in range(n_null):
        panel, _ = simulate_panel(n_control=24, n_treated=3, n_periods=80, r=1,
                                  pre_lengths=(50, 55, 60), delta=0.0, noise_sd=0.3,
                                  seed=2000 + s)
        res = estimate_att(panel, GscConfig(r=1, bootstrap_reps=300, seed=3000 + s))
        rejections += int(res.p_value < 0.05)

    placebo_rejections = 0
    n_placebo = 20
    for s in range(n_placebo):
        panel, _ = simulate_panel(n_control=24, n_treated=3, n_periods=80, r=1,
                                  pre_lengths=(50, 55, 60), delta=0.0, noise_sd=0.3,
                                  seed=4000 + s)
        res = in_time_placebo(panel, config=GscConfig(r=1, bootstrap_reps=300,
                                                      seed=5000 + s))
        placebo_rejections += int(res.p_value < 0.05)
    ok = report(
        "null-calibration",
        rejections <= 0.1 * n_null and placebo_rejections <= 0.1 * n_placebo,
        f"bootstrap rejections {rejections}/{n_null} (limit {int(0.1 * n_null)}); "
        f"in-time placebo rejections {placebo_rejections}/{n_placebo} "
        f"(limit {int(0.1 * n_placebo)})",
    )
    assert ok


def test_exact_identities():
    """Noiseless null panel: avg_att = 0 to 1e-8 and counterfactual equals
    the observed path; constant daily volatility aggregates to itself;
    factor normalization holds to 1e-8 on every fit."""
    panel, _ = simulate_panel(n_control=16, n_treated=3, n_periods=60, r=2,
                              pre_lengths=(35, 40, 45), delta=0.0, noise_sd=0.0,
                              seed=7)
    res = estimate_att(panel, GscConfig(r=2, inference=False, tol=1e-13))
    att_zero = abs(res.avg_att)
    cf_gap = float(np.abs(res.counterfactuals - panel.Y[panel.treated_idx]).max())

    sigma = 1.37
    dates = [f"2020-03-{d:02d}" for d in range(1, 23)]
    vol = aggregate_monthly(dates, np.full(len(dates), 2.0 * np.log(sigma)))
    agg_gap = abs(float(vol.loc["2020-03"]) - sigma)

    norm_gap = 0.0
    for r, seed in ((1, 0), (2, 1), (3, 2)):
        p, _ = simulate_panel(n_control=14, n_treated=1, n_periods=36, r=max(r, 1),
                              pre_lengths=(24,), noise_sd=0.4, seed=seed)
        m = fit_ife(p.Y[p.control_idx], p.X[p.control_idx], r)
        t_len = p.n_periods
        norm_gap = max(norm_gap, float(np.abs(m.F.T @ m.F / t_len - np.eye(r)).max()))
        gram = m.Lambda.T @ m.Lambda
        norm_gap = max(norm_gap, float(np.abs(gram - np.diag(np.diag(gram))).max()))
    ok = report(
        "exact-identities",
        att_zero <= 1e-8 and cf_gap <= 1e-6 and agg_gap == 0.0 and norm_gap <= 1e-8,
        f"|avg_att| = {att_zero:.2e} (limit 1e-8); max counterfactual gap "
        f"{cf_gap:.2e}; aggregation gap {agg_gap:.1e}; worst normalization "
        f"deviation {norm_gap:.2e} (limit 1e-8)",
    )
    assert ok


def test_placebo_bookkeeping():
    """16 hits out of 17 applicable placebo runs give an empirical p-value
    of 16/17 = 0.94118; excluded runs stay out of the denominator."""
    true_att = 0.05
    entries = []
    for i in range(17):
        att = 0.1 + i * 0.05 if i < 16 else -2.0
        entries.append(PlaceboEntry(unit=f"ctl{i:02d}", adoption="2018-04",
                                    placebo_att=att, selected_r=2, applicable=True,
                                    indicator=att >= true_att))
    for i in (17, 18, 19):
        entries.append(PlaceboEntry(unit=f"ctl{i:02d}", adoption="2018-04",
                                    placebo_att=math.nan, selected_r=0,
                                    applicable=False, indicator=None, note="r=0 selected"))
    rep = compile_placebo_report(entries, true_att)
    ok = report(
        "placebo-bookkeeping",
        rep.empirical_p == 16 / 17 and round(rep.empirical_p, 5) == 0.94118
        and len(rep.excluded) == 3,
        f"empirical_p = {rep.empirical_p:.5f} (expected 0.94118 = 16/17), "
        f"{len(rep.excluded)} excluded runs kept out of the denominator",
    )
    assert ok


def test_manifest_rerun_determinism(tmp_path):
    """Re-running a subcommand from the config stored in its manifest
    reproduces every numeric artifact byte for byte."""
    demo = tmp_path / "demo"
    assert cli_main(["demo", "--preset", "small", "--seed", "3", "--out", str(demo)]) == 0
    panel_csv = demo / "demo_panel.csv"

    first = tmp_path / "first"
    assert cli_main(["gsc", "--input", str(panel_csv), "--factors", "auto",
                     "--cv-max", "3", "--bootstrap-reps", "200", "--seed", "11",
                     "--out", str(first)]) == 0
    manifest = json.loads((first / "gsc_manifest.json").read_text())
    cfg = manifest["config"]

    second = tmp_path / "second"
    argv = ["gsc", "--input", cfg["input"], "--factors", str(cfg["r"]),
            "--cv-max", str(cfg["cv_max"]), "--bootstrap-reps", str(cfg["bootstrap_reps"]),
            "--seed", str(cfg["seed"]), "--ci-scheme", cfg["ci_scheme"],
            "--out", str(second)]
    assert cli_main(argv) == 0

    mismatched = []
    for name in manifest["artifacts"]:
        if (first / name).read_bytes() != (second / name).read_bytes():
            mismatched.append(name)
    ok = report(
        "determinism",
        not mismatched,
        f"{len(manifest['artifacts'])} artifacts re-run from manifest config; "
        f"mismatched: {mismatched or 'none'}",
    )
    assert ok
