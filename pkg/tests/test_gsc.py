import json

import numpy as np
import pytest

from volsynth import (
    ConfigError,
    DataError,
    GscConfig,
    estimate_att,
    estimate_counterfactual,
    estimate_per_unit,
    project_treated,
)
from volsynth.factor import TreatedProjection, fit_ife
from volsynth.simulate import simulate_panel

EXACT = GscConfig(r=2, inference=False, tol=1e-13)


def noiseless_null_panel(seed=0, n_control=14, n_treated=2, n_periods=30,
                         pre_lengths=(18, 22), r=2):
    panel, truth = simulate_panel(n_control=n_control, n_treated=n_treated,
                                  n_periods=n_periods, r=r, pre_lengths=pre_lengths,
                                  noise_sd=0.0, delta=0.0, seed=seed)
    return panel, truth


class TestCounterfactual:
    def test_null_reconstruction(self):
        panel, _ = noiseless_null_panel()
        res = estimate_att(panel, EXACT)
        np.testing.assert_allclose(res.counterfactuals, panel.Y[panel.treated_idx], atol=1e-8)

    def test_constant_effect_separates_pre_and_post(self):
        panel, _ = simulate_panel(n_control=14, n_treated=2, n_periods=30, r=2,
                                  pre_lengths=(18, 22), noise_sd=0.0, delta=1.0, seed=1)
        res = estimate_att(panel, EXACT)
        delta = res.individual_effects
        for i, t0 in enumerate(res.pre_lengths):
            np.testing.assert_allclose(delta[i, :t0], 0.0, atol=1e-7)
            np.testing.assert_allclose(delta[i, t0:], 1.0, atol=1e-7)

    def test_loading_shape_mismatch(self):
        panel, _ = noiseless_null_panel()
        ctrl = panel.control_idx
        model = fit_ife(panel.Y[ctrl], panel.X[ctrl], 2)
        bad = TreatedProjection(alpha=np.zeros(2), Lambda=np.zeros((2, 3)))
        with pytest.raises(ConfigError, match="loadings shape"):
            estimate_counterfactual(panel, model, bad)


class TestEstimateAtt:
    def test_null_avg_att_is_zero(self):
        panel, _ = noiseless_null_panel()
        res = estimate_att(panel, EXACT)
        assert abs(res.avg_att) <= 1e-8

    def test_pre_treatment_att_path_is_zero_on_null(self):
        panel, _ = noiseless_null_panel()
        res = estimate_att(panel, EXACT)
        pre = res.att_path[res.att_path["event_time"] < 0]["att"].dropna()
        np.testing.assert_allclose(pre, 0.0, atol=1e-8)

    def test_recovers_constant_effect_with_noise(self):
        estimates = []
        for s in range(5):
            panel, _ = simulate_panel(n_control=20, n_treated=3, n_periods=60, r=2,
                                      pre_lengths=(35, 40, 45), delta=1.0,
                                      noise_sd=0.3, seed=50 + s)
            res = estimate_att(panel, GscConfig(r=2, inference=False))
            estimates.append(res.avg_att)
        assert abs(np.mean(estimates) - 1.0) <= 0.1

    def test_avg_att_equals_mean_of_post_cells(self):
        panel, _ = simulate_panel(n_control=12, n_treated=2, n_periods=24, r=1,
                                  pre_lengths=(14, 18), delta=0.7, noise_sd=0.4, seed=2)
        res = estimate_att(panel, GscConfig(r=1, inference=False))
        cells = np.concatenate([
            res.individual_effects[i, int(t0):] for i, t0 in enumerate(res.pre_lengths)
        ])
        assert res.avg_att == np.mean(cells)

    def test_event_time_alignment_counts(self):
        panel, _ = simulate_panel(n_control=10, n_treated=2, n_periods=20, r=0,
                                  pre_lengths=(8, 14), x_factor_mix=0.0, seed=3)
        res = estimate_att(panel, GscConfig(r=0, inference=False))
        path = res.att_path.set_index("event_time")
        assert path.index.min() == -14 and path.index.max() == 11
        # both units observed only where their windows overlap
        assert path.loc[0, "n_units"] == 2
        assert path.loc[-14, "n_units"] == 1
        assert path.loc[11, "n_units"] == 1

    def test_additive_shift_equivariance(self):
        panel, _ = simulate_panel(n_control=12, n_treated=2, n_periods=24, r=1,
                                  pre_lengths=(14, 18), delta=0.5, noise_sd=0.3, seed=4)
        res = estimate_att(panel, GscConfig(r=1, inference=False))
        shifted_Y = panel.Y.copy()
        shifted_Y[panel.treated_idx] += 2.5 * panel.D[panel.treated_idx]
        from dataclasses import replace
        shifted = replace(panel, Y=shifted_Y)
        res2 = estimate_att(shifted, GscConfig(r=1, inference=False))
        assert res2.avg_att == pytest.approx(res.avg_att + 2.5, abs=1e-8)

    def test_control_permutation_invariance(self):
        panel, _ = simulate_panel(n_control=10, n_treated=2, n_periods=24, r=2,
                                  pre_lengths=(14, 18), delta=0.5, noise_sd=0.3, seed=5)
        res = estimate_att(panel, GscConfig(r=2, inference=False))
        rng = np.random.default_rng(6)
        perm = rng.permutation(panel.n_control)
        order = list(perm) + list(range(panel.n_control, panel.n_units))
        from volsynth.dataio import assemble_panel
        shuffled = assemble_panel([panel.units[i] for i in order], panel.times,
                                  panel.Y[order], panel.D[order], panel.X[order],
                                  panel.covariate_names)
        res2 = estimate_att(shuffled, GscConfig(r=2, inference=False))
        assert res2.avg_att == pytest.approx(res.avg_att, abs=1e-8)

    def test_no_treated_units(self):
        panel, _ = simulate_panel(n_control=8, n_treated=1, n_periods=12, r=0,
                                  pre_lengths=(6,), x_factor_mix=0.0, seed=7)
        from volsynth.dataio import subset_units
        controls_only = subset_units(panel, panel.control_units)
        with pytest.raises(ConfigError):
            estimate_att(controls_only, GscConfig(r=0, inference=False))

    def test_result_is_json_serializable(self):
        panel, _ = simulate_panel(n_control=10, n_treated=1, n_periods=20, r=1,
                                  pre_lengths=(12,), seed=8)
        res = estimate_att(panel, GscConfig(r=1, bootstrap_reps=200, seed=0))
        blob = json.dumps(res.to_dict())
        parsed = json.loads(blob)
        assert parsed["avg_att"] == res.avg_att


class TestBootstrap:
    def test_degenerate_residuals_give_zero_se(self):
        panel, _ = noiseless_null_panel()
        res = estimate_att(panel, GscConfig(r=2, bootstrap_reps=200, seed=1, tol=1e-13))
        assert res.se <= 1e-6
        assert abs(res.ci_lower) <= 1e-6 and abs(res.ci_upper) <= 1e-6

    def test_replicate_floor(self):
        panel, _ = noiseless_null_panel()
        with pytest.raises(ConfigError):
            estimate_att(panel, GscConfig(r=2, bootstrap_reps=100, seed=1))

    def test_seed_determinism(self):
        panel, _ = simulate_panel(n_control=10, n_treated=2, n_periods=20, r=1,
                                  pre_lengths=(12, 14), noise_sd=0.3, seed=9)
        cfg = GscConfig(r=1, bootstrap_reps=200, seed=42)
        a = estimate_att(panel, cfg)
        b = estimate_att(panel, cfg)
        assert (a.se, a.ci_lower, a.ci_upper, a.p_value) == (b.se, b.ci_lower, b.ci_upper, b.p_value)
        assert a.att_path.equals(b.att_path)

    def test_ci_covers_true_effect(self):
        # coverage oracle: 95% interval should cover delta=1 in >= 88% of 50 runs
        hits = 0
        for s in range(50):
            panel, _ = simulate_panel(n_control=10, n_treated=2, n_periods=30, r=0,
                                      pre_lengths=(18, 22), delta=1.0, noise_sd=0.3,
                                      x_factor_mix=0.0, seed=1000 + s)
            res = estimate_att(panel, GscConfig(r=0, bootstrap_reps=200, seed=2000 + s))
            hits += int(res.ci_lower <= 1.0 <= res.ci_upper)
        assert hits >= 44

    def test_interval_and_pvalue_invariants(self):
        for s in range(4):
            panel, _ = simulate_panel(n_control=10, n_treated=2, n_periods=24, r=1,
                                      pre_lengths=(14, 16), noise_sd=0.4, seed=20 + s)
            res = estimate_att(panel, GscConfig(r=1, bootstrap_reps=200, seed=30 + s))
            assert res.ci_lower <= res.ci_upper
            assert 0.0 <= res.p_value <= 1.0

    def test_beta_inference_table(self):
        panel, _ = simulate_panel(n_control=12, n_treated=1, n_periods=24, r=1,
                                  pre_lengths=(15,), noise_sd=0.3, seed=10)
        res = estimate_att(panel, GscConfig(r=1, bootstrap_reps=200, seed=3))
        tab = res.beta_inference
        assert list(tab.columns) == ["name", "coef", "se", "ci_lower", "ci_upper", "p_value"]
        assert len(tab) == panel.n_covariates
        assert (tab["ci_lower"] <= tab["ci_upper"]).all()
        assert tab["p_value"].between(0, 1).all()

    def test_normal_ci_scheme(self):
        panel, _ = simulate_panel(n_control=10, n_treated=1, n_periods=20, r=0,
                                  pre_lengths=(12,), noise_sd=0.3, x_factor_mix=0.0, seed=11)
        res = estimate_att(panel, GscConfig(r=0, bootstrap_reps=200, seed=4,
                                            ci_scheme="normal"))
        halfwidth = (res.ci_upper - res.ci_lower) / 2.0
        assert halfwidth == pytest.approx(1.959963984540054 * res.se, rel=1e-9)


class TestPerUnit:
    def test_single_treated_panel_identical(self):
        panel, _ = simulate_panel(n_control=10, n_treated=1, n_periods=20, r=1,
                                  pre_lengths=(12,), seed=12)
        cfg = GscConfig(r=1, bootstrap_reps=200, seed=5)
        a = estimate_att(panel, cfg)
        b = estimate_per_unit(panel, panel.treated_units[0], cfg)
        assert a.avg_att == b.avg_att and a.se == b.se and a.p_value == b.p_value

    def test_unknown_or_untreated_unit(self):
        panel, _ = simulate_panel(n_control=6, n_treated=1, n_periods=12, r=0,
                                  pre_lengths=(7,), x_factor_mix=0.0, seed=13)
        with pytest.raises(DataError, match="unknown"):
            estimate_per_unit(panel, "nope", GscConfig(r=0, inference=False))
        with pytest.raises(DataError, match="not treated"):
            estimate_per_unit(panel, panel.control_units[0], GscConfig(r=0, inference=False))

    def test_per_unit_delta_patterns_recovered(self):
        panel, _ = simulate_panel(n_control=16, n_treated=3, n_periods=40, r=1,
                                  pre_lengths=(24, 28, 30), delta=(0.0, 1.0, 2.0),
                                  noise_sd=0.25, seed=14)
        cfg = GscConfig(r=1, inference=False)
        for unit, d in zip(panel.treated_units, (0.0, 1.0, 2.0)):
            res = estimate_per_unit(panel, unit, cfg)
            assert res.avg_att == pytest.approx(d, abs=0.3)
