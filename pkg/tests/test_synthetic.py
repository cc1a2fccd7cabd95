"""Label generation and the variance-recovery fit."""

import math

import numpy as np
import pytest

from varboxes import (
    DivergenceError,
    GaussianCoordinateEstimator,
    SyntheticGroup,
    fit_coordinate,
    generate_labels,
    optimal_log_variance,
    run_experiment,
)
from varboxes.losses import kl_loss_arrays
from varboxes.synthetic import branch_occupancy


class TestGenerator:
    def test_tiny_noise_pins_labels_to_true_coord(self):
        group = SyntheticGroup(true_coord=0.7, noise_std=1e-15, n_samples=100, seed=3)
        labels = generate_labels(group)
        np.testing.assert_allclose(labels, 0.7, atol=1e-12)

    def test_same_seed_is_bit_identical(self):
        group = SyntheticGroup(0.2, 0.1, 1000, seed=42)
        a = generate_labels(group)
        b = generate_labels(group)
        assert a.tobytes() == b.tobytes()

    def test_different_seeds_differ(self):
        a = generate_labels(SyntheticGroup(0.2, 0.1, 1000, seed=1))
        b = generate_labels(SyntheticGroup(0.2, 0.1, 1000, seed=2))
        assert a.tobytes() != b.tobytes()

    def test_sample_variance_tracks_noise(self):
        group = SyntheticGroup(0.0, 0.2, 100_000, seed=5)
        labels = generate_labels(group)
        assert float(np.var(labels)) == pytest.approx(0.04, rel=0.03)

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError):
            SyntheticGroup(0.0, 0.1, 1, seed=0)

    def test_occupancy_reported(self):
        labels = np.array([0.0, 0.5, 2.0, -3.0])
        assert branch_occupancy(labels, 0.0) == 0.5


class TestFit:
    def test_two_label_closed_form(self):
        state = fit_coordinate([0.9, 1.1])
        assert state.status == "converged"
        assert state.loc == pytest.approx(1.0, abs=1e-9)
        assert state.log_var == pytest.approx(math.log(0.01), abs=1e-6)

    def test_constant_labels_collapse_variance(self):
        state = fit_coordinate([0.5] * 16)
        assert state.status == "variance_collapse"
        assert state.loc == pytest.approx(0.5, abs=1e-9)
        assert state.log_var < -30

    def test_recovers_injected_variance(self):
        labels = generate_labels(SyntheticGroup(0.0, 0.2, 10_000, seed=11))
        state = fit_coordinate(labels, seed=11)
        assert state.status == "converged"
        assert state.variance == pytest.approx(0.04, rel=0.10)

    def test_fixed_point_gradients_vanish(self):
        labels = generate_labels(SyntheticGroup(0.1, 0.15, 5000, seed=12))
        state = fit_coordinate(labels, seed=12)
        _, g_loc, g_lv = kl_loss_arrays(state.loc, state.log_var, labels)
        assert abs(float(g_loc.mean())) < 1e-8
        assert abs(float(g_lv.mean())) < 1e-8

    def test_agrees_with_stationary_log_variance(self):
        labels = generate_labels(SyntheticGroup(0.0, 0.1, 5000, seed=13))
        state = fit_coordinate(labels, seed=13)
        residuals = labels - state.loc
        assert np.all(np.abs(residuals) <= 1.0)
        assert state.log_var == pytest.approx(
            optimal_log_variance(residuals), abs=1e-6
        )

    def test_loss_history_non_increasing(self):
        labels = generate_labels(SyntheticGroup(0.0, 0.25, 2000, seed=14))
        for lr in (0.01, 0.05, 0.1):
            state = fit_coordinate(labels, learning_rate=lr, seed=14)
            hist = state.loss_history
            assert all(b <= a for a, b in zip(hist, hist[1:]))

    def test_divergence_raises_with_step_and_state(self):
        labels = generate_labels(SyntheticGroup(0.0, 0.2, 200, seed=15))
        with pytest.raises(DivergenceError) as err:
            fit_coordinate(labels, learning_rate=1e4, adaptive_lr=False)
        assert err.value.step >= 1
        assert not math.isnan(err.value.loc)

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            fit_coordinate([])
        with pytest.raises(ValueError):
            fit_coordinate([0.1, math.nan])


class TestExperiment:
    def test_noisier_group_learns_larger_variance(self):
        groups = [
            SyntheticGroup(0.0, 0.05, 10_000, seed=1),
            SyntheticGroup(0.0, 0.3, 10_000, seed=2),
        ]
        report = run_experiment(groups)
        assert report.rank_agreement
        assert report.rows[1].learned_variance > report.rows[0].learned_variance

    def test_single_group(self):
        report = run_experiment([SyntheticGroup(0.0, 0.1, 2000, seed=3)])
        assert len(report.rows) == 1
        assert report.rank_agreement

    def test_identical_groups_bit_identical(self):
        group = SyntheticGroup(0.1, 0.2, 3000, seed=9)
        report = run_experiment([group, group])
        a, b = report.rows
        assert a.learned_variance == b.learned_variance
        assert a.state.loc == b.state.loc
        assert a.state.log_var == b.state.log_var

    def test_occupancy_row(self):
        report = run_experiment([SyntheticGroup(0.0, 0.05, 2000, seed=4)])
        assert report.rows[0].quadratic_fraction == 1.0


class TestEstimator:
    def test_fit_exposes_learned_attributes(self):
        labels = generate_labels(SyntheticGroup(0.0, 0.2, 5000, seed=21))
        est = GaussianCoordinateEstimator(seed=21).fit(labels)
        assert est.status_ == "converged"
        assert est.variance_ == pytest.approx(0.04, rel=0.10)
        assert est.sigma_ == pytest.approx(math.sqrt(est.variance_), rel=1e-12)
        assert est.n_steps_ > 0
        assert len(est.loss_history_) > 1

    def test_score_prefers_fitted_parameters(self):
        labels = generate_labels(SyntheticGroup(0.0, 0.2, 5000, seed=22))
        est = GaussianCoordinateEstimator(seed=22).fit(labels)
        worse = GaussianCoordinateEstimator(seed=22, max_steps=3).fit(labels)
        assert est.score(labels) >= worse.score(labels)

    def test_score_requires_fit(self):
        with pytest.raises(RuntimeError):
            GaussianCoordinateEstimator().score([0.1])

    def test_get_params(self):
        est = GaussianCoordinateEstimator(learning_rate=0.01, seed=5)
        params = est.get_params()
        assert params["learning_rate"] == 0.01
        assert params["seed"] == 5
