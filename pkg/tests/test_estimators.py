import numpy as np
import pytest
from scipy import stats

from sparsity_bounds.core.bounds import lasso_best_lambda, lasso_state_evolution, mf_sigma2
from sparsity_bounds.simulator import estimators as est
from sparsity_bounds.simulator.instance import generate_instance
from sparsity_bounds.structure.exceptions import (
    ConvergenceError,
    DivergenceError,
    DomainError,
    SearchSpaceTooLargeError,
)
from sparsity_bounds.structure.pydantic import Pipeline


def _kkt_violation(instance, x, lam, j=0):
    design = instance.gain * instance.matrices[j]
    correlation = design.T @ (instance.observations[j] - design @ x)
    zero = x == 0.0
    excess = np.max(np.abs(correlation[zero]) - lam, initial=0.0)
    mismatch = np.max(np.abs(correlation[~zero] - lam * np.sign(x[~zero])), initial=0.0)
    return max(excess, mismatch)


class TestDenoisers:
    def test_soft_threshold(self):
        np.testing.assert_array_equal(est.soft_threshold([-3.0, -0.5, 0.0, 0.5, 2.0], 1.0), [-2.0, 0.0, 0.0, 0.0, 1.0])
        with pytest.raises(DomainError):
            est.soft_threshold([1.0], -0.1)

    def test_mmse_denoiser_matches_bayes_rule(self):
        kappa, sigma2 = 0.2, 0.5
        y = np.linspace(-4.0, 4.0, 17)
        on = kappa * stats.norm.pdf(y, scale=np.sqrt(1.0 + sigma2))
        off = (1.0 - kappa) * stats.norm.pdf(y, scale=np.sqrt(sigma2))
        expected = on / (on + off) * y / (1.0 + sigma2)
        np.testing.assert_allclose(est.mmse_denoise(y, kappa, sigma2), expected, rtol=1e-12, atol=1e-15)

    def test_mmse_denoiser_gaussian_prior(self):
        np.testing.assert_allclose(est.mmse_denoise([2.0], 1.0, 0.25), [1.6])


class TestNearestSubspace:
    def test_subset_residual_matches_least_squares(self, small_instance):
        subset = list(small_instance.support)
        expected = 0.0
        for j in range(small_instance.J):
            columns = small_instance.matrices[j][:, subset]
            coef, *_ = np.linalg.lstsq(columns, small_instance.observations[j], rcond=None)
            expected += float(np.sum((small_instance.observations[j] - columns @ coef) ** 2))
        assert est.subset_residual(small_instance, subset) == pytest.approx(expected, rel=1e-10)

    def test_noiseless_recovery(self):
        recovered = 0
        for seed in range(100):
            inst = generate_instance(10, 2, 1, 6, 10.0, seed=seed, noise_scale=0.0)
            result = est.nearest_subspace_estimate(inst)
            recovered += result.distortion == 0.0
        assert recovered >= 99

    def test_diversity_helps_with_small_entries(self):
        single, joint = 0, 0
        for seed in range(50):
            inst = generate_instance(10, 2, 1, 12, 100.0, seed=seed)
            signals = inst.signals.copy()
            signals[0, inst.support[1]] = 1e-3
            single += est.nearest_subspace_estimate(inst.with_signals(signals)).distortion == 0.0
            fresh = generate_instance(10, 2, 4, 3, 100.0, seed=1000 + seed)
            joint += est.nearest_subspace_estimate(fresh).distortion == 0.0
        assert joint > single

    def test_result_carries_diagnostics(self, small_instance):
        result = est.nearest_subspace_estimate(small_instance)
        assert result.estimator == Pipeline.NS
        assert result.diagnostics.iterations == 91390
        assert result.diagnostics.residual_norm >= 0.0

    def test_search_space_guard(self, small_instance, override_settings):
        override_settings(ns_max_subsets=10)
        with pytest.raises(SearchSpaceTooLargeError):
            est.nearest_subspace_estimate(small_instance)


class TestMatchedFilter:
    def test_shape_and_pseudo_data_at_zero(self, small_instance):
        mf = est.matched_filter_estimate(small_instance)
        assert mf.shape == (2, 40)
        for j in range(2):
            np.testing.assert_allclose(est.lasso_pseudo_data(small_instance, np.zeros(40), j), mf[j], rtol=1e-12)

    @pytest.fixture(scope="class")
    def mf_moments(self):
        """Second moments of the matched filter over 100 seeded instances at n=5000."""
        kappa, snr, r, n = 0.05, 10.0, 0.5, 5000
        k, m = int(kappa * n), int(r * n)
        moments = {"off": 0.0, "off_predicted": 0.0, "off_count": 0, "on": 0.0, "on_count": 0}
        for seed in range(100):
            inst = generate_instance(n, k, 1, m, snr, seed=seed)
            estimate = est.matched_filter_estimate(inst)[0]
            off = np.setdiff1d(np.arange(n), inst.support)
            moments["off"] += float(np.sum(estimate[off] ** 2))
            # off-support columns are independent of y, so the variance given y is ||y||^2 / (gain m)^2
            moments["off_predicted"] += off.size * float(np.sum(inst.observations[0] ** 2)) / (inst.gain * m) ** 2
            moments["off_count"] += off.size
            moments["on"] += float(np.sum(estimate[inst.support] ** 2))
            moments["on_count"] += inst.support.size
        return moments

    @pytest.mark.slow
    def test_off_support_variance(self, mf_moments):
        expected = 0.05 / 0.5 * (1.0 / 10.0 + 1.0)
        assert mf_moments["off"] / mf_moments["off_predicted"] == pytest.approx(1.0, abs=0.02)
        assert mf_moments["off"] / mf_moments["off_count"] == pytest.approx(expected, rel=0.02)

    @pytest.mark.slow
    def test_on_support_variance(self, mf_moments):
        sigma2 = mf_sigma2(0.05, 10.0, 0.5)
        assert mf_moments["on"] / mf_moments["on_count"] == pytest.approx(1.0 + sigma2, rel=0.03)


class TestLasso:
    def test_optimality_conditions(self, small_instance):
        lam = 5.0
        for j in range(2):
            x = est.lasso_estimate(small_instance, lam, j)
            assert _kkt_violation(small_instance, x, lam, j) <= 1e-4 * lam

    def test_objective_is_minimal(self, small_instance):
        lam = 5.0
        x = est.lasso_estimate(small_instance, lam)
        best = est.lasso_objective(small_instance, x, lam)
        generator = np.random.default_rng(0)
        for _ in range(20):
            assert est.lasso_objective(small_instance, x + 1e-3 * generator.standard_normal(40), lam) >= best

    def test_large_lambda_gives_zero(self, small_instance):
        design = small_instance.gain * small_instance.matrices[0]
        lam = float(np.max(np.abs(design.T @ small_instance.observations[0]))) * 1.01
        np.testing.assert_array_equal(est.lasso_estimate(small_instance, lam), np.zeros(40))

    def test_sweep_cap_raises(self, small_instance, override_settings):
        override_settings(cd_max_sweeps=1)
        with pytest.raises(ConvergenceError):
            est.lasso_estimate(small_instance, 1.0)

    def test_invalid_arguments(self, small_instance):
        with pytest.raises(DomainError):
            est.lasso_estimate(small_instance, -1.0)
        with pytest.raises(DomainError):
            est.lasso_estimate(small_instance, 1.0, j=2)


class TestAmp:
    def test_fixed_point_is_the_lasso_solution(self):
        kappa, snr, r, n = 0.05, 100.0, 0.5, 600
        lam = lasso_best_lambda(kappa, snr, r).lam
        inst = generate_instance(n, int(kappa * n), 1, int(r * n), snr, seed=3)
        outcome = est.amp_solve(inst, lam)
        assert outcome.converged
        reference = est.lasso_estimate(inst, lam)
        error = np.linalg.norm(outcome.estimate - reference) / np.linalg.norm(reference)
        assert error <= 1e-3

    @pytest.mark.slow
    def test_agrees_with_coordinate_descent_over_seeds(self):
        kappa, snr, r, n = 0.05, 100.0, 0.5, 2000
        lam = lasso_best_lambda(kappa, snr, r).lam
        for seed in range(10):
            inst = generate_instance(n, int(kappa * n), 1, int(r * n), snr, seed=seed)
            amp, _ = est.amp_estimate(inst, lam)
            reference = est.lasso_estimate(inst, lam)
            assert np.linalg.norm(amp - reference) <= 1e-3 * np.linalg.norm(reference)

    @pytest.mark.slow
    def test_pseudo_data_error_matches_state_evolution(self):
        kappa, snr, r, n = 0.05, 100.0, 0.5, 2000
        lam = lasso_best_lambda(kappa, snr, r).lam
        predicted = lasso_state_evolution(kappa, snr, r, lam).sigma2
        errors = []
        for seed in range(5):
            inst = generate_instance(n, int(kappa * n), 1, int(r * n), snr, seed=seed)
            _, pseudo = est.amp_estimate(inst, lam)
            errors.append(np.mean((pseudo - inst.signals[0]) ** 2))
        assert float(np.mean(errors)) == pytest.approx(predicted, rel=0.05)

    def test_divergence_is_reported(self, small_instance, override_settings):
        override_settings(amp_divergence_norm=1e-12)
        with pytest.raises(DivergenceError):
            est.amp_solve(small_instance, 0.0)
