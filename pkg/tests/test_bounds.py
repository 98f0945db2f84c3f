import math

import numpy as np
import pytest

from sparsity_bounds.core import bounds
from sparsity_bounds.core.info_measures import binary_entropy
from sparsity_bounds.structure.exceptions import DomainError, UnachievableError
from sparsity_bounds.structure.pydantic import EstimatorKind, db_to_linear

KAPPAS = (1e-4, 1e-3, 1e-2)
SNRS_DB = (10.0, 20.0, 40.0, 60.0)
DIVERSITIES = (1, 4, 16)


class TestNearestSubspaceAndConverse:
    @pytest.mark.parametrize("kappa", KAPPAS)
    @pytest.mark.parametrize("J", DIVERSITIES)
    def test_converse_below_achievability_and_monotone_in_snr(self, kappa, J):
        upper = [bounds.ns_upper_bound_rate(kappa, db_to_linear(s), J, 0.1) for s in SNRS_DB]
        lower = [bounds.lower_bound_rate(kappa, db_to_linear(s), J, 0.1) for s in SNRS_DB]
        for lo, hi in zip(lower, upper):
            assert 0.0 <= lo <= hi
        assert all(b <= a * (1.0 + 1e-9) for a, b in zip(upper, upper[1:]))
        assert all(b <= a * (1.0 + 1e-9) + 1e-12 for a, b in zip(lower, lower[1:]))

    @pytest.mark.parametrize("J", DIVERSITIES)
    def test_rates_nonincreasing_in_alpha(self, J):
        kappa, snr = 1e-3, 1e4
        alphas = (0.05, 0.1, 0.2)
        upper = [bounds.ns_upper_bound_rate(kappa, snr, J, a) for a in alphas]
        lower = [bounds.lower_bound_rate(kappa, snr, J, a) for a in alphas]
        assert all(b <= a * (1.0 + 1e-6) for a, b in zip(upper, upper[1:]))
        assert all(b <= a * (1.0 + 1e-6) + 1e-12 for a, b in zip(lower, lower[1:]))

    def test_achievability_exceeds_one_measurement_per_nonzero(self):
        for J in DIVERSITIES:
            assert bounds.ns_upper_bound_rate(1e-3, 1e4, J, 0.1) > 1e-3 * J

    def test_high_snr_trend_for_single_vector(self):
        kappa, snr = 1e-4, 1e6
        rate = bounds.ns_upper_bound_rate(kappa, snr, 1, 0.1)
        envelope = kappa + 2.0 * binary_entropy(kappa) / math.log(snr)
        assert abs(rate - envelope) <= 0.25 * envelope
        assert rate < bounds.ns_upper_bound_rate(kappa, snr, 16, 0.1)

    def test_diversity_lowers_the_rate_at_small_distortion(self):
        kappa, snr = 1e-4, 1e4
        assert bounds.ns_upper_bound_rate(kappa, snr, 16, 1e-2) < bounds.ns_upper_bound_rate(kappa, snr, 1, 1e-2)

    def test_reference_rates_for_a_single_vector(self):
        # the achievability maximum sits at beta = alpha, the converse maximum at beta = 1
        assert bounds.ns_upper_bound_rate(1e-4, 1e4, 1, 0.1) == pytest.approx(4.175211e-4, rel=1e-5)
        assert bounds.lower_bound_rate(1e-4, 1e4, 1, 0.1) == pytest.approx(2.972333e-4, rel=1e-4)

    def test_alpha_at_or_above_complement_is_rejected(self):
        with pytest.raises(DomainError):
            bounds.ns_upper_bound_rate(0.1, 100.0, 1, 0.9)

    def test_dense_support_is_rejected(self):
        with pytest.raises(DomainError):
            bounds.ns_upper_bound_rate(0.6, 100.0, 1, 0.1)
        with pytest.raises(DomainError):
            bounds.lower_bound_rate(0.1, -1.0, 1, 0.1)


class TestDistortionInversion:
    def test_rate_at_or_below_kappa_J_gives_the_ceiling(self):
        assert bounds.ns_distortion(1e-2, 1e4, 4, 0.04) == pytest.approx(0.99)

    def test_ns_distortion_decreases_with_rate(self):
        values = [bounds.ns_distortion(1e-2, 1e4, 2, rho) for rho in (0.5, 1.0, 2.0, 5.0)]
        assert all(b <= a for a, b in zip(values, values[1:]))
        assert values[-1] < values[0]

    def test_lower_bound_distortion_below_ns_distortion(self):
        for rho in (0.05, 0.2, 1.0):
            assert bounds.lower_bound_distortion(1e-2, 1e4, 2, rho) <= bounds.ns_distortion(1e-2, 1e4, 2, rho)

    def test_matched_filter_distortion_inverts_its_rate(self):
        kappa, snr, J, alpha = 0.05, 100.0, 2, 0.1
        rho = bounds.two_stage_rate(kappa, snr, J, alpha, EstimatorKind.MF)
        assert bounds.two_stage_distortion(kappa, snr, J, rho, EstimatorKind.MF) == pytest.approx(alpha, rel=1e-6)

    def test_optimal_diversity_beats_single_vector(self):
        choice = bounds.optimal_diversity(1e-2, 1e4, 5.0)
        assert set(choice.distortions) == {1, 2, 4, 8, 16}
        assert choice.best_J > 1
        assert choice.best_distortion <= 0.5 * choice.distortions[1]


class TestLowDistortionScaling:
    @pytest.mark.parametrize(
        "J, lo, hi",
        [(1, 1e-3, 10 ** -1.5), (2, 1e-4, 1e-2), (4, 1e-5, 1e-3)],
    )
    def test_slope_approaches_two_over_J(self, J, lo, hi):
        alphas = np.geomspace(lo, hi, 8)
        slope = bounds.low_distortion_slope(1e-2, 1e4, J, alphas)
        assert slope == pytest.approx(2.0 / J, rel=0.15)

    def test_slope_needs_two_distortions(self):
        with pytest.raises(DomainError):
            bounds.low_distortion_slope(1e-2, 1e4, 1, [1e-3])


class TestScalarChannels:
    def test_matched_filter_noise_power(self):
        assert bounds.mf_sigma2(0.1, 10.0, 0.5) == pytest.approx(0.1 / 0.5 * 1.1)
        assert bounds.mf_sigma2(0.1, math.inf, 0.5) == pytest.approx(0.2)

    def test_soft_threshold_moments_match_quadrature(self):
        for kappa, sigma2, t in [(0.1, 0.3, 0.7), (0.05, 0.01, 0.2), (0.3, 2.0, 1.5)]:
            closed = bounds.soft_threshold_moments(kappa, sigma2, t)
            numeric = bounds.soft_threshold_moments_quadrature(kappa, sigma2, t)
            assert closed[0] == pytest.approx(numeric[0], rel=1e-8)
            assert closed[1] == pytest.approx(numeric[1], rel=1e-12)

    def test_zero_threshold_leaves_the_noise(self):
        mse, exceed = bounds.soft_threshold_moments(0.1, 0.3, 0.0)
        assert mse == pytest.approx(0.3, rel=1e-12)
        assert exceed == pytest.approx(1.0)

    def test_least_squares_limit(self):
        result = bounds.lasso_state_evolution(0.1, 10.0, 2.0, 0.0)
        assert result.sigma2 == pytest.approx(0.01, rel=1e-6)
        assert result.threshold_t == 0.0

    def test_state_evolution_fixed_point(self):
        kappa, snr, r = 0.1, 100.0, 0.5
        result = bounds.lasso_state_evolution(kappa, snr, r, 0.01 * snr / kappa)
        assert result.residual_sigma2 <= 1e-8 * result.sigma2
        assert result.sigma2 >= kappa / (snr * r)
        channel = result.channel(kappa)
        assert channel.estimator_kind == EstimatorKind.LASSO
        assert channel.threshold_t == result.threshold_t

    def test_state_evolution_reference_value(self):
        result = bounds.lasso_state_evolution(0.1, 100.0, 0.5, 0.01)
        assert result.sigma2 == pytest.approx(0.0078626, rel=1e-4)
        assert result.threshold_t == pytest.approx(0.066956, rel=1e-3)

    def test_best_lambda_no_worse_than_matched_filter(self):
        for kappa, snr, r in [(0.1, 100.0, 0.5), (0.05, 10.0, 2.0)]:
            tuning = bounds.lasso_best_lambda(kappa, snr, r)
            assert tuning.sigma2 <= bounds.mf_sigma2(kappa, snr, r) * (1.0 + 1e-9)

    def test_replica_gaussian_prior_closed_form(self):
        snr, r = 10.0, 0.5
        b = r - 1.0 / snr - 1.0
        expected = (-b + math.sqrt(b * b + 4.0 * r / snr)) / (2.0 * r)
        assert bounds.mmse_sigma2(1.0, snr, r) == pytest.approx(expected, rel=1e-6)

    def test_replica_reference_value(self):
        assert bounds.mmse_sigma2(0.1, 100.0, 0.5) == pytest.approx(0.0028405, rel=1e-4)

    def test_replica_noise_below_matched_filter(self):
        for r in (0.2, 0.5, 2.0):
            result = bounds.mmse_fixed_point(0.1, 100.0, r)
            assert result.sigma2 < bounds.mf_sigma2(0.1, 100.0, r)
            assert result.channel(0.1).threshold_t is None


class TestTwoStage:
    def test_threshold_noise_power_reference_value(self):
        assert bounds.sigma2_threshold(0.1, 2, 0.1) == pytest.approx(0.0239757, abs=1e-6)
        assert bounds.sigma2_threshold(0.1, 2, 0.0) == 0.0

    @pytest.mark.parametrize("J, lo, hi", [(1, 1e-6, 1e-4), (2, 1e-8, 1e-6), (4, 1e-10, 1e-8)])
    def test_threshold_noise_power_slope(self, J, lo, hi):
        alphas = np.geomspace(lo, hi, 8)
        values = [bounds.sigma2_threshold(0.01, J, a) for a in alphas]
        slope = np.polyfit(np.log(alphas), np.log(values), 1)[0]
        assert slope == pytest.approx(2.0 / J, rel=0.1)

    def test_threshold_noise_power_increasing_in_alpha(self):
        values = [bounds.sigma2_threshold(0.05, 4, a) for a in (0.01, 0.05, 0.1, 0.3)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_threshold_noise_power_domain(self):
        with pytest.raises(DomainError):
            bounds.sigma2_threshold(0.1, 2, 0.9)

    def test_matched_filter_rate_closed_form(self):
        kappa, snr, J, alpha = 0.05, 100.0, 2, 0.1
        expected = J * kappa * (1.0 + 1.0 / snr) / bounds.sigma2_threshold(kappa, J, alpha)
        assert bounds.two_stage_rate(kappa, snr, J, alpha, EstimatorKind.MF) == pytest.approx(expected, rel=1e-12)

    def test_lasso_and_mmse_rates_no_worse_than_matched_filter(self):
        kappa, snr, J, alpha = 0.05, 100.0, 2, 0.1
        mf = bounds.two_stage_rate(kappa, snr, J, alpha, EstimatorKind.MF)
        assert bounds.two_stage_rate(kappa, snr, J, alpha, EstimatorKind.LASSO) <= mf * (1.0 + 1e-6)
        assert bounds.two_stage_rate(kappa, snr, J, alpha, EstimatorKind.MMSE) <= mf * (1.0 + 1e-6)

    def test_zero_distortion_is_unachievable(self):
        with pytest.raises(UnachievableError):
            bounds.two_stage_rate(0.05, 100.0, 2, 0.0, EstimatorKind.MF)


class TestHighSnrEnvelopes:
    def test_upper_above_lower(self):
        for J in DIVERSITIES:
            upper, lower = bounds.high_snr_envelopes(1e-4, J, 0.1, 1e8)
            assert upper >= lower >= 1e-4 * J

    def test_needs_snr_above_one(self):
        with pytest.raises(DomainError):
            bounds.high_snr_envelopes(1e-4, 1, 0.1, 1.0)
