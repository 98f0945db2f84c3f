import math

import numpy as np
import pytest
from scipy import integrate, stats

from sparsity_bounds.core import info_measures as im
from sparsity_bounds.structure.exceptions import DomainError


class TestEntropies:
    def test_binary_entropy_values(self):
        assert im.binary_entropy(0.0) == 0.0
        assert im.binary_entropy(1.0) == 0.0
        assert im.binary_entropy(0.5) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_binary_entropy_domain(self):
        with pytest.raises(DomainError):
            im.binary_entropy(1.5)

    def test_entropy_rate_reference_value(self):
        assert im.entropy_rate(0.1, 0.2) == pytest.approx(0.1791334, abs=1e-6)

    def test_entropy_rate_endpoints(self):
        assert im.entropy_rate(0.1, 0.0) == pytest.approx(im.binary_entropy(0.1), abs=1e-15)
        assert im.entropy_rate(0.1, 0.9) == 0.0
        assert im.entropy_rate(0.1, 0.95) == 0.0

    def test_entropy_rate_nonincreasing_in_alpha(self):
        values = [im.entropy_rate(0.05, a) for a in np.linspace(0.0, 0.95, 96)]
        assert all(later <= earlier + 1e-15 for earlier, later in zip(values, values[1:]))

    def test_entropy_rate_rejects_dense_supports(self):
        with pytest.raises(DomainError):
            im.entropy_rate(0.6, 0.1)


class TestDiversityPower:
    @pytest.mark.parametrize("J", [1, 2, 4, 8, 16])
    def test_identity_matches_quadrature(self, J):
        for beta in np.linspace(0.1, 0.9, 9):
            assert im.diversity_power(beta, J) == pytest.approx(im.diversity_power_quadrature(beta, J), abs=1e-7)

    def test_full_and_empty_fraction(self):
        for J in (1, 4, 16):
            assert im.diversity_power(1.0, J) == pytest.approx(1.0, abs=1e-8)
            assert im.diversity_power(0.0, J) == 0.0

    def test_quadrature_reaches_one_at_full_fraction(self):
        assert im.diversity_power_quadrature(1.0, 2) == pytest.approx(1.0, abs=1e-8)

    def test_two_dof_closed_form(self):
        for beta in (0.05, 0.3, 0.7, 0.95):
            expected = (1.0 - beta) * math.log(1.0 - beta) + beta
            assert im.diversity_power(beta, 2) == pytest.approx(expected, abs=1e-9)

    def test_bottom_fraction_carries_less_than_its_share(self):
        beta = np.linspace(0.05, 0.95, 19)
        for J in (1, 4):
            values = im.diversity_power_array(beta, J)
            assert np.all(values <= beta)
            assert np.all(np.diff(values) > 0.0)

    def test_diversity_evens_out_the_power(self):
        assert im.diversity_power(0.5, 16) > im.diversity_power(0.5, 4) > im.diversity_power(0.5, 1)

    def test_rejects_fractions_outside_unit_interval(self):
        with pytest.raises(DomainError):
            im.diversity_power(1.2, 2)


class TestConditionalEntropyPower:
    def test_closed_form_matches_quadrature(self):
        for beta in np.linspace(0.01, 0.99, 99):
            assert im.conditional_entropy_power(beta) == pytest.approx(
                im.conditional_entropy_power_quadrature(beta), abs=1e-8
            )

    def test_limits_and_monotonicity(self):
        assert im.conditional_entropy_power(1.0) == 1.0
        values = im.conditional_entropy_power_array(np.linspace(0.01, 0.99, 50))
        assert np.all(np.diff(values) > 0.0)
        assert im.conditional_entropy_power(1e-6) < 1e-10

    def test_reference_value(self):
        # beta^2 exp(-2 a phi(a) / beta) with a the upper quartile of N(0, 1)
        assert im.conditional_entropy_power(0.5) == pytest.approx(0.1060714, rel=1e-5)

    def test_zero_fraction_is_rejected(self):
        with pytest.raises(DomainError):
            im.conditional_entropy_power(0.0)


class TestSparseGaussianChannel:
    def test_gaussian_prior_capacity(self):
        assert im.mutual_info_sparse_gaussian(1.0, 0.25) == pytest.approx(0.5 * math.log(5.0), abs=1e-15)
        assert im.mmse_scalar(1.0, 0.25) == pytest.approx(0.2, abs=1e-15)

    def test_mixture_entropy_matches_scipy(self):
        kappa, sigma2 = 0.1, 0.5

        def density(y):
            return kappa * stats.norm.pdf(y, scale=math.sqrt(1.0 + sigma2)) + (1.0 - kappa) * stats.norm.pdf(
                y, scale=math.sqrt(sigma2)
            )

        expected, _ = integrate.quad(lambda y: -density(y) * math.log(density(y)), -30.0, 30.0, epsabs=1e-13)
        assert im.mixture_entropy(kappa, sigma2) == pytest.approx(expected, rel=1e-7)

    def test_mutual_information_reference_value(self):
        value = im.mutual_info_sparse_gaussian(0.1, 0.5)
        assert value == pytest.approx(0.0850631, abs=2e-6)
        assert value < 0.5 * math.log1p(0.1 / 0.5)

    def test_mutual_information_decreases_with_noise(self):
        values = [im.mutual_info_sparse_gaussian(0.1, s) for s in (0.01, 0.1, 1.0, 10.0)]
        assert all(v > 0.0 for v in values)
        assert all(later < earlier for earlier, later in zip(values, values[1:]))

    def test_i_mmse_relation(self):
        kappa, snr, h = 0.1, 2.0, 1e-3
        slope = (
            im.mutual_info_sparse_gaussian(kappa, 1.0 / (snr + h))
            - im.mutual_info_sparse_gaussian(kappa, 1.0 / (snr - h))
        ) / (2.0 * h)
        assert slope == pytest.approx(0.5 * im.mmse_scalar(kappa, 1.0 / snr), abs=1e-5)

    def test_mmse_below_linear_estimator(self):
        for kappa in (0.05, 0.2):
            for sigma2 in (0.01, 0.3, 3.0):
                assert im.mmse_scalar(kappa, sigma2) <= kappa * sigma2 / (kappa + sigma2) + 1e-12

    def test_channel_domain(self):
        with pytest.raises(DomainError):
            im.mutual_info_sparse_gaussian(0.1, 0.0)
        with pytest.raises(DomainError):
            im.mmse_scalar(1.5, 1.0)


class TestCapacityFunctions:
    def test_delta_values(self):
        assert im.Delta(1.0) == pytest.approx(math.exp(-1.0), abs=1e-15)
        assert im.Delta(0.5) == pytest.approx(2.0 / math.e, abs=1e-15)

    def test_v1_branches(self):
        assert im.V1(0.5, 3.0) == pytest.approx(0.25 * math.log(4.0))
        assert im.V1(2.0, 3.0) == pytest.approx(0.5 * math.log(7.0))

    def test_v2_below_v1(self):
        for r in (0.2, 0.5, 1.0, 3.0):
            for gamma in (0.1, 10.0, 1e4):
                assert im.V2(r, gamma) < im.V1(r, gamma)

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(DomainError):
            im.V1(0.0, 1.0)
        with pytest.raises(DomainError):
            im.Delta(1.5)
