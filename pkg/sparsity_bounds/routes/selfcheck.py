"""
Handler for ``selfcheck``: named invariants of every module, run in-process.

Each check receives its tolerance so one check can be tightened without
touching the others.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import structlog
from scipy import stats

from sparsity_bounds.core import bounds, info_measures, special_functions
from sparsity_bounds.services.monitoring import StageTimer, monitoring_service
from sparsity_bounds.simulator import estimators, instance as instances
from sparsity_bounds.structure.pydantic import Command, EstimatorKind, RunOutcome, SelfCheckResult

logger = structlog.get_logger(__name__)

Outcome = Tuple[bool, str]


@dataclass(frozen=True)
class Check:
    name: str
    module: str
    tolerance: float
    run: Callable[[float], Outcome]


def _within(error: float, tol: float) -> Outcome:
    return error <= tol, f"max error {error:.3e} (tol {tol:.1e})"


# special_functions
def _xi2_closed_form(tol: float) -> Outcome:
    p = np.linspace(1e-3, 0.999, 1000)
    return _within(float(np.max(np.abs(special_functions.xi_array(p, 2) + np.log1p(-p)))), tol)


def _chi2_round_trip(tol: float) -> Outcome:
    p = np.linspace(0.01, 0.99, 50)
    error = max(
        float(np.max(np.abs(special_functions.chi2_cdf_array(J * special_functions.xi_array(p, J), J) - p)))
        for J in (1, 2, 4, 8, 16)
    )
    return _within(error, tol)


def _chi2_cdf_oracle(tol: float) -> Outcome:
    t = np.linspace(0.0, 60.0, 241)
    error = max(
        float(np.max(np.abs(special_functions.chi2_cdf_array(t, J) - stats.chi2.cdf(t, J))))
        for J in (1, 3, 18)
    )
    return _within(error, tol)


def _normal_quantile_round_trip(tol: float) -> Outcome:
    error = max(
        abs(special_functions.normal_cdf(special_functions.normal_quantile(p)) - p)
        for p in (1e-12, 1e-6, 0.01, 0.3, 0.5, 0.8, 0.999)
    )
    return _within(error, tol)


def _gauss_hermite_moments(tol: float) -> Outcome:
    rule = special_functions.gauss_hermite_rule()
    error = max(
        abs(special_functions.integrate(lambda x: x ** 2, rule) - 1.0),
        abs(special_functions.integrate(lambda x: x ** 4, rule) - 3.0),
    )
    return _within(error, tol)


def _adaptive_simpson_normalization(tol: float) -> Outcome:
    value = special_functions.integrate(special_functions.normal_pdf, special_functions.simpson_rule(), None)
    return _within(abs(value - 1.0), tol)


# info_measures
def _binary_entropy_half(tol: float) -> Outcome:
    return _within(abs(info_measures.binary_entropy(0.5) - math.log(2.0)), tol)


def _entropy_rate_endpoints(tol: float) -> Outcome:
    kappa = 0.2
    error = max(
        abs(info_measures.entropy_rate(kappa, 0.0) - info_measures.binary_entropy(kappa)),
        abs(info_measures.entropy_rate(kappa, 1.0 - kappa)),
    )
    return _within(error, tol)


def _diversity_power_identity(tol: float) -> Outcome:
    error = max(
        abs(info_measures.diversity_power(beta, J) - info_measures.diversity_power_quadrature(beta, J))
        for beta in (0.1, 0.5, 0.9)
        for J in (1, 2, 8)
    )
    return _within(error, tol)


def _diversity_power_full(tol: float) -> Outcome:
    return _within(max(abs(info_measures.diversity_power(1.0, J) - 1.0) for J in (1, 4, 16)), tol)


def _entropy_power_quadrature(tol: float) -> Outcome:
    error = max(
        abs(info_measures.conditional_entropy_power(beta) - info_measures.conditional_entropy_power_quadrature(beta))
        for beta in (0.01, 0.25, 0.5, 0.75, 0.99)
    )
    return _within(error, tol)


def _entropy_power_limits(tol: float) -> Outcome:
    full = abs(info_measures.conditional_entropy_power(1.0) - 1.0)
    small = info_measures.conditional_entropy_power(1e-6)
    return full <= tol and small < 1e-10, f"N(1) error {full:.3e}, N(1e-6) = {small:.3e}"


def _i_mmse_relation(tol: float) -> Outcome:
    kappa, sigma2 = 0.1, 0.2
    s = 1.0 / sigma2
    h = 1e-3 * s
    slope = (
        info_measures.mutual_info_sparse_gaussian(kappa, 1.0 / (s + h))
        - info_measures.mutual_info_sparse_gaussian(kappa, 1.0 / (s - h))
    ) / (2.0 * h)
    target = 0.5 * info_measures.mmse_scalar(kappa, sigma2)
    return _within(abs(slope - target) / target, tol)


def _capacity_ordering(tol: float) -> Outcome:
    worst = min(
        info_measures.V1(r, gamma) - info_measures.V2(r, gamma)
        for r in (0.25, 1.0, 4.0)
        for gamma in (0.1, 10.0, 1e4)
    )
    delta_error = abs(info_measures.Delta(1.0) - math.exp(-1.0))
    return worst >= -tol and delta_error <= tol, f"min V1 - V2 = {worst:.3e}, Delta(1) error {delta_error:.1e}"


# bounds
def _converse_below_achievability(tol: float) -> Outcome:
    gaps = []
    for snr_db, J in itertools.product((20.0, 40.0), (1, 4)):
        snr = 10.0 ** (snr_db / 10.0)
        gaps.append(bounds.ns_upper_bound_rate(1e-3, snr, J, 0.1) - bounds.lower_bound_rate(1e-3, snr, J, 0.1))
    return min(gaps) >= -tol, f"smallest gap {min(gaps):.3e}"


def _achievability_decreasing_in_snr(tol: float) -> Outcome:
    rates = [bounds.ns_upper_bound_rate(1e-3, 10.0 ** (db / 10.0), 2, 0.1) for db in (10.0, 20.0, 40.0, 60.0)]
    worst = max(b - a for a, b in zip(rates, rates[1:]))
    return worst <= tol, f"largest increase {worst:.3e}"


def _matched_filter_closed_form(tol: float) -> Outcome:
    kappa, snr, J, alpha = 0.01, 100.0, 2, 0.1
    expected = J * kappa * (1.0 + 1.0 / snr) / bounds.sigma2_threshold(kappa, J, alpha)
    value = bounds.two_stage_rate(kappa, snr, J, alpha, EstimatorKind.MF)
    return _within(abs(value - expected) / expected, tol)


def _lasso_least_squares_limit(tol: float) -> Outcome:
    result = bounds.lasso_state_evolution(0.1, 10.0, 2.0, 0.0)
    return _within(max(abs(result.sigma2 - 0.01) / 0.01, result.threshold_t), tol)


def _replica_gaussian_prior(tol: float) -> Outcome:
    snr, r = 100.0, 0.5
    b = r - 1.0 - 1.0 / snr
    expected = (-b + math.sqrt(b * b + 4.0 * r / snr)) / (2.0 * r)
    return _within(abs(bounds.mmse_sigma2(1.0, snr, r) - expected) / expected, tol)


def _threshold_noise_power(tol: float) -> Outcome:
    expected = -math.log(0.9) / (-math.log(0.1 * 0.1 / 0.9) + math.log(0.9))
    return _within(abs(bounds.sigma2_threshold(0.1, 2, 0.1) - expected), tol)


def _envelope_ordering(tol: float) -> Outcome:
    upper, lower = bounds.high_snr_envelopes(1e-4, 4, 0.1, 1e4)
    return upper - lower >= -tol, f"upper {upper:.6g}, lower {lower:.6g}"


# simulator
def _distortion_cases(tol: float) -> Outcome:
    error = max(
        abs(instances.distortion({1, 2}, {1, 3}, 2) - 0.5),
        abs(instances.distortion({1, 2, 3}, {1, 2, 3, 4, 5}, 3) - 2.0 / 3.0),
        abs(instances.distortion({4, 7}, {4, 7}, 2)),
    )
    return _within(error, tol)


def _instance_determinism(tol: float) -> Outcome:
    first = instances.generate_instance(30, 3, 2, 12, 10.0, seed=7)
    second = instances.generate_instance(30, 3, 2, 12, 10.0, seed=7)
    same = np.array_equal(first.observations, second.observations) and np.array_equal(first.support, second.support)
    return same, "identical" if same else "observations differ"


def _diversity_power_sorting(tol: float) -> Outcome:
    _, signals = instances.generate_signals(8, 8, 2, seed=3)
    powers = np.mean(signals ** 2, axis=0)
    exhaustive = min(sum(powers[list(subset)]) for subset in itertools.combinations(range(8), 3)) / 8
    return _within(abs(instances.empirical_diversity_power(signals, 3 / 8) - exhaustive), tol)


def _nearest_subspace_noiseless(tol: float) -> Outcome:
    draw = instances.generate_instance(8, 2, 1, 6, 10.0, seed=11, noise_scale=0.0)
    result = estimators.nearest_subspace_estimate(draw)
    return result.distortion <= tol, f"distortion {result.distortion}"


def _lasso_optimality(tol: float) -> Outcome:
    draw = instances.generate_instance(40, 4, 1, 30, 100.0, seed=5)
    lam = 2.0
    x = estimators.lasso_estimate(draw, lam)
    design = draw.gain * draw.matrices[0]
    correlation = design.T @ (draw.observations[0] - design @ x)
    zero = x == 0.0
    excess = float(np.max(np.abs(correlation[zero]) - lam, initial=0.0))
    mismatch = float(np.max(np.abs(correlation[~zero] - lam * np.sign(x[~zero])), initial=0.0))
    return _within(max(excess, mismatch) / lam, tol)


CHECKS: List[Check] = [
    Check("xi2_closed_form", "special_functions", 1e-9, _xi2_closed_form),
    Check("chi2_quantile_round_trip", "special_functions", 1e-8, _chi2_round_trip),
    Check("chi2_cdf_matches_scipy", "special_functions", 1e-10, _chi2_cdf_oracle),
    Check("normal_quantile_round_trip", "special_functions", 1e-10, _normal_quantile_round_trip),
    Check("gauss_hermite_moments", "special_functions", 1e-10, _gauss_hermite_moments),
    Check("adaptive_simpson_normalization", "special_functions", 1e-8, _adaptive_simpson_normalization),
    Check("binary_entropy_half", "info_measures", 1e-15, _binary_entropy_half),
    Check("entropy_rate_endpoints", "info_measures", 1e-12, _entropy_rate_endpoints),
    Check("diversity_power_identity", "info_measures", 1e-7, _diversity_power_identity),
    Check("diversity_power_full_support", "info_measures", 1e-8, _diversity_power_full),
    Check("entropy_power_closed_form", "info_measures", 1e-8, _entropy_power_quadrature),
    Check("entropy_power_limits", "info_measures", 1e-12, _entropy_power_limits),
    Check("i_mmse_relation", "info_measures", 1e-4, _i_mmse_relation),
    Check("capacity_ordering", "info_measures", 1e-12, _capacity_ordering),
    Check("converse_below_achievability", "bounds", 1e-9, _converse_below_achievability),
    Check("achievability_decreasing_in_snr", "bounds", 1e-9, _achievability_decreasing_in_snr),
    Check("matched_filter_closed_form", "bounds", 1e-12, _matched_filter_closed_form),
    Check("lasso_least_squares_limit", "bounds", 1e-6, _lasso_least_squares_limit),
    Check("replica_gaussian_prior", "bounds", 1e-4, _replica_gaussian_prior),
    Check("threshold_noise_power", "bounds", 1e-9, _threshold_noise_power),
    Check("envelope_ordering", "bounds", 0.0, _envelope_ordering),
    Check("distortion_cases", "simulator", 1e-15, _distortion_cases),
    Check("instance_determinism", "simulator", 0.0, _instance_determinism),
    Check("diversity_power_sorting", "simulator", 1e-12, _diversity_power_sorting),
    Check("nearest_subspace_noiseless", "simulator", 0.0, _nearest_subspace_noiseless),
    Check("lasso_optimality", "simulator", 1e-4, _lasso_optimality),
]


def run_checks(tolerances: Optional[Dict[str, float]] = None) -> List[SelfCheckResult]:
    """Run every check; an exception inside a check counts as its failure."""
    tolerances = tolerances or {}
    results = []
    for check in CHECKS:
        try:
            passed, detail = check.run(tolerances.get(check.name, check.tolerance))
        except Exception as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        if not passed:
            logger.error("selfcheck_failed", check=check.name, module=check.module, detail=detail)
        results.append(SelfCheckResult(name=check.name, module=check.module, passed=bool(passed), detail=detail))
    return results


def run_selfcheck(tolerances: Optional[Dict[str, float]] = None) -> RunOutcome:
    metrics = monitoring_service.start_execution(Command.SELFCHECK.value)
    with StageTimer(metrics, "checks") as stage:
        results = run_checks(tolerances)
        stage.items = len(results)
        stage.failures = sum(not result.passed for result in results)
    failed = [result.name for result in results if not result.passed]
    monitoring_service.finish_execution(metrics.run_id, f"failed checks: {failed}" if failed else None)
    return RunOutcome(command=Command.SELFCHECK, run_id=metrics.run_id, checks=results)
