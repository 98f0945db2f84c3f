import numpy as np
import pytest
from pydantic import ValidationError

from sparsity_bounds.core.bounds import mf_sigma2, sigma2_threshold, two_stage_rate
from sparsity_bounds.simulator.monte_carlo import _plan, monte_carlo, run_trial
from sparsity_bounds.simulator.thresholding import minimax_threshold
from sparsity_bounds.structure.exceptions import DomainError, TrialFailedError
from sparsity_bounds.structure.pydantic import EstimatorKind, Pipeline, ProblemConfig


class TestPlan:
    def test_dimensions_are_rounded(self, mf_config):
        plan = _plan(mf_config, 1000, Pipeline.MF, None, None)
        assert (plan.k, plan.m) == (50, 500)

    @pytest.mark.parametrize(
        "fields",
        [{"kappa": 0.5}, {"kappa": 0.0}, {"J": 0}, {"alpha": -0.1}, {"alpha": 1.5}],
    )
    def test_problem_config_rejects_out_of_range_parameters(self, fields):
        with pytest.raises(ValidationError):
            ProblemConfig(**{"kappa": 0.05, "snr": 10.0, **fields})

    def test_rate_is_required_except_for_scalar_channel(self):
        config = ProblemConfig(kappa=0.05, snr=10.0, J=2)
        with pytest.raises(DomainError):
            _plan(config, 100, Pipeline.MF, None, None)
        assert _plan(config, 100, Pipeline.SCALAR, None, 0.1).sigma2 == 0.1

    def test_defaults_follow_the_theory(self, mf_config):
        scalar = _plan(mf_config, 100, Pipeline.SCALAR, None, None)
        assert scalar.sigma2 == pytest.approx(mf_sigma2(0.05, 10.0, 0.5))
        lasso = _plan(mf_config, 100, Pipeline.LASSO, None, None)
        assert lasso.lam is not None and lasso.lam >= 0.0


class TestTrials:
    def test_trial_is_reproducible(self, mf_config):
        plan = _plan(mf_config, 200, Pipeline.MF, None, None)
        assert run_trial(plan, 3, 1) == run_trial(plan, 3, 1)
        assert run_trial(plan, 3, 1).seed != run_trial(plan, 3, 2).seed

    def test_failures_are_strict_or_recorded(self, override_settings):
        override_settings(ns_max_subsets=10)
        plan = _plan(ProblemConfig(kappa=0.1, snr=10.0, J=1, rho=0.5), 40, Pipeline.NS, None, None)
        with pytest.raises(TrialFailedError) as info:
            run_trial(plan, 0, 4)
        assert info.value.trial == 4
        record = run_trial(plan, 0, 4, strict=False)
        assert record.distortion is None
        assert record.error.startswith("SearchSpaceTooLargeError")

    def test_run_with_only_failures_raises(self, override_settings):
        override_settings(ns_max_subsets=10)
        config = ProblemConfig(kappa=0.1, snr=10.0, J=1, rho=0.5)
        with pytest.raises(TrialFailedError):
            monte_carlo(config, n=40, trials=2, pipeline=Pipeline.NS, workers=1, strict=False)


class TestMonteCarlo:
    def test_summary_fields(self, mf_config):
        run = monte_carlo(mf_config, n=400, trials=6, pipeline=Pipeline.MF, seed=2, workers=1)
        summary = run.summary
        assert summary.trials == 6 and len(run.records) == 6
        assert [record.trial for record in run.records] == list(range(6))
        assert summary.q05 <= summary.q50 <= summary.q95
        assert 0.0 <= summary.achieved_fraction <= 1.0
        assert summary.theory_sigma2 == pytest.approx(mf_sigma2(0.05, 10.0, 0.5))
        assert summary.theory_threshold == pytest.approx(minimax_threshold(0.05, 2, summary.theory_sigma2))
        assert summary.failed_trials == []

    @pytest.mark.parametrize(
        "pipeline", [Pipeline.NS, Pipeline.LASSO, Pipeline.AMP, Pipeline.AMP_SHRUNK, Pipeline.MMSE_SHRUNK, Pipeline.SCALAR]
    )
    def test_every_pipeline_runs(self, pipeline):
        n = 12 if pipeline == Pipeline.NS else 200
        config = ProblemConfig(kappa=0.1, snr=100.0, J=2, alpha=0.2, rho=1.2)
        run = monte_carlo(config, n=n, trials=2, pipeline=pipeline, seed=1, workers=1)
        assert run.summary.pipeline == pipeline
        assert all(record.error is None for record in run.records)
        assert all(0.0 <= record.distortion for record in run.records)

    def test_posterior_mean_shrinkage_keeps_the_single_vector_support(self):
        config = ProblemConfig(kappa=0.05, snr=100.0, J=1, alpha=0.2, rho=0.6)
        plan_amp = _plan(config, 400, Pipeline.AMP, None, None)
        plan_mmse = _plan(config, 400, Pipeline.MMSE_SHRUNK, None, None)
        for trial in range(3):
            amp = run_trial(plan_amp, 11, trial)
            mmse = run_trial(plan_mmse, 11, trial)
            assert (mmse.missed, mmse.false_alarms) == (amp.missed, amp.false_alarms)
            assert mmse.threshold < amp.threshold

    def test_worker_count_does_not_change_results(self, mf_config):
        serial = monte_carlo(mf_config, n=300, trials=6, seed=9, workers=1)
        parallel = monte_carlo(mf_config, n=300, trials=6, seed=9, workers=2)
        assert serial == parallel

    def test_rejects_empty_runs(self, mf_config):
        with pytest.raises(DomainError):
            monte_carlo(mf_config, n=100, trials=0)

    @pytest.mark.slow
    @pytest.mark.parametrize("J", [1, 2, 4])
    def test_threshold_noise_power_is_the_phase_boundary(self, J):
        kappa, alpha = 0.05, 0.1
        boundary = sigma2_threshold(kappa, J, alpha)
        config = ProblemConfig(kappa=kappa, snr=10.0, J=J, alpha=alpha)
        below = monte_carlo(config, n=200_000, trials=100, pipeline=Pipeline.SCALAR, sigma2=0.8 * boundary, workers=1)
        above = monte_carlo(config, n=200_000, trials=100, pipeline=Pipeline.SCALAR, sigma2=1.25 * boundary, workers=1)
        assert below.summary.achieved_fraction >= 0.95
        assert above.summary.achieved_fraction <= 0.05

    @pytest.mark.slow
    def test_matched_filter_improves_across_its_rate_boundary(self):
        kappa, snr, J, alpha = 0.05, 10.0, 4, 0.1
        boundary = two_stage_rate(kappa, snr, J, alpha, EstimatorKind.MF)
        runs = [
            monte_carlo(
                ProblemConfig(kappa=kappa, snr=snr, J=J, alpha=alpha, rho=factor * boundary),
                n=2000, trials=20, pipeline=Pipeline.MF, seed=3, workers=1,
            ).summary
            for factor in (0.8, 1.25)
        ]
        low, high = runs
        assert high.mean_distortion < low.mean_distortion
        assert high.achieved_fraction >= low.achieved_fraction

    @pytest.mark.slow
    def test_doubling_trials_keeps_the_mean(self, mf_config):
        short = monte_carlo(mf_config, n=1000, trials=40, seed=4, workers=1)
        long = monte_carlo(mf_config, n=1000, trials=80, seed=4, workers=1)
        values = np.array([record.distortion for record in long.records])
        stderr = values.std(ddof=1) / np.sqrt(values.size)
        assert abs(short.summary.mean_distortion - long.summary.mean_distortion) <= 3.0 * stderr + 1e-12
