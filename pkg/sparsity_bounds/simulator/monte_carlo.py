"""Seeded Monte Carlo trials of an estimation pipeline, fanned out with joblib."""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import structlog
from joblib import Parallel, delayed

from sparsity_bounds.config import settings
from sparsity_bounds.core.bounds import lasso_best_lambda, lasso_state_evolution, mf_sigma2
from sparsity_bounds.simulator.estimators import (
    amp_solve,
    lasso_estimate,
    lasso_pseudo_data,
    matched_filter_estimate,
    mmse_denoise,
    nearest_subspace_estimate,
)
from sparsity_bounds.simulator.instance import (
    generate_instance,
    generate_signals,
    scalar_channel_observations,
)
from sparsity_bounds.simulator.rng import trial_seed
from sparsity_bounds.simulator.thresholding import (
    joint_statistic,
    joint_threshold,
    minimax_threshold,
    mmse_shrunk_threshold,
    noise_level_estimate,
    shrunk_threshold,
)
from sparsity_bounds.structure.exceptions import (
    ConvergenceError,
    DomainError,
    SparsityBoundsError,
    TrialFailedError,
)
from sparsity_bounds.structure.pydantic import (
    EstimationResult,
    MonteCarloRun,
    MonteCarloSummary,
    Pipeline,
    ProblemConfig,
    TrialRecord,
)

logger = structlog.get_logger(__name__)

_LASSO_PIPELINES = (Pipeline.LASSO, Pipeline.AMP, Pipeline.AMP_SHRUNK, Pipeline.MMSE_SHRUNK)


@dataclass(frozen=True)
class TrialPlan:
    """Everything a worker needs to run one trial; shared by all trials of a run."""

    config: ProblemConfig
    pipeline: Pipeline
    n: int
    k: int
    m: int
    lam: Optional[float]
    sigma2: Optional[float]


def _plan(
    config: ProblemConfig, n: int, pipeline: Pipeline, lam: Optional[float], sigma2: Optional[float]
) -> TrialPlan:
    k = max(1, int(round(config.kappa * n)))
    if config.rho is None:
        if pipeline != Pipeline.SCALAR or sigma2 is None:
            raise DomainError(f"pipeline {pipeline.value} needs a sampling rate rho")
        m = 1
    else:
        m = max(1, int(round(config.r * n)))
    if pipeline == Pipeline.SCALAR and sigma2 is None:
        sigma2 = mf_sigma2(config.kappa, config.snr, config.r)
    if pipeline in _LASSO_PIPELINES and lam is None:
        lam = lasso_best_lambda(config.kappa, config.snr, config.r).lam
    return TrialPlan(config=config, pipeline=pipeline, n=n, k=k, m=m, lam=lam, sigma2=sigma2)


def _with_iterations(result: EstimationResult, iterations: int) -> EstimationResult:
    diagnostics = result.diagnostics.model_copy(update={"iterations": iterations})
    return result.model_copy(update={"diagnostics": diagnostics})


def run_pipeline(plan: TrialPlan, seed: int) -> EstimationResult:
    """One seeded realization pushed through the planned estimator."""
    config = plan.config
    kappa, J = config.kappa, config.J

    if plan.pipeline == Pipeline.SCALAR:
        support, signals = generate_signals(plan.n, plan.k, J, seed)
        observations = scalar_channel_observations(signals, plan.sigma2, seed)
        return joint_threshold(observations, kappa, support, sigma2=plan.sigma2, estimator=Pipeline.SCALAR)

    instance = generate_instance(plan.n, plan.k, J, plan.m, config.snr, seed)
    if plan.pipeline == Pipeline.NS:
        return nearest_subspace_estimate(instance)
    if plan.pipeline == Pipeline.MF:
        return joint_threshold(matched_filter_estimate(instance), kappa, instance.support, estimator=Pipeline.MF)
    if plan.pipeline == Pipeline.LASSO:
        estimates = [lasso_estimate(instance, plan.lam, j) for j in range(J)]
        pseudo = [lasso_pseudo_data(instance, x, j) for j, x in enumerate(estimates)]
        return joint_threshold(pseudo, kappa, instance.support, estimator=Pipeline.LASSO)

    outcomes = [amp_solve(instance, plan.lam, j) for j in range(J)]
    iterations = sum(outcome.iterations for outcome in outcomes)
    pseudo = [outcome.pseudo_data for outcome in outcomes]
    if plan.pipeline == Pipeline.AMP:
        result = joint_threshold(pseudo, kappa, instance.support, estimator=Pipeline.AMP)
        return _with_iterations(result, iterations)

    sigma2 = noise_level_estimate(joint_statistic(pseudo), kappa, J)
    if plan.pipeline == Pipeline.MMSE_SHRUNK:
        result = joint_threshold(
            [mmse_denoise(v, kappa, sigma2) for v in pseudo], kappa, instance.support,
            t=mmse_shrunk_threshold(kappa, J, sigma2), sigma2=sigma2, estimator=Pipeline.MMSE_SHRUNK,
        )
        return _with_iterations(result, iterations)

    soft = float(np.mean([outcome.threshold for outcome in outcomes]))
    t = shrunk_threshold(kappa, J, sigma2, soft)
    result = joint_threshold(
        [outcome.estimate for outcome in outcomes], kappa, instance.support,
        t=t, sigma2=sigma2, estimator=Pipeline.AMP_SHRUNK,
    )
    return _with_iterations(result, iterations)


def run_trial(plan: TrialPlan, master_seed: int, trial: int, strict: bool = True) -> TrialRecord:
    """
    Trial ``trial`` of a run; its seed depends only on (master_seed, trial).

    Estimator errors raise TrialFailedError when strict and are recorded on
    the returned record otherwise.
    """
    seed = trial_seed(master_seed, trial)
    try:
        result = run_pipeline(plan, seed)
    except (SparsityBoundsError, np.linalg.LinAlgError) as exc:
        logger.error("trial_failed", trial=trial, seed=seed, error_type=type(exc).__name__, error=str(exc))
        if strict:
            raise TrialFailedError(trial, exc) from exc
        return TrialRecord(trial=trial, seed=seed, error=f"{type(exc).__name__}: {exc}")
    return TrialRecord(
        trial=trial,
        seed=seed,
        distortion=result.distortion,
        missed=result.missed,
        false_alarms=result.false_alarms,
        threshold=result.diagnostics.threshold,
    )


def _theory(plan: TrialPlan):
    config = plan.config
    if plan.pipeline == Pipeline.NS:
        return None, None
    try:
        if plan.pipeline == Pipeline.SCALAR:
            sigma2 = plan.sigma2
        elif plan.pipeline == Pipeline.MF:
            sigma2 = mf_sigma2(config.kappa, config.snr, config.r)
        else:
            sigma2 = lasso_state_evolution(config.kappa, config.snr, config.r, plan.lam).sigma2
    except ConvergenceError as exc:
        logger.warning("theory_unavailable", pipeline=plan.pipeline.value, error=str(exc))
        return None, None
    return sigma2, minimax_threshold(config.kappa, config.J, sigma2)


def summarize(records: List[TrialRecord], plan: TrialPlan, seed: int) -> MonteCarloSummary:
    """Aggregate the successful trials of an index-ordered record list."""
    failed = [record.trial for record in records if record.error is not None]
    values = np.array([record.distortion for record in records if record.error is None], dtype=float)
    if values.size == 0:
        first = records[failed[0]]
        raise TrialFailedError(first.trial, SparsityBoundsError(first.error))
    q05, q50, q95 = np.quantile(values, [0.05, 0.5, 0.95])
    theory_sigma2, theory_threshold = _theory(plan)
    return MonteCarloSummary(
        mean_distortion=float(values.mean()),
        q05=float(q05),
        q50=float(q50),
        q95=float(q95),
        achieved_fraction=float(np.mean(values <= plan.config.alpha + 1e-12)),
        trials=len(records),
        seed=seed,
        pipeline=plan.pipeline,
        theory_sigma2=theory_sigma2,
        theory_threshold=theory_threshold,
        failed_trials=failed,
    )


def monte_carlo(
    config: ProblemConfig,
    n: int,
    trials: int,
    pipeline: Pipeline = Pipeline.MF,
    seed: int = 0,
    lam: Optional[float] = None,
    sigma2: Optional[float] = None,
    workers: Optional[int] = None,
    strict: bool = True,
) -> MonteCarloRun:
    """
    Distortion statistics of ``pipeline`` over independent seeded trials.

    k = round(kappa n) and m = round(rho n / J). Records come back in trial
    order whatever the worker count, so the summary depends only on the
    master seed.
    """
    if trials < 1:
        raise DomainError(f"trials must be at least 1, got {trials}")
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    pipeline = Pipeline(pipeline)
    plan = _plan(config, n, pipeline, lam, sigma2)
    workers = workers or settings.workers
    logger.info(
        "monte_carlo_started",
        pipeline=pipeline.value, n=n, k=plan.k, m=plan.m, J=config.J, trials=trials, seed=seed, workers=workers,
    )

    if workers == 1:
        records = [run_trial(plan, seed, trial, strict) for trial in range(trials)]
    else:
        records = Parallel(n_jobs=workers, backend=settings.joblib_backend)(
            delayed(run_trial)(plan, seed, trial, strict) for trial in range(trials)
        )

    summary = summarize(list(records), plan, seed)
    logger.info(
        "monte_carlo_finished",
        pipeline=pipeline.value, mean_distortion=summary.mean_distortion,
        achieved_fraction=summary.achieved_fraction, failed=len(summary.failed_trials),
    )
    return MonteCarloRun(summary=summary, records=list(records))
