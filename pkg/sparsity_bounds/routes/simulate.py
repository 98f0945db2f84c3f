"""Handler for ``simulate``: Monte Carlo summary JSON plus per-trial CSV."""

from pathlib import Path

import structlog

from sparsity_bounds.routes.bounds import problem_config
from sparsity_bounds.services.export import write_summary_json, write_trials_csv
from sparsity_bounds.services.monitoring import StageTimer, monitoring_service
from sparsity_bounds.simulator.monte_carlo import monte_carlo
from sparsity_bounds.structure.exceptions import UsageError
from sparsity_bounds.structure.pydantic import Command, Pipeline, RunOutcome, RunSpec

logger = structlog.get_logger(__name__)

SUMMARY_FILE = "summary.json"
TRIALS_FILE = "trials.csv"


def run_simulate(spec: RunSpec) -> RunOutcome:
    """
    Run ``spec.trials`` seeded trials of ``spec.pipeline``.

    Failing trials are kept in the CSV with their error text and listed in
    the summary; the run still writes both files.
    """
    if spec.rho is None and not (spec.pipeline == Pipeline.SCALAR and spec.sigma2 is not None):
        raise UsageError(f"pipeline {spec.pipeline.value} needs --rho")
    config = problem_config(spec)
    output_dir = Path(spec.output_path)

    metrics = monitoring_service.start_execution(Command.SIMULATE.value)
    outcome = RunOutcome(command=Command.SIMULATE, run_id=metrics.run_id)
    try:
        with StageTimer(metrics, f"trials_{spec.pipeline.value}") as stage:
            run = monte_carlo(
                config,
                n=spec.n,
                trials=spec.trials,
                pipeline=spec.pipeline,
                seed=spec.seed,
                lam=spec.lam,
                sigma2=spec.sigma2,
                workers=spec.workers,
                strict=False,
            )
            stage.items = len(run.records)
            stage.failures = len(run.summary.failed_trials)
        outcome.files.append(str(write_summary_json(run.summary, output_dir / SUMMARY_FILE)))
        outcome.files.append(str(write_trials_csv(run.records, output_dir / TRIALS_FILE)))
        outcome.failed_trials = list(run.summary.failed_trials)
    except Exception as exc:
        monitoring_service.finish_execution(metrics.run_id, str(exc))
        raise
    monitoring_service.finish_execution(metrics.run_id)
    logger.info(
        "simulation_written",
        mean_distortion=run.summary.mean_distortion,
        achieved_fraction=run.summary.achieved_fraction,
        failed_trials=len(outcome.failed_trials),
    )
    return outcome
