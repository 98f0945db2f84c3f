"""Handler for ``bounds``: one CSV per requested bound along the sweep."""

from pathlib import Path

import structlog
from pydantic import ValidationError

from sparsity_bounds.services.curves import generate_curves, parse_sources
from sparsity_bounds.services.export import write_curve_csv
from sparsity_bounds.services.monitoring import StageTimer, monitoring_service
from sparsity_bounds.structure.exceptions import UsageError
from sparsity_bounds.structure.pydantic import Command, ProblemConfig, RunOutcome, RunSpec

logger = structlog.get_logger(__name__)


def problem_config(spec: RunSpec, **overrides) -> ProblemConfig:
    """The run's ProblemConfig; invalid combinations are usage errors."""
    try:
        return spec.problem_config(**overrides)
    except ValidationError as exc:
        raise UsageError(f"invalid problem parameters: {exc.errors()[0]['msg']}") from exc


def run_bounds(spec: RunSpec) -> RunOutcome:
    """Evaluate every requested source along ``spec.sweep`` and write ``<label>.csv`` files."""
    if spec.sweep is None:
        raise UsageError("bounds needs --sweep axis:min:max:points:log|lin")
    sources = parse_sources(spec.estimators)
    config = problem_config(spec)
    output_dir = Path(spec.output_path)

    metrics = monitoring_service.start_execution(Command.BOUNDS.value)
    outcome = RunOutcome(command=Command.BOUNDS, run_id=metrics.run_id)
    try:
        with StageTimer(metrics, "curves") as stage:
            curves = generate_curves(sources, config, spec.sweep, workers=spec.workers)
            stage.items = sum(len(curve.points) for curve in curves)
            stage.failures = sum(len(curve.failures) for curve in curves)
        for curve in curves:
            path = write_curve_csv(curve, output_dir / f"{curve.label}.csv")
            outcome.files.append(str(path))
            outcome.point_failures += len(curve.failures)
    except Exception as exc:
        monitoring_service.finish_execution(metrics.run_id, str(exc))
        raise
    monitoring_service.finish_execution(metrics.run_id)
    logger.info("bounds_written", files=len(outcome.files), point_failures=outcome.point_failures)
    return outcome
