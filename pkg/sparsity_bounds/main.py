"""Command-line entry point."""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import structlog
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from sparsity_bounds.config import settings
from sparsity_bounds.routes.bounds import run_bounds
from sparsity_bounds.routes.figures import run_figures
from sparsity_bounds.routes.selfcheck import run_selfcheck
from sparsity_bounds.routes.simulate import run_simulate
from sparsity_bounds.services.monitoring import configure_logging
from sparsity_bounds.structure.exceptions import SparsityBoundsError, UsageError
from sparsity_bounds.structure.pydantic import Command, Pipeline, RunOutcome, RunSpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

app = typer.Typer(
    name=settings.app_name,
    help="Sampling-rate bounds for joint sparsity-pattern recovery, and Monte Carlo checks.",
    add_completion=False,
    no_args_is_help=True,
)
console = Console(stderr=True)
logger = structlog.get_logger(__name__)

KappaOption = typer.Option(None, "--kappa", help="Sparsity rate k/n")
SnrOption = typer.Option(None, "--snr-db", help="SNR in dB")
JOption = typer.Option(None, "--J", help="Diversity (number of signal realizations)")
AlphaOption = typer.Option(None, "--alpha", help="Target distortion")
RhoOption = typer.Option(None, "--rho", help="Total sampling rate J*m/n")
OutOption = typer.Option(None, "--out", help="Output directory")
ConfigOption = typer.Option(None, "--config", help="JSON file with RunSpec fields")
WorkersOption = typer.Option(None, "--workers", min=1, help="Parallel workers")
LogLevelOption = typer.Option(None, "--log-level", help="Logging level")


def _print_version(value: bool) -> None:
    if value:
        Console().print(f"{settings.app_name} {settings.app_version}")
        raise typer.Exit(EXIT_OK)


@app.callback()
def main(
    version: bool = typer.Option(
        False, "--version", callback=_print_version, is_eager=True, help="Show the version and exit"
    ),
):
    """Sampling-rate bounds for joint sparsity-pattern recovery, and Monte Carlo checks."""


def _load_config(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        values = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(values, dict):
        raise UsageError("config file must hold a JSON object")
    return values


def build_spec(command: Command, config_path: Optional[Path], **flags) -> RunSpec:
    """Environment defaults, then the config file, then the flags that were given."""
    values = _load_config(config_path)
    values.pop("command", None)
    if flags.get("lam") is not None:
        values.pop("lambda", None)
    values.update({key: value for key, value in flags.items() if value is not None})
    if "output_path" in values:
        values["output_path"] = str(values["output_path"])
    try:
        return RunSpec(command=command, **values)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise UsageError(f"invalid {field}: {first['msg']}") from exc


def _exit_code(outcome: RunOutcome) -> int:
    if outcome.command == Command.SELFCHECK:
        return EXIT_OK if outcome.checks_passed else EXIT_NUMERICAL
    return EXIT_PARTIAL if outcome.partial else EXIT_OK


def _execute(handler, spec_factory) -> None:
    """Build the RunSpec, run the handler and turn errors into exit codes."""
    try:
        spec = spec_factory()
        outcome = handler(spec)
    except UsageError as exc:
        console.print(f"[red]usage error:[/red] {exc}")
        raise typer.Exit(EXIT_USAGE)
    except SparsityBoundsError as exc:
        console.print(f"[red]numerical failure:[/red] {type(exc).__name__}: {exc}")
        raise typer.Exit(EXIT_NUMERICAL)
    for path in outcome.files:
        console.print(f"wrote {path}")
    if outcome.partial:
        console.print(
            f"[yellow]partial failure:[/yellow] {outcome.point_failures} empty points, "
            f"{len(outcome.failed_trials)} failed trials"
        )
    raise typer.Exit(_exit_code(outcome))


def _setup(log_level: Optional[str]) -> None:
    try:
        configure_logging(level=log_level)
    except ValueError as exc:
        console.print(f"[red]usage error:[/red] {exc}")
        raise typer.Exit(EXIT_USAGE)


@app.command()
def bounds(
    kappa: Optional[float] = KappaOption,
    snr_db: Optional[float] = SnrOption,
    J: Optional[int] = JOption,
    alpha: Optional[float] = AlphaOption,
    rho: Optional[float] = RhoOption,
    sweep: Optional[str] = typer.Option(None, "--sweep", help="axis:min:max:points:log|lin"),
    estimators: Optional[str] = typer.Option(
        None, "--estimators", help="Comma-separated subset of thm1,thm2,mf,lasso,mmse,envelope"
    ),
    out: Optional[Path] = OutOption,
    config: Optional[Path] = ConfigOption,
    workers: Optional[int] = WorkersOption,
    log_level: Optional[str] = LogLevelOption,
):
    """Bound curves along a sweep, one CSV per source."""
    _setup(log_level)
    names = None if estimators is None else [name for name in estimators.split(",")]
    _execute(
        run_bounds,
        lambda: build_spec(
            Command.BOUNDS, config,
            kappa=kappa, snr_db=snr_db, J=J, alpha=alpha, rho=rho, sweep=sweep,
            estimators=names, output_path=out, workers=workers,
        ),
    )


@app.command()
def simulate(
    kappa: Optional[float] = KappaOption,
    snr_db: Optional[float] = SnrOption,
    J: Optional[int] = JOption,
    alpha: Optional[float] = AlphaOption,
    rho: Optional[float] = RhoOption,
    n: Optional[int] = typer.Option(None, "--n", help="Ambient dimension"),
    trials: Optional[int] = typer.Option(None, "--trials", help="Number of trials"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="LASSO regularization (default: best by state evolution)"),
    sigma2: Optional[float] = typer.Option(None, "--sigma2", help="Noise power of the scalar pipeline"),
    pipeline: Optional[Pipeline] = typer.Option(None, "--pipeline", help="Estimation pipeline"),
    out: Optional[Path] = OutOption,
    config: Optional[Path] = ConfigOption,
    workers: Optional[int] = WorkersOption,
    log_level: Optional[str] = LogLevelOption,
):
    """Monte Carlo distortion of an estimation pipeline."""
    _setup(log_level)
    _execute(
        run_simulate,
        lambda: build_spec(
            Command.SIMULATE, config,
            kappa=kappa, snr_db=snr_db, J=J, alpha=alpha, rho=rho, n=n, trials=trials, seed=seed,
            lam=lam, sigma2=sigma2, pipeline=pipeline, output_path=out, workers=workers,
        ),
    )


@app.command()
def figures(
    out: Optional[Path] = OutOption,
    points: Optional[int] = typer.Option(None, "--points", min=2, help="Points per curve (default per figure)"),
    config: Optional[Path] = ConfigOption,
    workers: Optional[int] = WorkersOption,
    log_level: Optional[str] = LogLevelOption,
):
    """Reference figure datasets and a gnuplot script."""
    _setup(log_level)
    _execute(
        lambda spec: run_figures(spec, points=points),
        lambda: build_spec(Command.FIGURES, config, output_path=out, workers=workers),
    )


@app.command()
def selfcheck(log_level: Optional[str] = LogLevelOption):
    """Run the invariant suite and print a pass/fail table."""
    _setup(log_level)
    outcome = run_selfcheck()
    table = Table(title="Self-check")
    table.add_column("Module", style="cyan")
    table.add_column("Invariant")
    table.add_column("Result")
    table.add_column("Detail", overflow="fold")
    for check in outcome.checks:
        status = "[green]PASS[/green]" if check.passed else "[red]FAIL[/red]"
        table.add_row(check.module, check.name, status, check.detail)
    Console().print(table)
    passed = sum(check.passed for check in outcome.checks)
    Console().print(f"{passed}/{len(outcome.checks)} invariants passed")
    raise typer.Exit(_exit_code(outcome))


if __name__ == "__main__":
    app()
