"""Handler for ``figures``: the four reference curve bundles and a gnuplot script."""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import structlog

from sparsity_bounds.services.curves import ENVELOPE_LOWER, ENVELOPE_UPPER, default_label, generate_curve
from sparsity_bounds.services.export import PlotPanel, write_curve_csv, write_plot_script
from sparsity_bounds.services.monitoring import StageTimer, monitoring_service
from sparsity_bounds.structure.pydantic import (
    AbscissaKind,
    BoundSource,
    Command,
    ProblemConfig,
    RunOutcome,
    RunSpec,
    SweepScale,
    SweepSpec,
)

logger = structlog.get_logger(__name__)

FIGURE_KAPPA = 1e-4
FIGURE_ALPHA = 0.1
PLOT_SCRIPT = "figures.gp"


@dataclass(frozen=True)
class FigureSpec:
    """A family of curves sharing a sweep, drawn on one panel."""
    name: str
    title: str
    sweep: SweepSpec
    snr_db: Optional[float]
    diversities: Tuple[int, ...]
    sources: Tuple[Tuple[BoundSource, Optional[str]], ...]
    xlabel: str
    ylabel: str
    logx: bool
    logy: bool
    # fig5/fig6 carry a single source, so their files are named by J only
    per_source_files: bool = True

    def file_stem(self, J: int, source: BoundSource, variant: Optional[str]) -> str:
        if self.per_source_files:
            return f"{self.name}_J{J}_{default_label(source, variant)}"
        return f"{self.name}_J{J}"


def _sweep(axis: AbscissaKind, lo: float, hi: float, points: int, scale: SweepScale) -> SweepSpec:
    return SweepSpec(axis=axis, min=lo, max=hi, points=points, scale=scale)


def figure_specs(points: Optional[int] = None) -> List[FigureSpec]:
    """Reference figure settings; ``points`` overrides every sweep size."""
    rate_sources = ((BoundSource.THM1, None), (BoundSource.THM2, None))
    return [
        FigureSpec(
            name="fig3",
            title="Total sampling rate against SNR (kappa = 1e-4, alpha = 0.1)",
            sweep=_sweep(AbscissaKind.SNR_DB, 10.0, 60.0, points or 11, SweepScale.LIN),
            snr_db=None,
            diversities=(1, 4, 16),
            sources=rate_sources + (
                (BoundSource.THM4_ENVELOPE, ENVELOPE_UPPER),
                (BoundSource.THM4_ENVELOPE, ENVELOPE_LOWER),
            ),
            xlabel="SNR (dB)", ylabel="rho = J r", logx=False, logy=True,
        ),
        FigureSpec(
            name="fig4",
            title="Distortion against total sampling rate (kappa = 1e-4, SNR = 40 dB)",
            sweep=_sweep(AbscissaKind.RHO, 1e-4, 1e-1, points or 25, SweepScale.LOG),
            snr_db=40.0,
            diversities=(1, 4, 16),
            sources=rate_sources,
            xlabel="rho = J r", ylabel="alpha", logx=True, logy=True,
        ),
        FigureSpec(
            name="fig5",
            title="Nearest-subspace rate against distortion (kappa = 1e-4, SNR = 40 dB)",
            sweep=_sweep(AbscissaKind.ALPHA, 1e-3, 0.3, points or 15, SweepScale.LOG),
            snr_db=40.0,
            diversities=(1, 2, 4, 8, 16),
            sources=((BoundSource.THM1, None),),
            xlabel="alpha", ylabel="rho = J r", logx=True, logy=True,
            per_source_files=False,
        ),
        FigureSpec(
            name="fig6",
            title="LASSO + thresholding rate against distortion (kappa = 1e-4, SNR = 30 dB)",
            sweep=_sweep(AbscissaKind.ALPHA, 1e-3, 0.3, points or 15, SweepScale.LOG),
            snr_db=30.0,
            diversities=(1, 2, 4, 8, 16),
            sources=((BoundSource.THM3_LASSO, None),),
            xlabel="alpha", ylabel="rho = J r", logx=True, logy=True,
            per_source_files=False,
        ),
    ]


def run_figures(spec: RunSpec, points: Optional[int] = None) -> RunOutcome:
    """Write every figure CSV and a gnuplot script that reads exactly those files."""
    output_dir = Path(spec.output_path)
    metrics = monitoring_service.start_execution(Command.FIGURES.value)
    outcome = RunOutcome(command=Command.FIGURES, run_id=metrics.run_id)
    panels = []
    try:
        for figure in figure_specs(points):
            panel = PlotPanel(
                name=figure.name, title=figure.title, xlabel=figure.xlabel, ylabel=figure.ylabel,
                logx=figure.logx, logy=figure.logy,
            )
            with StageTimer(metrics, figure.name) as stage:
                for J in figure.diversities:
                    # the snr of an snr sweep is overwritten point by point
                    config = ProblemConfig.from_db(
                        figure.snr_db if figure.snr_db is not None else 40.0,
                        kappa=FIGURE_KAPPA, J=J, alpha=FIGURE_ALPHA,
                    )
                    for source, variant in figure.sources:
                        stem = figure.file_stem(J, source, variant)
                        curve = generate_curve(
                            source, config, figure.sweep, variant=variant, label=stem, workers=spec.workers
                        )
                        path = write_curve_csv(curve, output_dir / f"{stem}.csv")
                        outcome.files.append(str(path))
                        outcome.point_failures += len(curve.failures)
                        panel.series.append((path.name, f"J={J} {default_label(source, variant)}"))
                        stage.items += len(curve.points)
                        stage.failures += len(curve.failures)
            panels.append(panel)
        script = write_plot_script(panels, output_dir / PLOT_SCRIPT)
        outcome.files.append(str(script))
    except Exception as exc:
        monitoring_service.finish_execution(metrics.run_id, str(exc))
        raise
    monitoring_service.finish_execution(metrics.run_id)
    logger.info("figures_written", files=len(outcome.files), point_failures=outcome.point_failures)
    return outcome
