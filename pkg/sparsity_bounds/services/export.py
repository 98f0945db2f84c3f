"""CSV, JSON and gnuplot writers for curves and Monte Carlo runs."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import pandas as pd
import structlog

from sparsity_bounds.config import settings
from sparsity_bounds.structure.pydantic import (
    AbscissaKind,
    BoundCurve,
    MonteCarloSummary,
    TrialRecord,
)

logger = structlog.get_logger(__name__)

CURVE_COLUMNS = ["abscissa", "ordinate", "source", "kappa", "snr_db", "J", "alpha"]
TRIAL_COLUMNS = ["trial", "seed", "distortion", "missed", "false_alarms", "threshold", "error"]


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        path,
        index=False,
        float_format=settings.csv_float_format,
        na_rep="",
        lineterminator="\n",
        encoding="utf-8",
    )
    logger.debug("csv_written", path=str(path), rows=len(frame))
    return path


def curve_frame(curve: BoundCurve) -> pd.DataFrame:
    """
    One row per point.

    snr_db and alpha describe the point: they follow the abscissa when the
    sweep runs along that axis and the run configuration otherwise.
    """
    config = curve.config
    rows = []
    for point in curve.points:
        rows.append({
            "abscissa": point.abscissa,
            "ordinate": point.ordinate,
            "source": curve.source.value,
            "kappa": config.kappa,
            "snr_db": point.abscissa if curve.abscissa_kind == AbscissaKind.SNR_DB else config.snr_db,
            "J": config.J,
            "alpha": point.abscissa if curve.abscissa_kind == AbscissaKind.ALPHA else config.alpha,
        })
    frame = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    frame["ordinate"] = frame["ordinate"].astype(float)
    return frame


def write_curve_csv(curve: BoundCurve, path: Path) -> Path:
    return _write_frame(curve_frame(curve), Path(path))


def write_trials_csv(records: Sequence[TrialRecord], path: Path) -> Path:
    """Per-trial outcomes in trial order; failed trials keep their error text."""
    frame = pd.DataFrame([record.model_dump() for record in records], columns=TRIAL_COLUMNS)
    frame["seed"] = frame["seed"].astype("uint64")
    for column in ("missed", "false_alarms"):
        frame[column] = frame[column].astype("Int64")
    for column in ("distortion", "threshold"):
        frame[column] = frame[column].astype(float)
    return _write_frame(frame, Path(path))


def write_summary_json(summary: MonteCarloSummary, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8", newline="\n")
    logger.debug("json_written", path=str(path))
    return path


@dataclass
class PlotPanel:
    """One gnuplot plot: its output stem, axes and the CSV files drawn on it."""
    name: str
    title: str
    xlabel: str
    ylabel: str
    logx: bool = False
    logy: bool = False
    series: List[Tuple[str, str]] = field(default_factory=list)


def _quoted(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_plot_script(panels: Sequence[PlotPanel], path: Path) -> Path:
    """gnuplot script drawing every panel from the CSV files next to it."""
    lines = [
        "# gnuplot script; run from the directory holding the CSV files",
        'set datafile separator ","',
        'set datafile missing ""',
        "set terminal pngcairo size 900,650",
        "set grid",
        "set key outside right",
        "",
    ]
    for panel in panels:
        lines.append(f"set output {_quoted(panel.name + '.png')}")
        lines.append(f"set title {_quoted(panel.title)}")
        lines.append(f"set xlabel {_quoted(panel.xlabel)}")
        lines.append(f"set ylabel {_quoted(panel.ylabel)}")
        lines.append("set logscale x" if panel.logx else "unset logscale x")
        lines.append("set logscale y" if panel.logy else "unset logscale y")
        plots = [
            f"{_quoted(filename)} every ::1 using 1:2 with linespoints title {_quoted(title)}"
            for filename, title in panel.series
        ]
        lines.append("plot " + ", \\\n     ".join(plots))
        lines.append("")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines), encoding="utf-8", newline="\n")
    return path


def referenced_files(script: str) -> List[str]:
    """CSV names a plot script reads, in order of appearance."""
    names = []
    for line in script.splitlines():
        for chunk in line.split('"'):
            if chunk.endswith(".csv") and chunk not in names:
                names.append(chunk)
    return names
