"""
Bound-curve generation.

A curve is one source evaluated along a sweep. Rates are computed along SNR
or alpha sweeps; along a rho sweep the bounds are inverted to the smallest
certified distortion. Points are independent and evaluated with joblib;
a point that raises becomes a PointFailure with an empty ordinate.
"""

import math
from typing import List, Optional, Sequence, Tuple

import structlog
from joblib import Parallel, delayed
from pydantic import ValidationError

from sparsity_bounds.config import settings
from sparsity_bounds.core.bounds import (
    high_snr_envelopes,
    lower_bound_distortion,
    lower_bound_rate,
    ns_distortion,
    ns_upper_bound_rate,
    two_stage_distortion,
    two_stage_rate,
)
from sparsity_bounds.structure.exceptions import SparsityBoundsError, UnachievableError, UsageError
from sparsity_bounds.structure.pydantic import (
    AbscissaKind,
    BoundCurve,
    BoundSource,
    CurvePoint,
    EstimatorKind,
    OrdinateKind,
    PointFailure,
    ProblemConfig,
    SweepSpec,
    db_to_linear,
)

logger = structlog.get_logger(__name__)

# --estimators names
SOURCE_NAMES = {
    "thm1": BoundSource.THM1,
    "thm2": BoundSource.THM2,
    "mf": BoundSource.THM3_MF,
    "lasso": BoundSource.THM3_LASSO,
    "mmse": BoundSource.THM3_MMSE,
    "envelope": BoundSource.THM4_ENVELOPE,
}

_TWO_STAGE = {
    BoundSource.THM3_MF: EstimatorKind.MF,
    BoundSource.THM3_LASSO: EstimatorKind.LASSO,
    BoundSource.THM3_MMSE: EstimatorKind.MMSE,
}

ENVELOPE_UPPER = "upper"
ENVELOPE_LOWER = "lower"


def parse_sources(names: Sequence[str]) -> List[BoundSource]:
    """Map ``--estimators`` names to sources, keeping their order."""
    cleaned = [name.strip().lower() for name in names if name.strip()]
    if not cleaned:
        raise UsageError("at least one estimator must be requested")
    unknown = [name for name in cleaned if name not in SOURCE_NAMES]
    if unknown:
        raise UsageError(f"unknown estimators {unknown}; choose from {sorted(SOURCE_NAMES)}")
    sources = []
    for name in cleaned:
        if SOURCE_NAMES[name] not in sources:
            sources.append(SOURCE_NAMES[name])
    return sources


def _point_config(config: ProblemConfig, axis: AbscissaKind, x: float) -> ProblemConfig:
    if axis == AbscissaKind.SNR_DB:
        return config.model_copy(update={"snr": db_to_linear(x)})
    if axis == AbscissaKind.ALPHA:
        return ProblemConfig(**{**config.model_dump(), "alpha": x})
    return ProblemConfig(**{**config.model_dump(), "rho": x})


def _rate(source: BoundSource, config: ProblemConfig, variant: Optional[str]) -> float:
    kappa, snr, J, alpha = config.kappa, config.snr, config.J, config.alpha
    if source == BoundSource.THM1:
        value = ns_upper_bound_rate(kappa, snr, J, alpha)
    elif source == BoundSource.THM2:
        value = lower_bound_rate(kappa, snr, J, alpha)
    elif source == BoundSource.THM4_ENVELOPE:
        upper, lower = high_snr_envelopes(kappa, J, alpha, snr)
        value = lower if variant == ENVELOPE_LOWER else upper
    else:
        value = two_stage_rate(kappa, snr, J, alpha, _TWO_STAGE[source])
    if not math.isfinite(value):
        raise UnachievableError("the bound is infinite at this point")
    return value


def _distortion(source: BoundSource, config: ProblemConfig) -> float:
    kappa, snr, J, rho = config.kappa, config.snr, config.J, config.rho
    if source == BoundSource.THM1:
        return ns_distortion(kappa, snr, J, rho)
    if source == BoundSource.THM2:
        return lower_bound_distortion(kappa, snr, J, rho)
    return two_stage_distortion(kappa, snr, J, rho, _TWO_STAGE[source])


def evaluate_point(
    source: BoundSource, config: ProblemConfig, axis: AbscissaKind, x: float, variant: Optional[str] = None
) -> Tuple[float, Optional[float], Optional[PointFailure]]:
    """(abscissa, ordinate or None, failure or None) for one sweep value."""
    try:
        point_config = _point_config(config, axis, x)
        if axis == AbscissaKind.RHO:
            value = _distortion(source, point_config)
        else:
            value = _rate(source, point_config, variant)
        return x, value, None
    except (SparsityBoundsError, ValidationError) as exc:
        message = (str(exc).splitlines() or [""])[0]
        return x, None, PointFailure(abscissa=x, error_type=type(exc).__name__, message=message)


def generate_curve(
    source: BoundSource,
    config: ProblemConfig,
    sweep: SweepSpec,
    variant: Optional[str] = None,
    label: Optional[str] = None,
    workers: Optional[int] = None,
) -> BoundCurve:
    """Evaluate ``source`` at every sweep value, in sweep order."""
    axis = sweep.axis
    if axis == AbscissaKind.RHO and source == BoundSource.THM4_ENVELOPE:
        raise UsageError("the high-SNR envelopes are rate curves; sweep snr_db or alpha")
    workers = workers or settings.workers
    values = sweep.values()

    if workers == 1:
        results = [evaluate_point(source, config, axis, x, variant) for x in values]
    else:
        results = Parallel(n_jobs=workers, backend=settings.joblib_backend)(
            delayed(evaluate_point)(source, config, axis, x, variant) for x in values
        )

    failures = [failure for _, _, failure in results if failure is not None]
    for failure in failures:
        logger.warning(
            "curve_point_failed",
            source=source.value, abscissa=failure.abscissa, error_type=failure.error_type, error=failure.message,
        )
    return BoundCurve(
        points=[CurvePoint(abscissa=x, ordinate=y) for x, y, _ in results],
        abscissa_kind=axis,
        ordinate_kind=OrdinateKind.ALPHA if axis == AbscissaKind.RHO else OrdinateKind.RHO,
        source=source,
        config=config,
        label=label or default_label(source, variant),
        failures=failures,
    )


def default_label(source: BoundSource, variant: Optional[str] = None) -> str:
    return f"{source.value}_{variant}" if variant else source.value


def generate_curves(
    sources: Sequence[BoundSource], config: ProblemConfig, sweep: SweepSpec, workers: Optional[int] = None
) -> List[BoundCurve]:
    """One curve per source; the envelope source yields its upper and lower curves."""
    curves = []
    for source in sources:
        variants = [ENVELOPE_UPPER, ENVELOPE_LOWER] if source == BoundSource.THM4_ENVELOPE else [None]
        for variant in variants:
            curves.append(generate_curve(source, config, sweep, variant=variant, workers=workers))
    return curves
