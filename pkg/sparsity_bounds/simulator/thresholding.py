"""
Joint thresholding of J per-realization estimates.

The statistic of index i is sum_j v_j(i)^2. Under the scalar channel
X + sigma W it is (1 + sigma2) chi2_J on the support and sigma2 chi2_J off it,
which fixes both the noise-level estimate and the minimax threshold.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
import structlog

from sparsity_bounds.core.special_functions import chi2_cdf, chi2_sf, xi
from sparsity_bounds.simulator.estimators import mmse_denoise
from sparsity_bounds.simulator.instance import estimation_result
from sparsity_bounds.structure.exceptions import DomainError
from sparsity_bounds.structure.pydantic import EstimationResult, Pipeline

logger = structlog.get_logger(__name__)

_BISECTION_STEPS = 200


def _as_vectors(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        array = np.atleast_2d(vectors.astype(float))
    else:
        rows = [np.asarray(v, dtype=float).ravel() for v in vectors]
        if not rows:
            raise DomainError("joint thresholding needs at least one vector")
        if len({row.size for row in rows}) != 1:
            raise DomainError("all vectors must have the same length")
        array = np.vstack(rows)
    if array.ndim != 2 or array.size == 0:
        raise DomainError("joint thresholding needs J nonempty vectors of equal length")
    return array


def joint_statistic(vectors) -> np.ndarray:
    """sum over j of v_j(i)^2 for every index i."""
    array = _as_vectors(vectors)
    return np.sum(array * array, axis=0)


def noise_level_estimate(statistic: np.ndarray, kappa: float, J: int) -> float:
    """
    sigma2 from the median of the statistic.

    Nearly all indices are off the support, where statistic / J is
    sigma2 chi2_J / J, so sigma2 = median / (J xi_J(0.5 / (1 - kappa))).
    """
    if not 0.0 < kappa < 0.5:
        raise DomainError(f"kappa must lie in (0, 0.5), got {kappa}")
    statistic = np.asarray(statistic, dtype=float)
    if statistic.size == 0:
        raise DomainError("empty statistic")
    return float(np.median(statistic) / (J * xi(0.5 / (1.0 - kappa), J)))


def predicted_error_fractions(kappa: float, J: int, sigma2: float, t: float) -> Tuple[float, float]:
    """(missed fraction, false alarms divided by k) predicted at threshold t."""
    missed = chi2_cdf(t / (1.0 + sigma2), J)
    if sigma2 == 0.0:
        return missed, 0.0
    return missed, (1.0 - kappa) / kappa * chi2_sf(t / sigma2, J)


def minimax_threshold(kappa: float, J: int, sigma2: float) -> float:
    """Threshold on the statistic at which predicted misses and false alarms balance."""
    if not sigma2 >= 0.0:
        raise DomainError(f"sigma2 must be nonnegative, got {sigma2}")
    if sigma2 == 0.0:
        return 0.0
    lo, hi = 0.0, (1.0 + sigma2) * (J + 20.0 * np.sqrt(2.0 * J) + 40.0)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        missed, false_alarms = predicted_error_fractions(kappa, J, sigma2, mid)
        if missed < false_alarms:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def joint_threshold(
    vectors,
    kappa: float,
    true_support: Sequence[int],
    t: Optional[float] = None,
    sigma2: Optional[float] = None,
    estimator: Pipeline = Pipeline.MF,
) -> EstimationResult:
    """
    Keep indices whose joint statistic reaches t.

    Without an explicit t the minimax threshold is used, at the given sigma2
    or at :func:`noise_level_estimate`. A zero statistic is never selected.
    """
    array = _as_vectors(vectors)
    J = array.shape[0]
    statistic = np.sum(array * array, axis=0)
    k = len(true_support)
    if t is None:
        if sigma2 is None:
            sigma2 = noise_level_estimate(statistic, kappa, J)
        t = minimax_threshold(kappa, J, sigma2)
    elif not t >= 0.0:
        raise DomainError(f"threshold must be nonnegative, got {t}")

    selected = np.flatnonzero((statistic >= t) & (statistic > 0.0))
    logger.debug("joint_threshold", J=J, threshold=t, sigma2=sigma2, selected=int(selected.size))
    return estimation_result(
        true_support, selected, k, estimator,
        threshold=float(t) if np.isfinite(t) else None,
        sigma2_estimate=sigma2,
    )


def shrunk_threshold(kappa: float, J: int, sigma2: float, soft: float) -> float:
    """
    Threshold on sum_j eta(v_j)^2 carried over from the pseudo-data threshold.

    Per coordinate |v| >= s is |eta(v)| >= s - soft, so the pseudo-data
    threshold tau J maps to J (sqrt(tau) - soft)^2. Exact for J = 1.
    """
    tau = minimax_threshold(kappa, J, sigma2) / J
    return J * max(float(np.sqrt(tau)) - soft, 0.0) ** 2


def mmse_shrunk_threshold(kappa: float, J: int, sigma2: float) -> float:
    """
    Threshold on sum_j F(v_j)^2 with F the posterior-mean denoiser at sigma2.

    F is odd and increasing in |v|, so the pseudo-data threshold tau J maps
    to J F(sqrt(tau))^2. Exact for J = 1.
    """
    tau = minimax_threshold(kappa, J, sigma2) / J
    return J * float(mmse_denoise(np.sqrt(tau), kappa, sigma2)) ** 2
