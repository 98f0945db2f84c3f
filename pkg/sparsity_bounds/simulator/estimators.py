"""
First-stage estimators on a synthetic instance.

Nearest-subspace search, matched filter, LASSO by cyclic coordinate descent
and AMP for the same LASSO objective. AMP runs on the column-normalized
problem y = Phi u + w with Phi = A / sqrt(m) and u = c x, c = sqrt(SNR m / k);
its pseudo-data divided by c is the scalar channel X + sigma W.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import structlog

from sparsity_bounds.config import settings
from sparsity_bounds.simulator.instance import Instance, estimation_result
from sparsity_bounds.structure.exceptions import (
    ConvergenceError,
    DivergenceError,
    DomainError,
    SearchSpaceTooLargeError,
)
from sparsity_bounds.structure.pydantic import EstimationResult, Pipeline

logger = structlog.get_logger(__name__)

_MIN_ONSAGER_GAP = 1e-3


# Scalar denoisers
def soft_threshold(x, t: float) -> np.ndarray:
    """sign(x) max(|x| - t, 0)."""
    if not t >= 0.0:
        raise DomainError(f"threshold must be nonnegative, got {t}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def mmse_denoise(y, kappa: float, sigma2: float) -> np.ndarray:
    """Posterior mean of X given X + sigma W = y under the sparse Gaussian prior."""
    if not 0.0 < kappa <= 1.0:
        raise DomainError(f"kappa must lie in (0, 1], got {kappa}")
    if not sigma2 > 0.0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    y = np.asarray(y, dtype=float)
    wide = 1.0 + sigma2
    if kappa == 1.0:
        return y / wide
    log_on = math.log(kappa) - 0.5 * y * y / wide - 0.5 * math.log(wide)
    log_off = math.log(1.0 - kappa) - 0.5 * y * y / sigma2 - 0.5 * math.log(sigma2)
    posterior = np.exp(log_on - np.logaddexp(log_on, log_off))
    return posterior * y / wide


def _check_vector(instance: Instance, j: int) -> None:
    if instance.m < 1 or instance.observations.shape[-1] == 0:
        raise DomainError("instance has no measurements")
    if not 0 <= j < instance.J:
        raise DomainError(f"vector index j must lie in [0, {instance.J}), got {j}")


def _check_lambda(lam: float) -> None:
    if not lam >= 0.0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")


# Nearest subspace
def subset_residual(instance: Instance, subset) -> float:
    """sum_j of the squared distance from Y_j to the span of A_j restricted to subset."""
    columns = list(subset)
    q, _ = np.linalg.qr(instance.matrices[:, :, columns])
    y = instance.observations
    projected = np.einsum("jmk,jk->jm", q, np.einsum("jmk,jm->jk", q, y))
    residual = y - projected
    return float(np.sum(residual * residual))


def nearest_subspace_estimate(instance: Instance) -> EstimationResult:
    """
    Exhaustive minimizer of the total residual over all k-subsets.

    Subsets are visited in lexicographic order and only a strictly smaller
    residual replaces the incumbent.
    """
    total = math.comb(instance.n, instance.k)
    if total > settings.ns_max_subsets:
        raise SearchSpaceTooLargeError(
            f"C({instance.n}, {instance.k}) = {total} subsets is too large for exhaustive "
            f"nearest-subspace search (limit {settings.ns_max_subsets:g})"
        )
    best_subset, best_cost = None, math.inf
    for subset in itertools.combinations(range(instance.n), instance.k):
        cost = subset_residual(instance, subset)
        if cost < best_cost:
            best_subset, best_cost = subset, cost
    logger.debug("nearest_subspace_done", subsets=total, residual=best_cost)
    return estimation_result(
        instance.support, best_subset, instance.k, Pipeline.NS,
        iterations=total, residual_norm=math.sqrt(best_cost),
    )


# Matched filter
def matched_filter_estimate(instance: Instance) -> np.ndarray:
    """X_hat_j = (1/m) sqrt(k / SNR) A_j^T Y_j, shape (J, n)."""
    scale = math.sqrt(instance.k / instance.snr) / instance.m
    return scale * np.einsum("jmn,jm->jn", instance.matrices, instance.observations)


# LASSO
def lasso_objective(instance: Instance, x: np.ndarray, lam: float, j: int = 0) -> float:
    """1/2 ||Y_j - sqrt(SNR/k) A_j x||^2 + lambda ||x||_1."""
    residual = instance.observations[j] - instance.gain * (instance.matrices[j] @ x)
    return float(0.5 * residual @ residual + lam * np.sum(np.abs(x)))


def _coordinate_sweep(
    rows: np.ndarray, norms: np.ndarray, x: np.ndarray, residual: np.ndarray, lam: float, indices
) -> float:
    largest = 0.0
    for i in indices:
        if norms[i] == 0.0:
            continue
        old = x[i]
        rho = float(rows[i] @ residual) + norms[i] * old
        new = math.copysign(max(abs(rho) - lam, 0.0), rho) / norms[i]
        if new != old:
            residual -= (new - old) * rows[i]
            x[i] = new
            largest = max(largest, abs(new - old))
    return largest


def lasso_estimate(instance: Instance, lam: float, j: int = 0) -> np.ndarray:
    """
    Minimizer of :func:`lasso_objective` by cyclic coordinate descent.

    Full sweeps alternate with sweeps over the current nonzeros until a full
    sweep moves no coordinate by more than ``settings.cd_tol``.
    """
    _check_vector(instance, j)
    _check_lambda(lam)
    rows = np.ascontiguousarray((instance.gain * instance.matrices[j]).T)
    norms = np.einsum("ij,ij->i", rows, rows)
    x = np.zeros(instance.n)
    residual = instance.observations[j].astype(float).copy()
    everything = range(instance.n)
    tol, cap = settings.cd_tol, settings.cd_max_sweeps

    sweeps = 0
    while sweeps < cap:
        change = _coordinate_sweep(rows, norms, x, residual, lam, everything)
        sweeps += 1
        if change < tol:
            logger.debug("lasso_converged", sweeps=sweeps, nonzeros=int(np.count_nonzero(x)))
            return x
        active = np.flatnonzero(x)
        while sweeps < cap:
            change = _coordinate_sweep(rows, norms, x, residual, lam, active)
            sweeps += 1
            if change < tol:
                break
    raise ConvergenceError("coordinate descent did not converge", sweeps)


def lasso_pseudo_data(instance: Instance, x: np.ndarray, j: int = 0) -> np.ndarray:
    """
    Debiased LASSO estimate x + A^T (Y - gain A x) / (gain m (1 - ||x||_0 / m)).

    This is the AMP pseudo-data evaluated at the LASSO solution; at x = 0 it is
    the matched filter.
    """
    _check_vector(instance, j)
    residual = instance.observations[j] - instance.gain * (instance.matrices[j] @ x)
    gap = max(1.0 - np.count_nonzero(x) / instance.m, _MIN_ONSAGER_GAP)
    return x + (instance.matrices[j].T @ residual) / (instance.gain * instance.m * gap)


# AMP
@dataclass(frozen=True)
class AmpOutcome:
    estimate: np.ndarray
    pseudo_data: np.ndarray
    iterations: int
    threshold: float
    converged: bool


def amp_solve(instance: Instance, lam: float, j: int = 0) -> AmpOutcome:
    """
    AMP for the LASSO objective with the threshold calibrated to lambda.

    theta_t = lambda' / (1 - ||u_t||_0 / m) with lambda' = lambda / c makes
    every fixed point a LASSO minimizer. Estimate, pseudo-data and threshold
    are reported on the x scale.
    """
    _check_vector(instance, j)
    _check_lambda(lam)
    m = instance.m
    scale = instance.gain * math.sqrt(m)
    phi = instance.matrices[j] / math.sqrt(m)
    y = instance.observations[j]
    lam_u = lam / scale

    u = np.zeros(instance.n)
    z = y.astype(float).copy()
    density = 0.0
    pseudo, theta = u, lam_u
    converged = False
    iteration = 0
    for iteration in range(1, settings.amp_max_iter + 1):
        pseudo = u + phi.T @ z
        theta = lam_u / max(1.0 - density, _MIN_ONSAGER_GAP)
        u_next = soft_threshold(pseudo, theta)
        density = np.count_nonzero(u_next) / m
        z = y - phi @ u_next + density * z

        change = np.linalg.norm(u_next - u)
        size = np.linalg.norm(u_next)
        u = u_next
        if not math.isfinite(size) or size / scale > settings.amp_divergence_norm:
            raise DivergenceError("AMP estimate norm exceeded the divergence limit", iteration)
        if change <= settings.amp_tol * max(size, 1.0):
            converged = True
            break

    if converged:
        logger.debug("amp_converged", iterations=iteration, nonzeros=int(np.count_nonzero(u)))
    else:
        logger.warning("amp_iteration_cap", iterations=iteration, j=j)
    return AmpOutcome(
        estimate=u / scale,
        pseudo_data=pseudo / scale,
        iterations=iteration,
        threshold=theta / scale,
        converged=converged,
    )


def amp_estimate(instance: Instance, lam: float, j: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """(shrunk estimate, unshrunk pseudo-data) of vector j."""
    outcome = amp_solve(instance, lam, j)
    return outcome.estimate, outcome.pseudo_data
