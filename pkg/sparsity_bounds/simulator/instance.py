"""Synthetic realizations of the joint measurement model and their distortion."""

from dataclasses import dataclass, replace
from typing import Iterable, Tuple

import numpy as np

from sparsity_bounds.simulator.rng import (
    SCALAR_NOISE,
    make_generator,
    sample_support,
    standard_normal,
)
from sparsity_bounds.structure.exceptions import DomainError
from sparsity_bounds.structure.pydantic import EstimationDiagnostics, EstimationResult, Pipeline


@dataclass(frozen=True)
class Instance:
    """
    One draw of S, X_j, A_j, W_j and Y_j = sqrt(SNR / k) A_j X_j + noise_scale W_j.

    Arrays are indexed by diversity first: signals (J, n), matrices (J, m, n),
    noise and observations (J, m). The support is sorted and zero-based.
    """

    n: int
    k: int
    J: int
    m: int
    snr: float
    seed: int
    support: np.ndarray
    signals: np.ndarray
    matrices: np.ndarray
    noise: np.ndarray
    observations: np.ndarray
    noise_scale: float = 1.0

    @property
    def gain(self) -> float:
        return float(np.sqrt(self.snr / self.k))

    def with_signals(self, signals: np.ndarray) -> "Instance":
        """Same matrices and noise, observations rebuilt from new signals."""
        signals = np.asarray(signals, dtype=float)
        if signals.shape != self.signals.shape:
            raise DomainError(f"signals must have shape {self.signals.shape}, got {signals.shape}")
        return replace(self, signals=signals, observations=_observe(self.gain, self.matrices, signals, self.noise, self.noise_scale))


def _observe(gain: float, matrices: np.ndarray, signals: np.ndarray, noise: np.ndarray, noise_scale: float) -> np.ndarray:
    return gain * np.einsum("jmn,jn->jm", matrices, signals) + noise_scale * noise


def _check_dimensions(n: int, k: int, J: int, m: int = 1) -> None:
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if J < 1:
        raise DomainError(f"J must be at least 1, got {J}")
    if m < 1:
        raise DomainError(f"m must be at least 1, got {m}")


def generate_signals(n: int, k: int, J: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Support and the J signal vectors, drawn exactly as :func:`generate_instance` draws them."""
    _check_dimensions(n, k, J)
    generator = make_generator(seed)
    support = sample_support(generator, n, k)
    signals = np.zeros((J, n))
    for j in range(J):
        signals[j, support] = standard_normal(generator, k)
    return support, signals


def generate_instance(n: int, k: int, J: int, m: int, snr: float, seed: int, noise_scale: float = 1.0) -> Instance:
    """
    Seeded instance of the measurement model.

    Draw order is fixed: support, nonzero values per j, matrices, noise.
    Identical arguments give bit-identical arrays.
    """
    _check_dimensions(n, k, J, m)
    if not snr > 0.0:
        raise DomainError(f"snr must be positive, got {snr}")
    if not noise_scale >= 0.0:
        raise DomainError(f"noise_scale must be nonnegative, got {noise_scale}")

    generator = make_generator(seed)
    support = sample_support(generator, n, k)
    signals = np.zeros((J, n))
    for j in range(J):
        signals[j, support] = standard_normal(generator, k)
    matrices = standard_normal(generator, (J, m, n))
    noise = standard_normal(generator, (J, m))
    gain = float(np.sqrt(snr / k))
    return Instance(
        n=n, k=k, J=J, m=m, snr=snr, seed=seed,
        support=support, signals=signals, matrices=matrices, noise=noise,
        observations=_observe(gain, matrices, signals, noise, noise_scale),
        noise_scale=noise_scale,
    )


def scalar_channel_observations(signals: np.ndarray, sigma2: float, seed: int) -> np.ndarray:
    """X + sigma W with W drawn from the seed's scalar-noise stream."""
    if not sigma2 >= 0.0:
        raise DomainError(f"sigma2 must be nonnegative, got {sigma2}")
    signals = np.asarray(signals, dtype=float)
    noise = standard_normal(make_generator(seed, SCALAR_NOISE), signals.shape)
    return signals + np.sqrt(sigma2) * noise


def support_errors(true_support: Iterable[int], est_support: Iterable[int]) -> Tuple[int, int]:
    """(missed detections, false alarms)."""
    truth, estimate = set(int(i) for i in true_support), set(int(i) for i in est_support)
    return len(truth - estimate), len(estimate - truth)


def distortion(true_support: Iterable[int], est_support: Iterable[int], k: int) -> float:
    """(1/k) max(|S minus S_hat|, |S_hat minus S|)."""
    if k <= 0:
        raise DomainError(f"k must be positive, got {k}")
    missed, false_alarms = support_errors(true_support, est_support)
    return max(missed, false_alarms) / k


def estimation_result(
    true_support: Iterable[int],
    estimated_support: Iterable[int],
    k: int,
    estimator: Pipeline,
    **diagnostics,
) -> EstimationResult:
    """Package an estimated support with its distortion against the truth."""
    estimated = sorted(int(i) for i in estimated_support)
    missed, false_alarms = support_errors(true_support, estimated)
    return EstimationResult(
        estimated_support=estimated,
        distortion=distortion(true_support, estimated, k),
        missed=missed,
        false_alarms=false_alarms,
        estimator=estimator,
        diagnostics=EstimationDiagnostics(**diagnostics),
    )


def empirical_diversity_power(values: np.ndarray, beta: float) -> float:
    """
    (1/k) min over |Delta| = round(beta k) of (1/J) sum_j ||X_j(Delta)||^2.

    ``values`` holds the on-support entries with shape (J, k); the minimum is
    attained by the indices with the smallest average power.
    """
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    values = np.atleast_2d(np.asarray(values, dtype=float))
    k = values.shape[1]
    if k == 0:
        raise DomainError("need at least one support entry")
    count = int(np.floor(beta * k + 0.5))
    powers = np.sort(np.mean(values ** 2, axis=0))
    return float(np.sum(powers[:count]) / k)
