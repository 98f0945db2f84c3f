"""Information quantities of the sparsity-pattern problem, in nats."""

import math
from functools import lru_cache

import numpy as np
import structlog
from scipy.special import erfinv

from sparsity_bounds.core.special_functions import (
    SQRT_2,
    SQRT_2PI,
    chi2_cdf_array,
    integrate_split,
    xi,
    xi_array,
)
from sparsity_bounds.structure.exceptions import DomainError

logger = structlog.get_logger(__name__)

_LOG_2PI_E = math.log(2.0 * math.pi * math.e)


def _check_probability(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {p}")


def _check_kappa(kappa: float, upper: float = 0.5, closed: bool = False) -> None:
    ok = 0.0 < kappa <= upper if closed else 0.0 < kappa < upper
    if not ok:
        raise DomainError(f"kappa must lie in (0, {upper}{']' if closed else ')'}, got {kappa}")


# Entropies
def binary_entropy_array(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -np.where(p > 0.0, p * np.log(p), 0.0) - np.where(q > 0.0, q * np.log(q), 0.0)
    return terms


def binary_entropy(p: float) -> float:
    """H_b(p) = -p ln p - (1-p) ln(1-p) with 0 ln 0 = 0."""
    _check_probability("p", p)
    return float(binary_entropy_array(p))


def entropy_rate_array(kappa, alpha) -> np.ndarray:
    """Broadcasting form of :func:`entropy_rate`; no domain checks."""
    kappa = np.asarray(kappa, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    active = alpha < 1.0 - kappa
    a = np.where(active, alpha, 0.0)
    value = (
        binary_entropy_array(kappa)
        - kappa * binary_entropy_array(a)
        - (1.0 - kappa) * binary_entropy_array(kappa * a / (1.0 - kappa))
    )
    return np.where(active, np.maximum(value, 0.0), 0.0)


def entropy_rate(kappa: float, alpha: float) -> float:
    """
    Metric entropy rate R(kappa, alpha).

    H_b(kappa) - kappa H_b(alpha) - (1-kappa) H_b(kappa alpha / (1-kappa)) while
    alpha < 1 - kappa, and zero from there on.
    """
    _check_kappa(kappa)
    if not alpha >= 0.0:
        raise DomainError(f"alpha must be nonnegative, got {alpha}")
    return float(entropy_rate_array(kappa, alpha))


# Diversity power
def diversity_power_array(beta, J: int) -> np.ndarray:
    """
    P_J(beta) on an array of fractions via the truncated-mean identity.

    E[chi2_J/J ; chi2_J/J <= xi] equals P[chi2_{J+2} <= J xi].
    """
    beta = np.asarray(beta, dtype=float)
    if np.any(np.isnan(beta)) or np.any(beta < 0.0) or np.any(beta > 1.0):
        raise DomainError("beta must lie in [0, 1]")
    out = np.ones_like(beta)
    inner = beta < 1.0
    if np.any(inner):
        quantiles = xi_array(beta[inner], J)
        out[inner] = chi2_cdf_array(J * quantiles, J + 2)
    return out


def diversity_power(beta: float, J: int) -> float:
    """P_J(beta) = integral of xi_J(p) over p in [0, beta]."""
    _check_probability("beta", beta)
    return float(diversity_power_array(np.array([beta]), J)[0])


def diversity_power_quadrature(beta: float, J: int) -> float:
    """Direct composite quadrature of xi_J over [0, beta]."""
    _check_probability("beta", beta)
    if beta == 0.0:
        return 0.0
    # geometric refinement towards both ends absorbs the p^(2/J) and log(1-p) behaviour
    edges = [0.0, beta]
    edges += [beta * 2.0 ** -i for i in range(1, 60)]
    edges += [beta - beta * 2.0 ** -i for i in range(1, 45)]
    if beta == 1.0:
        edges = [e for e in edges if e < 1.0 - 1e-13] + [1.0 - 1e-13]
    return integrate_split(lambda p: xi_array(p, J), edges, rtol=1e-9, order=16)


# Conditional entropy power
def _truncation_point(beta):
    """a with P[|U| <= a] = beta, i.e. sqrt(xi_1(beta)), accurate for tiny beta."""
    return SQRT_2 * erfinv(beta)


def conditional_entropy_power_array(beta) -> np.ndarray:
    """Vectorized :func:`conditional_entropy_power`; 0 at beta = 0 by continuity."""
    beta = np.asarray(beta, dtype=float)
    if np.any(np.isnan(beta)) or np.any(beta < 0.0) or np.any(beta > 1.0):
        raise DomainError("beta must lie in [0, 1]")
    out = np.where(beta >= 1.0, 1.0, 0.0)
    inner = (beta > 0.0) & (beta < 1.0)
    if np.any(inner):
        b = beta[inner]
        a = _truncation_point(b)
        density = np.exp(-0.5 * a * a) / SQRT_2PI
        h = np.log(b) + 0.5 * math.log(2.0 * math.pi) + 0.5 - a * density / b
        out[inner] = np.exp(2.0 * h - _LOG_2PI_E)
    return out


def conditional_entropy_power(beta: float) -> float:
    """
    Entropy power of U given U^2 <= xi_1(beta), U standard normal.

    The conditional law is a symmetric truncated normal on [-a, a] with
    a = sqrt(xi_1(beta)) and normalizer beta, whose entropy is closed form.
    """
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    return float(conditional_entropy_power_array(np.array([beta]))[0])


def conditional_entropy_power_quadrature(beta: float) -> float:
    """Same quantity with the differential entropy integrated numerically."""
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    if beta == 1.0:
        return 1.0
    a = math.sqrt(xi(beta, 1))
    log_beta = math.log(beta)

    def integrand(u: np.ndarray) -> np.ndarray:
        log_f = -0.5 * u * u - math.log(SQRT_2PI) - log_beta
        return -np.exp(log_f) * log_f

    h = 2.0 * integrate_split(integrand, [0.0, 0.5 * a, a], rtol=1e-12)
    return math.exp(2.0 * h - _LOG_2PI_E)


# Sparse Gaussian channel
def _mixture_breakpoints(sigma2: float) -> list:
    sigma = math.sqrt(sigma2)
    wide = math.sqrt(1.0 + sigma2)
    limit = 12.0 * wide
    edges = [0.0, wide, limit]
    edge = sigma / 8.0
    while edge < limit:
        edges.append(edge)
        edge *= 2.0
    return edges


def _mixture_log_density(y: np.ndarray, kappa: float, sigma2: float) -> np.ndarray:
    wide = 1.0 + sigma2
    log_wide = math.log(kappa) - 0.5 * y * y / wide - 0.5 * math.log(2.0 * math.pi * wide)
    if kappa == 1.0:
        return log_wide
    log_narrow = math.log(1.0 - kappa) - 0.5 * y * y / sigma2 - 0.5 * math.log(2.0 * math.pi * sigma2)
    return np.logaddexp(log_wide, log_narrow)


def _check_channel(kappa: float, sigma2: float) -> None:
    _check_kappa(kappa, upper=1.0, closed=True)
    if not sigma2 > 0.0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")


@lru_cache(maxsize=8192)
def _mixture_entropy_cached(kappa: float, sigma2: float) -> float:
    def integrand(y: np.ndarray) -> np.ndarray:
        log_p = _mixture_log_density(y, kappa, sigma2)
        return -np.exp(log_p) * log_p

    return 2.0 * integrate_split(integrand, _mixture_breakpoints(sigma2))


def mixture_entropy(kappa: float, sigma2: float) -> float:
    """Differential entropy of kappa N(0, 1 + sigma2) + (1 - kappa) N(0, sigma2)."""
    _check_channel(kappa, sigma2)
    return _mixture_entropy_cached(float(kappa), float(sigma2))


def mutual_info_sparse_gaussian(kappa: float, sigma2: float) -> float:
    """I(X; X + sigma W) for X drawn from the sparse Gaussian prior."""
    _check_channel(kappa, sigma2)
    if kappa == 1.0:
        return 0.5 * math.log1p(1.0 / sigma2)
    value = mixture_entropy(kappa, sigma2) - 0.5 * (_LOG_2PI_E + math.log(sigma2))
    return max(value, 0.0)


def mmse_scalar(kappa: float, sigma2: float) -> float:
    """E[(X - E[X | X + sigma W])^2] under the sparse Gaussian prior."""
    _check_channel(kappa, sigma2)
    wide = 1.0 + sigma2
    if kappa == 1.0:
        return sigma2 / wide

    def integrand(y: np.ndarray) -> np.ndarray:
        log_p = _mixture_log_density(y, kappa, sigma2)
        log_on = math.log(kappa) - 0.5 * y * y / wide - 0.5 * math.log(2.0 * math.pi * wide)
        posterior = np.exp(log_on - log_p)
        return np.exp(log_p) * (posterior * y / wide) ** 2

    second_moment = 2.0 * integrate_split(integrand, _mixture_breakpoints(sigma2))
    return max(kappa - second_moment, 0.0)


# Capacity-like functions of the converse
def Delta(r: float) -> float:
    """e^-1 (1 - r)^(1 - 1/r) on (0, 1], with Delta(1) = e^-1."""
    if not 0.0 < r <= 1.0:
        raise DomainError(f"Delta requires 0 < r <= 1, got {r}")
    return float(delta_array(r))


def delta_array(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.exp(-1.0 + (1.0 - 1.0 / r) * np.log1p(-np.minimum(r, 1.0)))
    return np.where(r >= 1.0, math.exp(-1.0), value)


def v1_array(r, gamma) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    return np.where(r <= 1.0, 0.5 * r * np.log1p(gamma), 0.5 * np.log1p(r * gamma))


def v2_array(r, gamma) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    below = 0.5 * r * np.log1p(gamma * delta_array(np.minimum(r, 1.0)))
    with np.errstate(divide="ignore"):
        inverse = np.where(r > 1.0, 1.0 / r, 1.0)
    above = 0.5 * np.log1p(r * gamma * delta_array(inverse))
    return np.where(r < 1.0, below, np.where(r > 1.0, above, 0.5 * np.log1p(gamma / math.e)))


def _check_rate_gain(r: float, gamma: float) -> None:
    if not r > 0.0:
        raise DomainError(f"r must be positive, got {r}")
    if not gamma >= 0.0:
        raise DomainError(f"gamma must be nonnegative, got {gamma}")


def V1(r: float, gamma: float) -> float:
    """(r/2) ln(1 + gamma) for r <= 1, (1/2) ln(1 + r gamma) above."""
    _check_rate_gain(r, gamma)
    return float(v1_array(r, gamma))


def V2(r: float, gamma: float) -> float:
    """(r/2) ln(1 + gamma Delta(r)) for r < 1, (1/2) ln(1 + r gamma Delta(1/r)) for r > 1."""
    _check_rate_gain(r, gamma)
    return float(v2_array(r, gamma))
