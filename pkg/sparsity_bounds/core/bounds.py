"""
Bounds on the total sampling rate rho = J r.

Nearest-subspace achievability and the converse are maximized over a beta
grid whose diversity-power profile is cached per (J, alpha); the two-stage
bounds go through the scalar-channel noise power of the matched filter, the
LASSO state evolution or the replica MMSE fixed point. The distortion
inversions at fixed rho used for distortion-versus-rate curves live here too.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import ValidationError

from sparsity_bounds.config import settings
from sparsity_bounds.core.info_measures import (
    binary_entropy,
    conditional_entropy_power_array,
    diversity_power_array,
    entropy_rate,
    entropy_rate_array,
    mutual_info_sparse_gaussian,
    v1_array,
    v2_array,
)
from sparsity_bounds.core.special_functions import (
    expect_normal,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    xi,
)
from sparsity_bounds.structure.exceptions import ConvergenceError, DomainError, UnachievableError
from sparsity_bounds.structure.pydantic import (
    DiversityChoice,
    EstimatorKind,
    LassoTuning,
    MmseResult,
    ProblemConfig,
    StateEvolutionResult,
)

logger = structlog.get_logger(__name__)

_LN_5_3 = math.log(5.0 / 3.0)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_DIVERSITIES = (1, 2, 4, 8, 16)


def _validated(**fields) -> ProblemConfig:
    """Validate bound arguments through ProblemConfig, surfacing DomainError."""
    try:
        return ProblemConfig(**fields)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise DomainError(f"invalid {field}: {first['msg']}") from exc


def _check_channel_args(kappa: float, snr: float, r: float) -> None:
    if not 0.0 < kappa <= 1.0:
        raise DomainError(f"kappa must lie in (0, 1], got {kappa}")
    if not snr > 0.0:
        raise DomainError(f"snr must be positive, got {snr}")
    if not r > 0.0:
        raise DomainError(f"r must be positive, got {r}")


def _golden_section(
    g: Callable[[float], float], lo: float, hi: float, tol: float, maximize: bool = True
) -> Tuple[float, float]:
    sign = 1.0 if maximize else -1.0
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = sign * g(c), sign * g(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = sign * g(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = sign * g(d)
    x = 0.5 * (a + b)
    return x, g(x)


# Beta profiles
@dataclass(frozen=True)
class BetaProfile:
    """Diversity-power quantities on a beta grid; independent of SNR and rho."""

    beta: np.ndarray
    power_J: np.ndarray
    power_1: np.ndarray
    root_power_1: np.ndarray
    root_entropy_power: np.ndarray
    scale: np.ndarray


def _beta_grid(alpha: float, points: int) -> np.ndarray:
    grid = np.linspace(alpha, 1.0, points)
    first_step = (1.0 - alpha) / (points - 1)
    if alpha < first_step:
        # resolve the small-beta region where P_J(beta) decays like beta^(1+2/J)
        start = max(alpha, 1e-12)
        grid = np.concatenate([grid, np.geomspace(start, alpha + first_step, 241)])
    return np.unique(grid)


def _make_profile(beta: np.ndarray, J: int) -> BetaProfile:
    root = np.minimum(beta ** (1.0 / J), 1.0)
    power_J = diversity_power_array(beta, J)
    power_1 = power_J if J == 1 else diversity_power_array(beta, 1)
    return BetaProfile(
        beta=beta,
        power_J=power_J,
        power_1=power_1,
        root_power_1=power_1 if J == 1 else diversity_power_array(root, 1),
        root_entropy_power=conditional_entropy_power_array(root),
        scale=beta ** (1.0 - 1.0 / J),
    )


@lru_cache(maxsize=128)
def _beta_profile(J: int, alpha: float, points: int) -> BetaProfile:
    profile = _make_profile(_beta_grid(alpha, points), J)
    logger.debug("beta_profile_built", J=J, alpha=alpha, points=profile.beta.size)
    return profile


# Nearest-subspace achievability
def _e2_denominator(x: np.ndarray) -> np.ndarray:
    if settings.e2_denominator == "as_printed":
        with np.errstate(divide="ignore"):
            return np.log1p(x) + 1.0 / x - 1.0
    series = x * x * (0.5 - 2.0 * x / 3.0 + 0.75 * x * x)
    return np.where(x < 1e-4, series, np.log1p(x) - x / (1.0 + x))


def _guarded_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = numerator / denominator
    ratio = np.where(denominator > 0.0, ratio, np.inf)
    return np.where(numerator > 0.0, ratio, 0.0)


def _ns_exponent(profile: BetaProfile, kappa: float, snr: float, J: int) -> np.ndarray:
    """min(E1, E2) on the profile grid."""
    beta = profile.beta
    gap = np.maximum(2.0 * (binary_entropy(kappa) - entropy_rate_array(kappa, beta)), 0.0)
    e1 = _guarded_ratio(
        gap + 2.0 * beta * kappa * J * _LN_5_3,
        np.log1p(0.16 * J * profile.power_J * snr) / J,
    )
    e2 = _guarded_ratio(gap, _e2_denominator(profile.power_1 * snr))
    return np.minimum(e1, e2)


def _ns_exponent_at(beta: float, kappa: float, snr: float, J: int) -> float:
    return float(_ns_exponent(_make_profile(np.array([beta]), J), kappa, snr, J)[0])


def ns_upper_bound_rate(kappa: float, snr: float, J: int, alpha: float) -> float:
    """
    Total rate above which the nearest-subspace estimator achieves alpha.

    kappa J + max over beta in [alpha, 1] of min(E1(beta), E2(beta)); the
    maximum is located on the beta grid and refined by golden section.
    Returns ``math.inf`` when a denominator vanishes.
    """
    _validated(kappa=kappa, snr=snr, J=J, alpha=alpha)
    if not alpha < 1.0 - kappa:
        raise DomainError(f"alpha must be below 1 - kappa = {1.0 - kappa}, got {alpha}")

    profile = _beta_profile(J, float(alpha), settings.beta_grid_points)
    exponent = _ns_exponent(profile, kappa, snr, J)
    if np.any(np.isinf(exponent)):
        logger.warning("ns_bound_degenerate", kappa=kappa, snr=snr, J=J, alpha=alpha)
        return math.inf

    best = int(np.argmax(exponent))
    value = float(exponent[best])
    lo = float(profile.beta[max(best - 1, 0)])
    hi = float(profile.beta[min(best + 1, exponent.size - 1)])
    if hi - lo > settings.golden_tol:
        _, refined = _golden_section(
            lambda b: _ns_exponent_at(b, kappa, snr, J), lo, hi, settings.golden_tol
        )
        value = max(value, refined)
    return kappa * J + value


# Converse
def _converse_margin(
    profile: BetaProfile, kappa: float, snr: float, J: int, alpha: float, rho: float
) -> float:
    """max over beta of R(kappa', alpha/beta) - J min(Lambda1, Lambda2); -inf if no beta counts."""
    beta = profile.beta
    positive = beta > 0.0
    c = 1.0 - kappa + beta * kappa
    kappa_c = beta * kappa / c
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(positive, alpha / np.where(positive, beta, 1.0), np.inf)
    active = positive & (ratio < 1.0 - kappa_c)
    if not np.any(active):
        return -math.inf

    b, cc, kc = beta[active], c[active], kappa_c[active]
    rate_term = entropy_rate_array(kc, ratio[active])
    lam1 = v1_array(rho / cc, profile.power_J[active] ** 2 * snr)
    lam2 = v1_array(rho / cc, profile.scale[active] * profile.root_power_1[active] * snr) - kc * v2_array(
        rho / (b * kappa), b * profile.root_entropy_power[active] * snr
    )
    return float(np.max(rate_term - J * np.minimum(lam1, lam2)))


def lower_bound_rate(kappa: float, snr: float, J: int, alpha: float) -> float:
    """
    Supremum of the total rates at which no estimator achieves alpha.

    The converse margin is nonincreasing in rho, so the crossing is found by
    bisection between 1e-8 and the nearest-subspace rate. Returns 0 when no
    rate is excluded.
    """
    _validated(kappa=kappa, snr=snr, J=J, alpha=alpha)
    profile = _beta_profile(J, float(alpha), settings.beta_grid_points)

    def margin(rho: float) -> float:
        return _converse_margin(profile, kappa, snr, J, alpha, rho)

    lo = 1e-8
    if margin(lo) <= 0.0:
        return 0.0
    hi = ns_upper_bound_rate(kappa, snr, J, alpha)
    if not math.isfinite(hi):
        hi = 1.0
    expansions = 0
    while margin(hi) > 0.0:
        hi *= 2.0
        expansions += 1
        if expansions > 200:
            raise ConvergenceError("converse margin stays positive", expansions)
    if expansions:
        logger.warning("converse_bracket_expanded", kappa=kappa, snr=snr, J=J, alpha=alpha, expansions=expansions)

    for _ in range(settings.rho_bisection_iterations):
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return lo


# Scalar channels
def mf_sigma2(kappa: float, snr: float, r: float) -> float:
    """Matched-filter noise power (kappa / r)(1 / SNR + 1); SNR may be infinite."""
    _check_channel_args(kappa, snr, r)
    return kappa / r * (1.0 / snr + 1.0)


def soft_threshold_moments(kappa: float, sigma2: float, t: float) -> Tuple[float, float]:
    """
    E|X - eta_t(X + sigma W)|^2 and P[|X + sigma W| > t] in closed form.

    Split over the two prior components: on the zero atom the soft threshold
    sees N(0, sigma2); on the Gaussian component Y ~ N(0, 1 + sigma2) and
    X | Y ~ N(Y / (1 + sigma2), sigma2 / (1 + sigma2)).
    """
    sigma = math.sqrt(sigma2)
    v = 1.0 + sigma2
    s = math.sqrt(v)
    tau, u, a = t / sigma, t / s, sigma2 / v

    mse_zero = 2.0 * sigma2 * ((1.0 + tau * tau) * normal_cdf(-tau) - tau * normal_pdf(tau))
    inside = ((2.0 * normal_cdf(u) - 1.0) - 2.0 * u * normal_pdf(u)) / v
    outside = 2.0 * (
        t * t * normal_cdf(-u)
        - 2.0 * a * t * s * normal_pdf(u)
        + a * a * v * (normal_cdf(-u) + u * normal_pdf(u))
    )
    mse_one = inside + outside + sigma2 / v

    mse = kappa * mse_one + (1.0 - kappa) * mse_zero
    exceed = 2.0 * kappa * normal_cdf(-u) + 2.0 * (1.0 - kappa) * normal_cdf(-tau)
    return mse, exceed


def soft_threshold_moments_quadrature(kappa: float, sigma2: float, t: float) -> Tuple[float, float]:
    """Quadrature counterpart of :func:`soft_threshold_moments`, split at the threshold kinks."""
    sigma = math.sqrt(sigma2)
    v = 1.0 + sigma2
    s = math.sqrt(v)

    def soft(y: float) -> float:
        return math.copysign(max(abs(y) - t, 0.0), y)

    mse_zero = expect_normal(lambda z: soft(sigma * z) ** 2, kinks=(-t / sigma, t / sigma))
    mse_one = expect_normal(lambda z: (s * z / v - soft(s * z)) ** 2, kinks=(-t / s, t / s)) + sigma2 / v
    exceed = 2.0 * kappa * normal_cdf(-t / s) + 2.0 * (1.0 - kappa) * normal_cdf(-t / sigma)
    return kappa * mse_one + (1.0 - kappa) * mse_zero, exceed


def _state_evolution_map(
    kappa: float, snr: float, r: float, lam: float, sigma2: float, t: float
) -> Tuple[float, float]:
    mse, exceed = soft_threshold_moments(kappa, sigma2, t)
    noise = kappa / snr
    return (noise + mse) / r, (noise * lam + t * exceed) / r


def _default_start(kappa: float, snr: float, r: float) -> Tuple[float, float]:
    sigma2 = kappa / r * (1.0 / snr + 1.0)
    return sigma2, math.sqrt(sigma2) * normal_quantile(1.0 - kappa / 2.0)


def _solve_state_evolution(
    kappa: float, snr: float, r: float, lam: float, sigma2: float, t: float
) -> Tuple[float, float, int]:
    """Damped fixed-point iteration from one starting pair; returns (sigma2, t, iterations)."""
    damping, rtol = settings.se_damping, settings.se_rtol
    trajectory: List[Tuple[float, float]] = []
    for iteration in range(1, settings.se_max_iter + 1):
        new_sigma2, new_t = _state_evolution_map(kappa, snr, r, lam, sigma2, t)
        if new_t < 1e-12 * math.sqrt(new_sigma2) and lam == 0.0:
            new_t = 0.0
        step_sigma2, step_t = new_sigma2 - sigma2, new_t - t
        if abs(step_sigma2) <= rtol * sigma2 and abs(step_t) <= rtol * max(t, math.sqrt(sigma2)):
            return sigma2, t, iteration
        sigma2 += damping * step_sigma2
        t = 0.0 if new_t == 0.0 else t + damping * step_t
        trajectory.append((sigma2, t))
        if len(trajectory) > 50:
            trajectory.pop(0)
        if not math.isfinite(sigma2) or sigma2 > 1e12:
            raise ConvergenceError("state evolution diverged", iteration, trajectory)
    raise ConvergenceError("state evolution did not converge", settings.se_max_iter, trajectory)


def lasso_state_evolution(kappa: float, snr: float, r: float, lam: float) -> StateEvolutionResult:
    """
    Joint fixed point (sigma2, t) of the LASSO state evolution.

    Three starting points are tried (the matched-filter pair and that pair
    scaled up and down); the smallest sigma2 is returned and disagreement
    between runs is flagged.
    """
    _check_channel_args(kappa, snr, r)
    if not lam >= 0.0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")

    sigma2_0, t_0 = _default_start(kappa, snr, r)
    starts = [(sigma2_0, t_0), (100.0 * sigma2_0, 10.0 * t_0), (sigma2_0 / 100.0, t_0 / 10.0)]
    runs, failures = [], []
    for start in starts:
        try:
            runs.append(_solve_state_evolution(kappa, snr, r, lam, *start))
        except ConvergenceError as exc:
            failures.append(exc)
    if not runs:
        raise failures[0]

    sigma2, t, iterations = min(runs, key=lambda run: run[0])
    spread = max(run[0] for run in runs) - sigma2
    multiple = spread > 1e-6 * sigma2 or bool(failures)
    if multiple:
        logger.warning(
            "state_evolution_multiple_fixed_points",
            kappa=kappa, snr=snr, r=r, lam=lam, sigma2=sigma2, spread=spread, failed_starts=len(failures),
        )
    mapped_sigma2, mapped_t = _state_evolution_map(kappa, snr, r, lam, sigma2, t)
    logger.debug("state_evolution_converged", sigma2=sigma2, t=t, iterations=iterations)
    return StateEvolutionResult(
        sigma2=sigma2,
        threshold_t=t,
        iterations=iterations,
        multiple_fixed_points=multiple,
        residual_sigma2=abs(mapped_sigma2 - sigma2),
        residual_t=abs(mapped_t - t),
    )


def lasso_best_lambda(kappa: float, snr: float, r: float) -> LassoTuning:
    """
    Lambda with the smallest state-evolution sigma2 at rate r.

    The sweep runs over c = kappa lambda / SNR on a logarithmic grid from 1e-8
    to 10, warm-starting each fixed point from its neighbour, and is refined
    once around the best grid value. lambda = 0 is added when r > 1.
    """
    _check_channel_args(kappa, snr, r)
    points = settings.lambda_grid_points
    scales = np.logspace(-8.0, 1.0, points)

    def sweep(values: Iterable[float], start: Tuple[float, float]) -> List[Tuple[float, float, float]]:
        found = []
        state = start
        for c in values:
            lam = float(c) * snr / kappa
            try:
                sigma2, t, _ = _solve_state_evolution(kappa, snr, r, lam, *state)
            except ConvergenceError:
                continue
            state = (sigma2, t)
            found.append((sigma2, lam, t))
        return found

    results = sweep(scales[::-1], _default_start(kappa, snr, r))
    if not results:
        raise ConvergenceError(f"no lambda reached a state-evolution fixed point at r={r}", points)

    best_sigma2, best_lam, best_t = min(results)
    index = int(np.argmin(np.abs(scales - kappa * best_lam / snr)))
    fine = np.geomspace(scales[max(index - 1, 0)], scales[min(index + 1, points - 1)], max(points // 5, 5))
    results += sweep(fine[::-1], (best_sigma2, best_t))
    if r > 1.0:
        results += sweep([0.0], (best_sigma2, best_t))

    sigma2, lam, t = min(results)
    return LassoTuning(lam=lam, sigma2=sigma2, threshold_t=t)


# Replica MMSE
def replica_objective(kappa: float, snr: float, r: float, sigma2: float) -> float:
    """r ln sigma2 + kappa / (SNR sigma2) + 2 I(X; X + sigma W)."""
    return r * math.log(sigma2) + kappa / (snr * sigma2) + 2.0 * mutual_info_sparse_gaussian(kappa, sigma2)


@lru_cache(maxsize=64)
def _replica_information_grid(kappa: float, points: int) -> Tuple[np.ndarray, np.ndarray]:
    grid = np.logspace(-8.0, 3.0, points)
    info = np.array([mutual_info_sparse_gaussian(kappa, float(s)) for s in grid])
    grid.setflags(write=False)
    info.setflags(write=False)
    return grid, info


def mmse_fixed_point(kappa: float, snr: float, r: float) -> MmseResult:
    """Global minimizer of the replica objective with its value and a multi-minimum flag."""
    _check_channel_args(kappa, snr, r)
    grid, info = _replica_information_grid(float(kappa), settings.mmse_grid_points)
    objective = r * np.log(grid) + kappa / (snr * grid) + 2.0 * info
    best = int(np.argmin(objective))
    interior = (objective[1:-1] < objective[:-2]) & (objective[1:-1] < objective[2:])
    multiple = int(np.count_nonzero(interior)) > 1
    if multiple:
        logger.info("replica_multiple_minima", kappa=kappa, snr=snr, r=r, minima=int(np.count_nonzero(interior)))

    sigma2, value = float(grid[best]), float(objective[best])
    if 0 < best < grid.size - 1:
        log_sigma2, refined = _golden_section(
            lambda u: replica_objective(kappa, snr, r, math.exp(u)),
            math.log(grid[best - 1]),
            math.log(grid[best + 1]),
            settings.mmse_rtol,
            maximize=False,
        )
        if refined <= value:
            sigma2, value = math.exp(log_sigma2), refined
    return MmseResult(sigma2=sigma2, objective=value, multiple_minima=multiple)


def mmse_sigma2(kappa: float, snr: float, r: float) -> float:
    """Replica-predicted MMSE noise power at per-vector rate r."""
    return mmse_fixed_point(kappa, snr, r).sigma2


# Two-stage thresholding
def sigma2_threshold(kappa: float, J: int, alpha: float) -> float:
    """
    Largest scalar-channel noise power at which joint thresholding achieves alpha.

    xi_J(alpha) / (xi_J(1 - alpha kappa / (1 - kappa)) - xi_J(alpha)); zero at alpha = 0.
    """
    _validated(kappa=kappa, snr=1.0, J=J, alpha=alpha)
    if not alpha < 1.0 - kappa:
        raise DomainError(f"alpha must be below 1 - kappa = {1.0 - kappa}, got {alpha}")
    if alpha == 0.0:
        return 0.0
    low = xi(alpha, J)
    high = xi(1.0 - alpha * kappa / (1.0 - kappa), J)
    return low / (high - low)


def two_stage_sigma2(kappa: float, snr: float, r: float, estimator_kind: EstimatorKind) -> float:
    """Scalar-channel noise power of the first-stage estimator at rate r."""
    kind = EstimatorKind(estimator_kind)
    if kind == EstimatorKind.MF:
        return mf_sigma2(kappa, snr, r)
    if kind == EstimatorKind.MMSE:
        return mmse_sigma2(kappa, snr, r)
    return lasso_best_lambda(kappa, snr, r).sigma2


def two_stage_rate(kappa: float, snr: float, J: int, alpha: float, estimator_kind: EstimatorKind) -> float:
    """
    Smallest total rate at which estimator + joint thresholding achieves alpha.

    Closed form for the matched filter; geometric bisection on r otherwise,
    using that sigma2 is nonincreasing in r and never below kappa / (r SNR).
    """
    _validated(kappa=kappa, snr=snr, J=J, alpha=alpha)
    kind = EstimatorKind(estimator_kind)
    target = sigma2_threshold(kappa, J, alpha)
    if target <= 0.0:
        raise UnachievableError("zero distortion is not achievable by thresholding")
    r_max = settings.max_rate_per_vector / J

    if kind == EstimatorKind.MF:
        r = kappa * (1.0 + 1.0 / snr) / target
        if r > r_max:
            raise UnachievableError(f"matched filter needs r={r:.6g} > {r_max:.6g}")
        return J * r

    def meets(r: float) -> bool:
        try:
            return two_stage_sigma2(kappa, snr, r, kind) <= target
        except ConvergenceError:
            return False

    lo, hi = kappa / (snr * target), r_max
    if lo >= hi or not meets(hi):
        raise UnachievableError(f"{kind.value} + thresholding misses alpha={alpha} for every r <= {r_max:.6g}")
    for _ in range(settings.rate_bisection_iterations):
        if hi / lo - 1.0 < 1e-9:
            break
        mid = math.sqrt(lo * hi)
        if meets(mid):
            hi = mid
        else:
            lo = mid
    return J * hi


# High SNR
def high_snr_envelopes(kappa: float, J: int, alpha: float, snr: float) -> Tuple[float, float]:
    """(J kappa + 2 H_b(kappa) / ln SNR, J kappa + 2 R(kappa, alpha) / ln SNR)."""
    _validated(kappa=kappa, snr=snr, J=J, alpha=alpha)
    if not snr > 1.0:
        raise DomainError(f"high-SNR envelopes need snr > 1, got {snr}")
    log_snr = math.log(snr)
    upper = J * kappa + 2.0 * binary_entropy(kappa) / log_snr
    lower = J * kappa + 2.0 * entropy_rate(kappa, alpha) / log_snr
    return upper, lower


# Distortion at fixed rate
def _last_crossing(
    g: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, target: float, rounds: int = 4, points: int = 33
) -> float:
    """Refine the point where g drops below target inside [lo, hi], g(lo) >= target > g(hi)."""
    for _ in range(rounds):
        grid = np.linspace(lo, hi, points)
        above = np.nonzero(g(grid) >= target)[0]
        last = int(above[-1]) if above.size else 0
        last = min(last, points - 2)
        lo, hi = float(grid[last]), float(grid[last + 1])
    return hi


def ns_distortion(kappa: float, snr: float, J: int, rho: float) -> float:
    """
    Smallest alpha the nearest-subspace bound certifies at total rate rho.

    Achievability at alpha needs rho - kappa J above the largest exponent on
    [alpha, 1], so the answer is the last beta whose exponent reaches it.
    Clamped to 1 - kappa when rho is below the bound everywhere.
    """
    _validated(kappa=kappa, snr=snr, J=J, rho=rho)
    ceiling = 1.0 - kappa
    target = rho - kappa * J
    if target <= 0.0:
        return ceiling
    profile = _beta_profile(J, 0.0, settings.beta_grid_points)
    exponent = _ns_exponent(profile, kappa, snr, J)
    above = np.nonzero(exponent >= target)[0]
    if above.size == 0:
        return 0.0
    last = int(above[-1])
    if last == exponent.size - 1 or profile.beta[last] >= ceiling:
        return ceiling

    def g(betas: np.ndarray) -> np.ndarray:
        return _ns_exponent(_make_profile(betas, J), kappa, snr, J)

    alpha = _last_crossing(g, float(profile.beta[last]), float(profile.beta[last + 1]), target)
    return min(alpha, ceiling)


def lower_bound_distortion(kappa: float, snr: float, J: int, rho: float) -> float:
    """Smallest alpha the converse does not rule out at total rate rho."""
    _validated(kappa=kappa, snr=snr, J=J, rho=rho)
    profile = _beta_profile(J, 0.0, settings.beta_grid_points)

    def margin(alpha: float) -> float:
        return _converse_margin(profile, kappa, snr, J, alpha, rho)

    if margin(0.0) <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0 - kappa
    for _ in range(settings.rho_bisection_iterations):
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def two_stage_distortion(
    kappa: float, snr: float, J: int, rho: float, estimator_kind: EstimatorKind
) -> float:
    """Smallest alpha with sigma2_threshold(alpha) at or above the estimator's noise power."""
    _validated(kappa=kappa, snr=snr, J=J, rho=rho)
    sigma2 = two_stage_sigma2(kappa, snr, rho / J, estimator_kind)
    ceiling = 1.0 - kappa
    hi = ceiling * (1.0 - 1e-12)
    if sigma2_threshold(kappa, J, hi) < sigma2:
        return ceiling
    lo = 0.0
    for _ in range(settings.rho_bisection_iterations):
        mid = 0.5 * (lo + hi)
        if sigma2_threshold(kappa, J, mid) >= sigma2:
            hi = mid
        else:
            lo = mid
    return hi


# Scaling diagnostics
def low_distortion_slope(kappa: float, snr: float, J: int, alphas: Sequence[float]) -> float:
    """
    Log-log slope of the nearest-subspace rate against 1/alpha.

    The rate above kappa J is divided by ln(1/alpha) before fitting, so the
    slope approaches 2/J when alpha is small.
    """
    values = np.sort(np.asarray(alphas, dtype=float))
    if values.size < 2 or values[0] <= 0.0 or values[-1] >= 1.0 - kappa:
        raise DomainError("need at least two distortions inside (0, 1 - kappa)")
    log_inverse = np.log(1.0 / values)
    excess = np.array([ns_upper_bound_rate(kappa, snr, J, float(a)) for a in values]) - kappa * J
    slope = np.polyfit(log_inverse, np.log(excess / log_inverse), 1)[0]
    return float(slope)


def optimal_diversity(
    kappa: float, snr: float, rho: float, J_values: Optional[Sequence[int]] = None
) -> DiversityChoice:
    """Nearest-subspace distortion at rate rho for each diversity, and the best one."""
    J_values = list(J_values or _DIVERSITIES)
    distortions = {int(J): ns_distortion(kappa, snr, int(J), rho) for J in J_values}
    best_J = min(distortions, key=lambda J: (distortions[J], J))
    return DiversityChoice(rho=rho, distortions=distortions, best_J=best_J)
