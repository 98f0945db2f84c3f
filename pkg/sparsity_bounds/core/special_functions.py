"""
Numerical kernels shared by every bound: gamma family, normal family,
chi-square quantiles and quadrature.

The incomplete gamma function follows the classical split: a power series
below ``a + 1`` and a modified-Lentz continued fraction above it. Both are
written over numpy arrays so that whole beta grids are evaluated in one call;
the scalar operations are thin wrappers around the array versions.
"""

import math
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import structlog

from sparsity_bounds.config import settings
from sparsity_bounds.structure.exceptions import ConvergenceError, DomainError, QuadratureError
from sparsity_bounds.structure.pydantic import QuadratureKind, QuadratureRule

logger = structlog.get_logger(__name__)

Domain = Optional[Tuple[float, float]]

SQRT_2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)

_FPMIN = 1e-300
_GAMMA_EPS = 1e-15


# Gamma family
def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not x > 0.0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def _check_dof(dof: int) -> None:
    if int(dof) != dof or dof < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {dof}")


def _regularized_gamma(a: float, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Regularized lower and upper incomplete gamma P(a, x), Q(a, x) for x >= 0."""
    x = np.asarray(x, dtype=float)
    lower = np.zeros_like(x)
    upper = np.ones_like(x)
    infinite = np.isinf(x)
    lower[infinite] = 1.0
    upper[infinite] = 0.0

    positive = (x > 0.0) & ~infinite
    series = positive & (x < a + 1.0)
    fraction = positive & ~series
    gln = math.lgamma(a)
    max_iter = settings.gamma_series_max_iter

    if np.any(series):
        xs = x[series]
        ap = np.full_like(xs, a)
        term = np.full_like(xs, 1.0 / a)
        total = term.copy()
        for _ in range(max_iter):
            ap += 1.0
            term *= xs / ap
            total += term
            if np.all(np.abs(term) < np.abs(total) * _GAMMA_EPS):
                break
        else:
            logger.warning("gamma_series_iteration_cap", a=a, max_iter=max_iter)
        ps = total * np.exp(-xs + a * np.log(xs) - gln)
        lower[series] = ps
        upper[series] = 1.0 - ps

    if np.any(fraction):
        xf = x[fraction]
        b = xf + 1.0 - a
        c = np.full_like(xf, 1.0 / _FPMIN)
        d = 1.0 / b
        h = d.copy()
        for i in range(1, max_iter + 1):
            an = -i * (i - a)
            b = b + 2.0
            d = an * d + b
            d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
            c = b + an / c
            c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
            d = 1.0 / d
            delta = d * c
            h = h * delta
            if np.all(np.abs(delta - 1.0) < _GAMMA_EPS):
                break
        else:
            logger.warning("gamma_fraction_iteration_cap", a=a, max_iter=max_iter)
        qf = np.exp(-xf + a * np.log(xf) - gln) * h
        upper[fraction] = qf
        lower[fraction] = 1.0 - qf

    return lower, upper


def chi2_cdf_array(t, dof: int) -> np.ndarray:
    """Elementwise P[chi2_dof <= t]."""
    _check_dof(dof)
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < 0.0):
        raise DomainError("chi2_cdf requires t >= 0")
    return _regularized_gamma(dof / 2.0, t / 2.0)[0]


def chi2_sf_array(t, dof: int) -> np.ndarray:
    """Elementwise P[chi2_dof > t], accurate in the far upper tail."""
    _check_dof(dof)
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < 0.0):
        raise DomainError("chi2_sf requires t >= 0")
    return _regularized_gamma(dof / 2.0, t / 2.0)[1]


def chi2_pdf_array(t, dof: int) -> np.ndarray:
    _check_dof(dof)
    t = np.asarray(t, dtype=float)
    a = dof / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.exp((a - 1.0) * np.log(t) - t / 2.0 - a * math.log(2.0) - math.lgamma(a))
    at_zero = {1: np.inf, 2: 0.5}.get(dof, 0.0)
    return np.where(t > 0.0, dens, at_zero)


def chi2_cdf(t: float, dof: int) -> float:
    """P[chi2_dof <= t], the regularized lower incomplete gamma P(dof/2, t/2)."""
    if not t >= 0.0:
        raise DomainError(f"chi2_cdf requires t >= 0, got {t}")
    return float(chi2_cdf_array(np.array([t]), dof)[0])


def chi2_sf(t: float, dof: int) -> float:
    if not t >= 0.0:
        raise DomainError(f"chi2_sf requires t >= 0, got {t}")
    return float(chi2_sf_array(np.array([t]), dof)[0])


def chi2_pdf(t: float, dof: int) -> float:
    if not t >= 0.0:
        raise DomainError(f"chi2_pdf requires t >= 0, got {t}")
    return float(chi2_pdf_array(np.array([t]), dof)[0])


def xi_array(p, J: int) -> np.ndarray:
    """
    Quantile of the normalized chi-square (1/J) chi2_J, elementwise in p.

    Safeguarded Newton inside the bracket [0, J + 20 sqrt(2J) + 40] on the
    unnormalized scale: a Newton step leaving the bracket is replaced by
    bisection. For p > 1/2 the residual is formed on the upper tail so that
    quantiles close to p = 1 keep full precision.
    """
    _check_dof(J)
    p = np.asarray(p, dtype=float)
    if np.any(np.isnan(p)) or np.any(p < 0.0) or np.any(p >= 1.0):
        raise DomainError("xi requires 0 <= p < 1")
    out = np.zeros_like(p)
    active = p > 0.0
    if not np.any(active):
        return out

    target = p[active]
    use_tail = target > 0.5
    tail = 1.0 - target
    a = J / 2.0
    lo = np.zeros_like(target)
    hi = np.full_like(target, J + 20.0 * math.sqrt(2.0 * J) + 40.0)
    t = np.full_like(target, float(J))
    tol = settings.quantile_tol * J

    for _ in range(400):
        lower, upper = _regularized_gamma(a, t / 2.0)
        resid = np.where(use_tail, tail - upper, lower - target)
        lo = np.where(resid < 0.0, t, lo)
        hi = np.where(resid > 0.0, t, hi)
        dens = chi2_pdf_array(t, J)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = t - resid / dens
        inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
        t_new = np.where(inside, newton, 0.5 * (lo + hi))
        t_new = np.where(resid == 0.0, t, t_new)
        converged = (np.abs(t_new - t) <= tol) | (hi - lo <= tol)
        t = t_new
        if np.all(converged):
            break
    else:
        raise ConvergenceError("chi-square quantile did not converge", 400)

    out[active] = t / J
    return out


@lru_cache(maxsize=65536)
def _xi_cached(p: float, J: int) -> float:
    return float(xi_array(np.array([p]), J)[0])


def xi(p: float, J: int) -> float:
    """xi_J(p): the t with P[(1/J) chi2_J <= t] = p; xi_J(0) = 0."""
    _check_dof(J)
    if not 0.0 <= p < 1.0:
        raise DomainError(f"xi requires 0 <= p < 1, got {p}")
    return _xi_cached(float(p), int(J))


# Normal family
def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / SQRT_2)


def normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / SQRT_2)


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / SQRT_2PI


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF by safeguarded Newton on log Phi."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"normal_quantile requires 0 < p < 1, got {p}")
    if p == 0.5:
        return 0.0
    target = min(p, 1.0 - p)
    log_target = math.log(target)
    lo, hi = -40.0, 0.0
    z = -math.sqrt(-2.0 * log_target)
    tol = settings.quantile_tol / 10.0
    for _ in range(200):
        cdf = normal_cdf(z)
        resid = math.log(cdf) - log_target
        if resid < 0.0:
            lo = z
        elif resid > 0.0:
            hi = z
        else:
            break
        step = resid * cdf / normal_pdf(z)
        z_new = z - step
        if not lo < z_new < hi:
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) <= tol:
            z = z_new
            break
        z = z_new
    else:
        raise ConvergenceError("normal quantile did not converge", 200)
    return z if p < 0.5 else -z


# Quadrature
def gauss_hermite_rule(order: Optional[int] = None) -> QuadratureRule:
    """Physicists' Gauss-Hermite rule for the weight exp(-x^2)."""
    return _gauss_hermite_rule(order or settings.gauss_hermite_order)


@lru_cache(maxsize=32)
def _gauss_hermite_rule(order: int) -> QuadratureRule:
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    return QuadratureRule(nodes=nodes.tolist(), weights=weights.tolist(), kind=QuadratureKind.GAUSS_HERMITE)


@lru_cache(maxsize=32)
def gauss_legendre_rule(order: int = 32) -> QuadratureRule:
    """Gauss-Legendre rule on the reference interval [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return QuadratureRule(nodes=nodes.tolist(), weights=weights.tolist(), kind=QuadratureKind.GAUSS_LEGENDRE)


def simpson_rule() -> QuadratureRule:
    """Simpson pattern on [0, 1]; the adaptive driver refines it recursively."""
    return QuadratureRule(nodes=[0.0, 0.5, 1.0], weights=[1 / 6, 2 / 3, 1 / 6], kind=QuadratureKind.ADAPTIVE_SIMPSON)


def _finite_values(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise DomainError("integrand is not finite on the quadrature nodes")
    return values


def integrate(f: Callable, rule: QuadratureRule, domain: Domain = None) -> float:
    """
    Weighted sum of ``f`` over the rule's nodes.

    Gauss-Hermite integrates against the standard normal density over the
    whole line (``domain`` must be None). Gauss-Legendre maps its reference
    nodes onto a finite ``domain``. Adaptive Simpson accepts finite,
    half-infinite or whole-line domains and refines until successive
    estimates agree to ``settings.simpson_rtol``.
    """
    if rule.kind == QuadratureKind.GAUSS_HERMITE:
        if domain is not None:
            raise DomainError("Gauss-Hermite integrates over the whole line")
        nodes = SQRT_2 * np.asarray(rule.nodes)
        values = _finite_values(np.asarray(f(nodes), dtype=float))
        return float(np.dot(rule.weights, values) / SQRT_PI)

    if rule.kind == QuadratureKind.GAUSS_LEGENDRE:
        if domain is None or not all(math.isfinite(v) for v in domain):
            raise DomainError("Gauss-Legendre needs a finite domain")
        a, b = domain
        half = 0.5 * (b - a)
        nodes = half * np.asarray(rule.nodes) + 0.5 * (a + b)
        values = _finite_values(np.asarray(f(nodes), dtype=float))
        return float(half * np.dot(rule.weights, values))

    a, b = domain if domain is not None else (-math.inf, math.inf)
    return _adaptive_simpson(f, a, b)


def _adaptive_simpson(f: Callable[[float], float], a: float, b: float) -> float:
    if a == b:
        return 0.0
    if a > b:
        return -_adaptive_simpson(f, b, a)
    if math.isinf(a) and math.isinf(b):
        return _adaptive_simpson(f, -math.inf, 0.0) + _adaptive_simpson(f, 0.0, math.inf)
    if math.isinf(b):
        def g(t: float) -> float:
            return 0.0 if t >= 1.0 else f(a + t / (1.0 - t)) / (1.0 - t) ** 2
        return _simpson_core(g, 0.0, 1.0)
    if math.isinf(a):
        def g(t: float) -> float:
            return 0.0 if t >= 1.0 else f(b - t / (1.0 - t)) / (1.0 - t) ** 2
        return _simpson_core(g, 0.0, 1.0)
    return _simpson_core(f, a, b)


def _simpson_core(g: Callable[[float], float], a: float, b: float) -> float:
    rtol = settings.simpson_rtol
    max_depth = settings.simpson_max_depth
    pieces = 16
    width = (b - a) / pieces
    xs = [a + i * width / 2.0 for i in range(2 * pieces + 1)]
    gs = [float(g(x)) for x in xs]
    if not all(math.isfinite(v) for v in gs):
        raise DomainError("integrand is not finite on the quadrature nodes")

    coarse = sum(width / 6.0 * (gs[2 * i] + 4.0 * gs[2 * i + 1] + gs[2 * i + 2]) for i in range(pieces))
    tol = max(rtol * abs(coarse), 1e-15)

    total = 0.0
    stack = [
        (xs[2 * i], xs[2 * i + 2], gs[2 * i], gs[2 * i + 1], gs[2 * i + 2],
         width / 6.0 * (gs[2 * i] + 4.0 * gs[2 * i + 1] + gs[2 * i + 2]), tol / pieces, 0)
        for i in range(pieces)
    ]
    while stack:
        lo, hi, f_lo, f_mid, f_hi, whole, local_tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left_mid, right_mid = 0.5 * (lo + mid), 0.5 * (mid + hi)
        f_lm, f_rm = float(g(left_mid)), float(g(right_mid))
        if not (math.isfinite(f_lm) and math.isfinite(f_rm)):
            raise DomainError("integrand is not finite on the quadrature nodes")
        h = (hi - lo) / 12.0
        left = h * (f_lo + 4.0 * f_lm + f_mid)
        right = h * (f_mid + 4.0 * f_rm + f_hi)
        delta = left + right - whole
        if abs(delta) <= 15.0 * local_tol:
            total += left + right + delta / 15.0
        elif depth >= max_depth:
            raise QuadratureError("adaptive Simpson exceeded its refinement depth", total + whole, depth)
        else:
            stack.append((lo, mid, f_lo, f_lm, f_mid, left, local_tol / 2.0, depth + 1))
            stack.append((mid, hi, f_mid, f_rm, f_hi, right, local_tol / 2.0, depth + 1))
    return total


def integrate_split(
    f: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float],
    rtol: Optional[float] = None,
    order: int = 32,
    max_doublings: int = 5,
) -> float:
    """
    Composite Gauss-Legendre over consecutive breakpoints.

    The order doubles until two successive composite estimates agree to
    ``rtol``; ``f`` must accept numpy arrays.
    """
    rtol = rtol or settings.split_rtol
    edges = sorted(set(float(x) for x in breakpoints))
    if len(edges) < 2 or not all(math.isfinite(x) for x in edges):
        raise DomainError("integrate_split needs at least two finite breakpoints")

    lows = np.asarray(edges[:-1])[:, None]
    highs = np.asarray(edges[1:])[:, None]

    def composite(n: int) -> float:
        rule = gauss_legendre_rule(n)
        half = 0.5 * (highs - lows)
        nodes = half * np.asarray(rule.nodes)[None, :] + 0.5 * (lows + highs)
        values = _finite_values(np.asarray(f(nodes.ravel()), dtype=float)).reshape(nodes.shape)
        return math.fsum((half[:, 0] * (values @ np.asarray(rule.weights))).tolist())

    previous = composite(order)
    for _ in range(max_doublings):
        order *= 2
        current = composite(order)
        if abs(current - previous) <= rtol * abs(current) + 1e-300:
            return current
        previous = current
    raise QuadratureError("composite Gauss-Legendre did not converge", previous, order)


def expect_normal(f: Callable, kinks: Sequence[float] = (), rule: Optional[QuadratureRule] = None) -> float:
    """
    E[f(Z)] for Z standard normal.

    Without kinks the Gauss-Hermite rule is used; otherwise the line is split
    at the kinks and each piece of f(x) phi(x) is integrated adaptively.
    """
    if not kinks:
        return integrate(f, rule or gauss_hermite_rule())
    edges = [-math.inf] + sorted(kinks) + [math.inf]

    def weighted(x: float) -> float:
        return float(f(x)) * normal_pdf(x)

    return math.fsum(integrate(weighted, simpson_rule(), (lo, hi)) for lo, hi in zip(edges, edges[1:]))
