"""Sampled Gevrey seminorms and the numerical checks of the Gevrey algebra.

|f|_{s,K} = (4π²/3) sup_k (1+k)² |∂^k f| / (K^k (k!)^s). The estimate takes the max over k <= k_max and a
finite grid, so it is a lower estimate of the true value. All comparisons happen in log scale.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from cocyclab.arithmetic import TWO_PI, CriticalGeometry
from cocyclab.constants import DEFAULT_SEMINORM_GRID, DEFAULT_SEMINORM_KMAX, SEMINORM_PREFACTOR
from cocyclab.gevrey.functions import Cos, Derivative, Reciprocal, Sin, SmoothFunction, Sqrt
from cocyclab.models import AlgebraItem, AlgebraReport, GevreySeminorm, InequalityCheck

logger = logging.getLogger(__name__)

_LOG_TOL = 1e-12


def seminorm_grid(points: int = DEFAULT_SEMINORM_GRID, centers: Sequence[float] = (), width: float = 0.0,
                  refine: int = 0) -> np.ndarray:
    """Uniform grid on [0, 2π) plus `refine` extra points within `width` of each center."""
    grid = [np.linspace(0.0, TWO_PI, points, endpoint=False)]
    if refine and width > 0.0:
        for c in centers:
            grid.append(np.mod(c + np.linspace(-width, width, refine), TWO_PI))
    return np.unique(np.concatenate(grid))


def log_seminorm_terms(f: SmoothFunction, s: float, K: float, k_max: int, grid) -> np.ndarray:
    """ln of (4π²/3)(1+k)²|f^{(k)}(x)|/(K^k (k!)^s) for k = 0..k_max on axis 0."""
    grid = np.asarray(grid, dtype=np.float64)
    coeffs = f.jet(grid, k_max).coeffs
    k = np.arange(k_max + 1, dtype=np.float64).reshape(-1, 1)
    with np.errstate(divide="ignore"):
        log_c = np.log(np.abs(coeffs.reshape(k_max + 1, -1)))
    return math.log(SEMINORM_PREFACTOR) + 2.0 * np.log1p(k) - k * math.log(K) + (1.0 - s) * gammaln(k + 1.0) + log_c


def seminorm_estimate(
    f: SmoothFunction,
    s: float,
    K: float,
    k_max: int = DEFAULT_SEMINORM_KMAX,
    grid=None,
) -> GevreySeminorm:
    """Sampled |f|_{s,K} with the attaining order k* and point x*.

    Args:
        f: Function with jets up to k_max
        s: Gevrey exponent (> 1)
        K: Gevrey scale (> 0)
        k_max: Highest derivative order
        grid: Sample points, defaults to a uniform grid on [0, 2π)
    """
    if not K > 0.0:
        raise ValueError("K must be positive")
    if grid is None:
        grid = seminorm_grid()
    grid = np.atleast_1d(np.asarray(grid, dtype=np.float64))
    terms = log_seminorm_terms(f, s, K, k_max, grid)
    flat = int(np.argmax(terms))
    log_value = float(terms.flat[flat])
    if not np.isfinite(log_value):
        return GevreySeminorm(s=s, K=K, value=0.0, log_value=-math.inf, k_max=k_max, grid_size=grid.size)
    k_star, x_index = np.unravel_index(flat, terms.shape)
    return GevreySeminorm(
        s=s,
        K=K,
        value=math.exp(log_value) if log_value < 709.0 else math.inf,
        log_value=log_value,
        k_max=k_max,
        grid_size=grid.size,
        k_star=int(k_star),
        x_star=float(grid[x_index]),
    )


def _item(name: str, log_lhs: float, log_rhs: float) -> AlgebraItem:
    if log_lhs == -math.inf or log_rhs == math.inf:
        return AlgebraItem(name=name, status="passed", lhs=log_lhs, rhs=log_rhs)
    status = "passed" if log_lhs <= log_rhs + _LOG_TOL * max(1.0, abs(log_rhs)) else "violated"
    return AlgebraItem(name=name, status=status, lhs=log_lhs, rhs=log_rhs)


def gevrey_algebra_suite(
    f: SmoothFunction,
    g: SmoothFunction,
    s: float,
    K: float,
    epsilon: float,
    k_max: int = DEFAULT_SEMINORM_KMAX,
    grid=None,
) -> AlgebraReport:
    """Check the Gevrey algebra inequalities on estimated seminorms, both sides in log scale.

    Items:
        product: |fg|_{s,K} <= |f|_{s,K} |g|_{s,K}
        derivative: |∂f|_{s,(1+ε^{1/s})K} <= (K/ε) |f|_{s,K}
        reciprocal, sqrt: |1/h − 1| and |√h − 1| <= ε^{1/12} at the enlarged scales, when |h − 1|_{s,K} <= ε
        sin, cos: |sin h| and |cos h − 1| <= ε^{1/12} at (1+ε^{1/(s+8)})K, when |h|_{s,K} <= ε

    The last two groups run for h = f and h = g.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")

    def norm(h: SmoothFunction, scale: float) -> float:
        return seminorm_estimate(h, s, scale, k_max, grid).log_value

    log_f = norm(f, K)
    log_g = norm(g, K)
    items = [_item("product", norm(f * g, K), log_f + log_g)]
    # ∂f at order k_max involves f^{(k_max+1)}, so the right side goes one order further
    log_f_next = seminorm_estimate(f, s, K, k_max + 1, grid).log_value
    items.append(_item("derivative", norm(Derivative(f), (1.0 + epsilon ** (1.0 / s)) * K),
                       math.log(K / epsilon) + log_f_next))

    target = math.log(epsilon) / 12.0
    k8 = (1.0 + epsilon ** (1.0 / (s + 8.0))) * K
    k16 = (1.0 + epsilon ** (1.0 / (s + 16.0))) * K
    for label, h in (("f", f), ("g", g)):
        if norm(h - 1.0, K) <= math.log(epsilon):
            items.append(_item(f"reciprocal[{label}]", norm(Reciprocal(h) - 1.0, k8), target))
            items.append(_item(f"sqrt[{label}]", norm(Sqrt(h) - 1.0, k16), target))
        else:
            items.append(AlgebraItem(name=f"reciprocal[{label}]", status="precondition_failed"))
            items.append(AlgebraItem(name=f"sqrt[{label}]", status="precondition_failed"))
        if norm(h, K) <= math.log(epsilon):
            items.append(_item(f"sin[{label}]", norm(Sin(h), k8), target))
            items.append(_item(f"cos[{label}]", norm(Cos(h) - 1.0, k8), target))
        else:
            items.append(AlgebraItem(name=f"sin[{label}]", status="precondition_failed"))
            items.append(AlgebraItem(name=f"cos[{label}]", status="precondition_failed"))

    report = AlgebraReport(s=s, K=K, epsilon=epsilon, items=items)
    if report.violations:
        logger.warning("Gevrey algebra: %d violated items at s=%g, K=%g", report.violations, s, K)
    return report


def restricted_seminorm_decay(
    phi0: SmoothFunction,
    geometry: CriticalGeometry,
    stages: Sequence[int],
    s: float,
    K: float,
    gamma: float,
    k_max: int = DEFAULT_SEMINORM_KMAX,
    points: int = 65,
) -> list[InequalityCheck]:
    """Seminorm of φ₀ restricted to I_n against the reference scale e^{−q_n^γ/2}, one check per stage."""
    checks = []
    for n in stages:
        estimate = seminorm_estimate(phi0, s, K, k_max, geometry.grid(n, points))
        reference = -0.5 * geometry.q(n) ** gamma
        checks.append(
            InequalityCheck(
                name=f"I_{n}",
                lhs=estimate.log_value,
                rhs=reference,
                passed=estimate.log_value <= reference,
                vacuous=not math.isfinite(estimate.log_value),
                stage=n,
            )
        )
    return checks


def decay_rate(checks: Sequence[InequalityCheck]) -> Optional[float]:
    """Average drop of the log seminorm per stage, None with fewer than two finite stages.

    Checks without a stage index count by their position in the sequence.
    """
    points = [(i if c.stage is None else c.stage, c.lhs) for i, c in enumerate(checks) if math.isfinite(c.lhs)]
    if len(points) < 2:
        return None
    (first, high), (last, low) = points[0], points[-1]
    if last == first:
        raise ValueError("finite checks must span more than one stage")
    return (high - low) / (last - first)
