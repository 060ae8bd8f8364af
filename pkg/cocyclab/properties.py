"""Seeded randomized property suites behind `cocyclab props`.

Every suite draws from its own numpy Generator seeded with (seed, suite index), so results do not depend on
which suites run or in which order.
"""

import logging
import math
from typing import Callable, Optional

import numpy as np

from cocyclab.errors import PreconditionFailed
from cocyclab.gevrey.bumps import Plateau, bump_coefficients, periodic_bump, sample_angle
from cocyclab.gevrey.functions import Affine, Sin, SmoothFunction
from cocyclab.gevrey.jets import JetSeries, faa_di_bruno_check, partition_identity_check
from cocyclab.gevrey.seminorm import gevrey_algebra_suite, seminorm_grid
from cocyclab.models import SuiteResult
from cocyclab.oracles import dense_compose
from cocyclab.sl2 import (
    HALF_PI,
    LogPolarSL2,
    cancellation_check,
    compose,
    compose_chain,
    projective_distance,
    young_check,
)

logger = logging.getLogger(__name__)

PI = math.pi


def _random_polar(rng: np.random.Generator, max_log: float) -> LogPolarSL2:
    return LogPolarSL2(rng.uniform(0.0, max_log), rng.uniform(0.0, PI), rng.uniform(0.0, PI))


def _result(name: str, trials: int, margins: list[float]) -> SuiteResult:
    return SuiteResult(
        name=name,
        trials=trials,
        violations=sum(1 for m in margins if m < 0.0),
        worst_margin=min(margins) if margins else None,
    )


def compose_oracle_suite(rng: np.random.Generator, trials: int) -> SuiteResult:
    """compose against the extended-precision dense product: 1e−10 relative in ln‖·‖, 1e−8 in angles."""
    margins = []
    for _ in range(trials):
        A = _random_polar(rng, 20.0)
        B = _random_polar(rng, 20.0)
        fast = compose(B, A)
        exact = dense_compose(B, A)
        margin = 1e-10 * max(1.0, exact.log_sigma) - abs(fast.log_sigma - exact.log_sigma)
        # angles are only defined away from the unit norm
        if exact.log_sigma > 1e-3:
            angle = max(projective_distance(fast.s, exact.s), projective_distance(fast.u, exact.u))
            margin = min(margin, 1e-8 - float(angle))
        margins.append(margin)
    return _result("compose_oracle", trials, margins)


def degenerate_angle_suite(rng: np.random.Generator, trials: int) -> SuiteResult:
    """Middle angle π/2 with equal norms gives a rotation; middle angle 0 adds the log norms."""
    margins = []
    for _ in range(trials):
        e = rng.uniform(0.0, 20.0)
        u = rng.uniform(0.0, PI)
        A = LogPolarSL2(e, u, rng.uniform(0.0, PI))
        aligned = LogPolarSL2(e, rng.uniform(0.0, PI), u)
        stacked = LogPolarSL2(rng.uniform(0.0, 20.0), rng.uniform(0.0, PI), u + HALF_PI)
        margins.append(1e-12 - compose(aligned, A).log_sigma)
        expected = A.log_sigma + stacked.log_sigma
        margins.append(1e-12 * max(1.0, expected) - abs(compose(stacked, A).log_sigma - expected))
    return _result("degenerate_angle", trials, margins)


def young_suite(rng: np.random.Generator, trials: int) -> SuiteResult:
    """ln‖A^n C‖ >= (m+n)(1−ε) ln μ + ln θ on random hyperbolic blocks with θ >= 0.01."""
    margins = []
    while len(margins) < trials:
        log_mu = rng.uniform(5.0, 20.0)
        length = int(rng.integers(1, 12))
        block = [LogPolarSL2.from_angle(log_mu, rng.uniform(PI / 4, 3 * PI / 4)) for _ in range(length)]
        C = _random_polar(rng, 60.0)
        if 0.5 * projective_distance(C.u, compose_chain(block).s) < 0.01:
            continue
        try:
            margins.append(young_check(block, C, log_mu, 0.2).margin)
        except PreconditionFailed:
            continue
    return _result("young", trials, margins)


def cancellation_suite(rng: np.random.Generator, trials: int) -> SuiteResult:
    """‖BA‖ <= 2·max(‖A‖/‖B‖, ‖B‖/‖A‖) when the expanded image of A is the contracted direction of B."""
    margins = []
    for _ in range(trials):
        A = _random_polar(rng, 20.0)
        B = LogPolarSL2(rng.uniform(0.0, 20.0), rng.uniform(0.0, PI), A.u)
        margins.append(cancellation_check(A, B).margin)
    return _result("cancellation", trials, margins)


def bump_table_suite(rng: np.random.Generator, trials: int) -> SuiteResult:
    """|a_i^n| <= (2ν+2)^{n+i}(ν+n)^{n−i} for ν ∈ {0.3, 0.5, 0.8}, n <= 40."""
    violations = 0
    checked = 0
    for nu in (0.3, 0.5, 0.8):
        table = bump_coefficients(nu, 40)
        violations += len(table.bound_violations())
        checked += 40 * 41 // 2
    return SuiteResult(name="bump_table", trials=checked, violations=violations)


def faa_di_bruno_suite(rng: np.random.Generator, trials: int) -> SuiteResult:
    """Jet composition against the partition sum on random jets, n <= 8."""
    margins = []
    for _ in range(trials):
        n = int(rng.integers(1, 9))
        f_jet = JetSeries(0.0, rng.uniform(-1.0, 1.0, n + 1))
        g_jet = JetSeries(float(f_jet.value), rng.uniform(-1.0, 1.0, n + 1))
        check = faa_di_bruno_check(g_jet, f_jet, n)
        margins.append(check.margin)
    return _result("faa_di_bruno", trials, margins)


def partition_suite(rng: np.random.Generator, trials: int) -> SuiteResult:
    """Σ k!/(k_1!⋯k_n!) R^k = R(1+R)^{n−1} for n <= 12 and R ∈ {−0.5, 0.1, 1, 2}."""
    margins = [partition_identity_check(n, R).margin for n in range(1, 13) for R in (-0.5, 0.1, 1.0, 2.0)]
    return _result("partition_identity", len(margins), margins)


def plateau_suite(rng: np.random.Generator, trials: int) -> SuiteResult:
    """Plateau is exactly 1 on the inner tenth and exactly 0 beyond the middle fifth."""
    margins = []
    for _ in range(trials):
        c1 = rng.uniform(0.0, PI)
        radius = 10.0 ** rng.uniform(-3.0, -0.5)
        f = Plateau(c1, radius, rng.uniform(2.0, 20.0))
        center = c1 + PI * rng.integers(0, 2)
        inner = center + rng.uniform(-0.099, 0.099) * radius
        outer = center + rng.choice([-1.0, 1.0]) * rng.uniform(0.201, 1.0) * radius
        margins.append(0.0 if f(inner) == 1.0 and f(outer) == 0.0 else -1.0)
    return _result("plateau", trials, margins)


def _family(rng: np.random.Generator, amplitude: float) -> SmoothFunction:
    kind = rng.integers(0, 3)
    c1 = rng.uniform(0.0, PI)
    if kind == 0:
        return float(amplitude) * Sin(Affine(float(rng.integers(1, 4)), rng.uniform(0.0, 2 * PI)))
    if kind == 1:
        return float(amplitude) * periodic_bump(c1, float(rng.choice([0.3, 0.5, 0.8])))
    return sample_angle(rng.uniform(1e-5, 9e-4), c1, float(rng.choice([0.3, 0.5, 0.8])))


def gevrey_algebra_battery(
    rng: np.random.Generator, trials: int, epsilon: float = 1e-6, k_max: int = 20, points: int = 256
) -> SuiteResult:
    """Gevrey algebra items on pairs (1 + small, family member) at s ∈ {2.2, 2.5, 3}."""
    pairs = min(trials, 50)
    grid = seminorm_grid(points)
    violations = 0
    margins = []
    for _ in range(pairs):
        s = float(rng.choice([2.2, 2.5, 3.0]))
        K = rng.uniform(2.0, 8.0)
        f = 1.0 + _family(rng, 10.0 ** rng.uniform(-9.0, -6.0))
        g = _family(rng, 10.0 ** rng.uniform(-9.0, -3.0))
        report = gevrey_algebra_suite(f, g, s, K, epsilon, k_max, grid)
        violations += report.violations
        margins.extend(item.margin for item in report.items if item.margin is not None and math.isfinite(item.margin))
    return SuiteResult(name="gevrey_algebra", trials=pairs, violations=violations,
                       worst_margin=min(margins) if margins else None)


SUITES: dict[str, Callable[[np.random.Generator, int], SuiteResult]] = {
    "compose_oracle": compose_oracle_suite,
    "degenerate_angle": degenerate_angle_suite,
    "young": young_suite,
    "cancellation": cancellation_suite,
    "bump_table": bump_table_suite,
    "faa_di_bruno": faa_di_bruno_suite,
    "partition_identity": partition_suite,
    "plateau": plateau_suite,
    "gevrey_algebra": gevrey_algebra_battery,
}


def run_suite(name: str, seed: int, trials: int) -> SuiteResult:
    """Run one suite by name."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}")
    index = list(SUITES).index(name)
    rng = np.random.default_rng([seed, index])
    result = SUITES[name](rng, trials)
    logger.debug("%s: %d violations over %d trials", name, result.violations, result.trials)
    return result


def run_all(seed: int, trials: int, names: Optional[list[str]] = None) -> list[SuiteResult]:
    """Run the named suites, all of them by default, in registry order."""
    return [run_suite(name, seed, trials) for name in (names or list(SUITES))]
