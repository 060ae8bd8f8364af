"""Finite Lyapunov exponents and the discontinuity experiment.

L_T(A) is the phase average of (1/T)·ln‖A_T(x)‖ over a uniform grid, with the products carried in polar form
so no horizon overflows.
"""

import logging
import math
from typing import Callable, Optional, Sequence, Union

import numpy as np

from cocyclab.arithmetic import (
    TWO_PI,
    Frequency,
    first_return,
    is_nonresonant,
    min_max_return,
    nonresonant_mask,
    orbit_points,
)
from cocyclab.construction import CocycleStage, Construction, build_stages
from cocyclab.errors import PreconditionFailed
from cocyclab.models import GapReport, GapRow, GrowthReport, InequalityCheck, LEEstimate, RunConfig, WindowReport
from cocyclab.parallel import map_ordered
from cocyclab.sl2 import PolarArrays, compose_arrays, fold, projective_distance

logger = logging.getLogger(__name__)

Cocycle = Union[CocycleStage, Callable[[np.ndarray], PolarArrays]]


def _frequency(cocycle: Cocycle, frequency: Optional[Frequency]) -> Frequency:
    if frequency is not None:
        return frequency
    if isinstance(cocycle, CocycleStage):
        return cocycle.frequency
    raise ValueError("a frequency is needed for a cocycle given as a function")


def phase_grid(G: int, shift: float = 0.0) -> np.ndarray:
    """G equally spaced phases starting at shift."""
    return np.mod(shift + TWO_PI * np.arange(G) / G, TWO_PI)


def log_norms(cocycle: Cocycle, xs, T: int, frequency: Optional[Frequency] = None,
              checkpoints: Sequence[int] = ()) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """ln‖A_T(x)‖ for every phase, plus ln‖A_t(x)‖ at each checkpoint t <= T."""
    frequency = _frequency(cocycle, frequency)
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    acc = PolarArrays.identity(xs.shape)
    wanted = set(checkpoints)
    saved = {}
    for t in range(T):
        acc = compose_arrays(cocycle(orbit_points(xs, frequency, t)), acc)
        if t + 1 in wanted:
            saved[t + 1] = np.array(acc.log_sigma, copy=True)
    return np.asarray(acc.log_sigma), saved


def _chunks(xs: np.ndarray, threads: int) -> list[np.ndarray]:
    return [c for c in np.array_split(xs, max(1, threads)) if c.size]


def _estimate(T: int, G: int, rates: np.ndarray, mask: Optional[np.ndarray] = None) -> LEEstimate:
    nonresonant_mean = None
    if mask is not None and np.any(mask):
        nonresonant_mean = math.fsum(rates[mask]) / int(np.count_nonzero(mask))
    return LEEstimate(
        T=T,
        G=G,
        mean=math.fsum(rates) / rates.size,
        minimum=float(np.min(rates)),
        maximum=float(np.max(rates)),
        std=float(np.std(rates)),
        nonresonant_mean=nonresonant_mean,
    )


def finite_le(
    cocycle: Cocycle,
    T: int,
    G: int,
    frequency: Optional[Frequency] = None,
    shift: float = 0.0,
    threads: int = 1,
) -> LEEstimate:
    """Space-averaged finite Lyapunov exponent over G phases.

    Args:
        cocycle: A stage, or a function mapping phases to polar matrices
        T: Iterations
        G: Phase grid size
        frequency: Rotation, taken from the stage when omitted
        shift: Rotation of the phase grid
        threads: Worker threads over chunks of the grid

    Returns:
        LEEstimate; the nonresonant mean is filled in for stages
    """
    if T < 1 or G < 1:
        raise ValueError("T and G must be positive")
    xs = phase_grid(G, shift)
    parts = map_ordered(lambda c: log_norms(cocycle, c, T, frequency)[0], _chunks(xs, threads), threads)
    rates = np.concatenate(parts) / T
    mask = None
    if isinstance(cocycle, CocycleStage):
        mask = nonresonant_mask(xs, cocycle.n, cocycle.geometry)
    estimate = _estimate(T, G, rates, mask)
    logger.debug("L_%d over %d phases: %.6f", T, G, estimate.mean)
    return estimate


def pointwise_le(cocycle: Cocycle, x: float, T: int, frequency: Optional[Frequency] = None) -> float:
    """(1/T)·ln‖A_T(x)‖ at one phase."""
    return float(log_norms(cocycle, [x], T, frequency)[0][0]) / T


def le_curve(cocycle: Cocycle, horizons: Sequence[int], G: int, frequency: Optional[Frequency] = None) -> list[float]:
    """Mean finite exponents at several horizons from one pass over the longest one."""
    horizons = sorted(set(horizons))
    _, saved = log_norms(cocycle, phase_grid(G), horizons[-1], frequency, checkpoints=horizons)
    return [math.fsum(saved[t]) / (G * t) for t in horizons]


def subadditivity_check(
    cocycle: Cocycle,
    G: int,
    doublings: int = 6,
    frequency: Optional[Frequency] = None,
    tolerance: float = 1e-2,
) -> list[InequalityCheck]:
    """mean_{2T} <= mean_T + tolerance for T = 1, 2, 4, ..."""
    horizons = [2**k for k in range(doublings + 1)]
    means = le_curve(cocycle, horizons, G, frequency)
    return [
        InequalityCheck(name=f"T={2 * t}", lhs=longer, rhs=shorter + tolerance, passed=longer <= shorter + tolerance)
        for t, shorter, longer in zip(horizons, means, means[1:])
    ]


def return_windows(stage: CocycleStage, xs, windows: int) -> list[int]:
    """Time of the windows-th return to I_n/10 for every phase in xs."""
    geometry = stage.geometry
    times = []
    for x in np.atleast_1d(xs):
        total = 0
        y = float(x)
        for _ in range(windows):
            total += first_return(y, geometry, stage.n, "forward", shrink=10.0)
            y = float(orbit_points(x, stage.frequency, total))
        times.append(total)
    return times


def localized_gap(
    corrected: CocycleStage, degenerate: CocycleStage, windows: int = 2, points: Optional[int] = None
) -> float:
    """Gap per step over return windows that start in I_n/10.

    Each phase x of an I_n/10 grid is iterated up to its windows-th return t_x to I_n/10, so every window
    crosses the support of ẽ_n at both ends. The result is the mean of (ln‖A_n^{t_x}(x)‖ − ln‖Ã_n^{t_x}(x)‖)/t_x.
    """
    if windows < 1:
        raise ValueError("windows must be positive")
    xs = corrected.geometry.grid(corrected.n, points or corrected.config.audit_grid, shrink=10.0)
    times = return_windows(corrected, xs, windows)
    horizon = max(times)
    _, a = log_norms(corrected, xs, horizon, checkpoints=times)
    _, b = log_norms(degenerate, xs, horizon, checkpoints=times)
    rates = [(a[t][i] - b[t][i]) / t for i, t in enumerate(times)]
    return math.fsum(rates) / len(rates)


def off_support_gap(
    corrected: CocycleStage, degenerate: CocycleStage, G: int, horizon: Optional[int] = None
) -> Optional[float]:
    """Gap over the grid phases whose orbit up to the horizon misses I_n/10.

    The horizon defaults to q_n. Returns None when no phase of the grid qualifies.
    """
    n = corrected.n
    horizon = horizon or corrected.geometry.q(n)
    xs = phase_grid(G)
    visits = corrected.geometry.contains(
        orbit_points(xs[None, :], corrected.frequency, np.arange(horizon)[:, None]), n, shrink=10.0
    )
    avoiding = ~np.any(visits, axis=0)
    if not np.any(avoiding):
        return None
    a = log_norms(corrected, xs[avoiding], horizon)[0]
    b = log_norms(degenerate, xs[avoiding], horizon)[0]
    return math.fsum(a - b) / (horizon * a.size)


def le_gap_experiment(
    config: RunConfig,
    construction: Optional[Construction] = None,
    doubling: bool = False,
) -> GapReport:
    """L_T(A_n) and L_T(Ã_n) for every stage with the desk-scale verdict thresholds.

    ε_desk = 1 − L_T(A_N)/ln λ + le_slack and δ_desk = ρ²/4 with ρ the measured return ratio at stage N.
    """
    if construction is None:
        construction = build_stages(config, config.stages, threads=config.threads)
    T, G, threads = config.T, config.G, config.threads
    rows = []
    for corrected, degenerate in construction.pairs():
        logger.info("stage %d: exponents at T=%d, G=%d", corrected.n, T, G)
        high = finite_le(corrected, T, G, threads=threads).mean
        low = finite_le(degenerate, T, G, threads=threads).mean
        gap_doubled = None
        if doubling:
            gap_doubled = (
                finite_le(corrected, 2 * T, G, threads=threads).mean
                - finite_le(degenerate, 2 * T, G, threads=threads).mean
            )
        rows.append(
            GapRow(
                stage=corrected.n,
                T=T,
                G=G,
                le_corrected=high,
                le_degenerate=low,
                log_lambda=config.log_lambda,
                gap_doubled=gap_doubled,
                localized_gap=localized_gap(corrected, degenerate),
                off_support_gap=off_support_gap(corrected, degenerate, G),
            )
        )
    first = construction.initial
    stats = min_max_return(first.geometry, first.n, config.return_grid, threads)
    epsilon_desk = 1.0 - rows[0].le_corrected / config.log_lambda + config.le_slack
    report = GapReport(
        rows=rows,
        log_lambda=config.log_lambda,
        epsilon_desk=epsilon_desk,
        delta_desk=stats.ratio**2 / 4.0,
        return_ratio=stats.ratio,
        le_ratio_floor=config.le_ratio_floor,
        gap_floor=config.gap_floor,
    )
    if not report.monotone_ok:
        logger.warning("a degenerate stage has a larger exponent than its corrected stage")
    return report


def nonresonant_growth_check(stage: CocycleStage, x: float, T: int, *, epsilon_desk: float) -> GrowthReport:
    """Growth of ‖A^j(x)‖ along the returns of a nonresonant phase to I_N.

    The ladder holds the times j < T with T^j x ∈ I_N, each with the deepest level k <= n such that
    T^j x ∈ I_k. At every ladder time j > 0 the angle between s(A^{−j}(T^j x)) and the contracted direction of
    the block up to the next ladder time (or T) is recorded. Margins are ln‖A^j(x)‖ − (1 − 2ε_desk)·j·ln λ with ε_desk
    measured by le_gap_experiment.

    Raises:
        PreconditionFailed: If x is resonant up to stage n
        ValueError: If epsilon_desk is negative
    """
    n = stage.n
    geometry = stage.geometry
    if not is_nonresonant(x, n, geometry):
        raise PreconditionFailed(f"x={x:.12g} is resonant up to stage {n}")
    if epsilon_desk < 0.0:
        raise ValueError("epsilon_desk must be non-negative")
    points = orbit_points(x, stage.frequency, np.arange(T))
    big_n = stage.config.start_index
    ladder = [int(j) for j in np.flatnonzero(geometry.contains(points, big_n))]
    on_ladder = set(ladder)
    levels = []
    for j in ladder:
        level = big_n
        while level < n and geometry.contains(points[j], level + 1):
            level += 1
        levels.append(level)

    factors = stage(points)
    prefix_u = []
    acc = PolarArrays.identity(())
    log_norm_at = {}
    for j in range(T):
        prefix_u.append(float(acc.u))
        if j in on_ladder:
            log_norm_at[j] = float(acc.log_sigma)
        acc = compose_arrays(factors[j], acc)
    angles = []
    stops = ladder[1:] + [T]
    for j, stop in zip(ladder, stops):
        if j == 0 or stop <= j:
            continue
        block = fold(factors[j:stop])
        angles.append(float(projective_distance(prefix_u[j], block.s)))
    rate = (1.0 - 2.0 * epsilon_desk) * stage.log_lambda
    times = [j for j in ladder if j > 0] + [T]
    values = [log_norm_at[j] for j in ladder if j > 0] + [float(acc.log_sigma)]
    return GrowthReport(
        x=float(x),
        ladder=ladder,
        levels=levels,
        angles=angles,
        log_norms=values,
        margins=[v - t * rate for t, v in zip(times, values)],
    )


def degenerate_upper_check(
    stage: CocycleStage, x: float, windows: int, rate: float, rho: Optional[float] = None
) -> WindowReport:
    """ln‖A^{n_j}(x)‖ <= (1 − ρ²/4)·n_j·rate + ln 2 along the first returns n_j of x to I_n/10.

    Args:
        stage: Usually a degenerate stage; a corrected stage serves as control
        x: Phase in I_n/10
        windows: Number of returns
        rate: Per-step rate, the corrected exponent L_T(A_n)
        rho: Return ratio, measured at stage n when omitted

    Raises:
        PreconditionFailed: If x lies outside I_n/10
    """
    n = stage.n
    geometry = stage.geometry
    if not geometry.contains(x, n, shrink=10.0):
        raise PreconditionFailed(f"x={x:.12g} lies outside I_{n}/10")
    if rho is None:
        rho = min_max_return(geometry, n, stage.config.return_grid).ratio
    returns = []
    y = float(x)
    total = 0
    for _ in range(windows):
        step = first_return(y, geometry, n, "forward", shrink=10.0)
        total += step
        returns.append(total)
        y = float(orbit_points(x, stage.frequency, total))
    products = log_norms(stage, [x], returns[-1], checkpoints=returns)[1]
    norms = [float(products[t][0]) for t in returns]
    factor = 1.0 - rho**2 / 4.0
    return WindowReport(
        x=float(x),
        rho=rho,
        rate=rate,
        returns=returns,
        log_norms=norms,
        bounds=[factor * t * rate + math.log(2.0) for t in returns],
    )
