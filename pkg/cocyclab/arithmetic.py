"""Continued fractions, circle orbits, first returns to the critical intervals and the λ_n schedules.

Frequencies are always given by a prefix of partial quotients. The real value α is the prefix followed by
its last quotient repeated forever, reconstructed in extended precision with mpmath. Orbit points use a
three-way split of α so that x + 2πiα is accurate to double precision for |i| < 2**27.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional, Sequence, Union

import numpy as np
from mpmath import mp

from cocyclab.constants import FREQUENCY_PRESETS, ORACLE_DPS
from cocyclab.errors import ReturnNotFound
from cocyclab.models import ExperimentConfig, ReturnStats
from cocyclab.parallel import map_ordered

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
_SPLIT_LIMIT = 2**27
_RETURN_CHUNK = 4096
_PHASE_ULPS = 8 * float(np.spacing(TWO_PI))

Direction = Literal["forward", "backward"]


def convergents(partial_quotients: Sequence[int], count: Optional[int] = None) -> list[tuple[int, int]]:
    """Convergents p_k / q_k of [0; a_1, a_2, ...] for k = 1..count.

    Args:
        partial_quotients: The prefix a_1, a_2, ... (all positive)
        count: Number of convergents, defaults to the prefix length

    Returns:
        List of (p_k, q_k) integer pairs

    Raises:
        ValueError: On an empty prefix, a non-positive quotient or a count beyond the prefix
    """
    if not partial_quotients:
        raise ValueError("partial quotient list is empty")
    if any(a < 1 for a in partial_quotients):
        raise ValueError("partial quotients must be positive integers")
    if count is None:
        count = len(partial_quotients)
    if not 0 <= count <= len(partial_quotients):
        raise ValueError(f"count must lie in [0, {len(partial_quotients)}]")

    p_prev, p = 1, 0
    q_prev, q = 0, 1
    result = []
    for a in partial_quotients[:count]:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        result.append((p, q))
    return result


@dataclass(frozen=True)
class Frequency:
    """A bounded-type rotation number given by its partial quotient prefix."""

    partial_quotients: tuple[int, ...]
    bound: int

    @classmethod
    def from_partial_quotients(cls, partial_quotients: Sequence[int], bound: Optional[int] = None) -> "Frequency":
        """Build a frequency, deriving the smallest bound M when none is given."""
        pq = tuple(int(a) for a in partial_quotients)
        qs = [1] + [q for _, q in convergents(pq)]
        smallest = max(math.ceil(b / a) for a, b in zip(qs, qs[1:]))
        if bound is None:
            bound = smallest
        elif bound < smallest:
            raise ValueError(f"prefix is not of type M={bound}: needs M >= {smallest}")
        return cls(partial_quotients=pq, bound=bound)

    @classmethod
    def preset(cls, name: str, length: int) -> "Frequency":
        """Golden or silver prefix of the given length."""
        if name not in FREQUENCY_PRESETS:
            raise ValueError(f"unknown frequency preset {name!r}")
        return cls.from_partial_quotients([FREQUENCY_PRESETS[name]] * length)

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "Frequency":
        """Frequency named by an experiment configuration, widening M when the prefix needs it."""
        derived = cls.from_partial_quotients(config.quotients())
        if config.bound_m < derived.bound:
            logger.warning("prefix needs M=%d, configured bound_m=%d ignored", derived.bound, config.bound_m)
            return derived
        return cls(partial_quotients=derived.partial_quotients, bound=config.bound_m)

    @cached_property
    def convergents(self) -> list[tuple[int, int]]:
        """All stored convergents (p_k, q_k), k >= 1."""
        return convergents(self.partial_quotients)

    def q(self, n: int) -> int:
        """Denominator q_n, with q_0 = 1."""
        if n == 0:
            return 1
        return self.convergents[n - 1][1]

    def p(self, n: int) -> int:
        """Numerator p_n, with p_0 = 0."""
        if n == 0:
            return 0
        return self.convergents[n - 1][0]

    @property
    def depth(self) -> int:
        """Number of stored convergents."""
        return len(self.partial_quotients)

    @cached_property
    def value(self) -> mp.mpf:
        """α in extended precision, the prefix continued by its last quotient."""
        with mp.workdps(ORACLE_DPS):
            a = self.partial_quotients[-1]
            x = (a + mp.sqrt(a * a + 4)) / 2
            for a in reversed(self.partial_quotients):
                x = a + 1 / x
            return 1 / x

    @property
    def alpha(self) -> float:
        """α rounded to double precision."""
        return float(self.value)

    @cached_property
    def _split(self) -> tuple[float, float, float]:
        with mp.workdps(ORACLE_DPS):
            hi = mp.floor(self.value * 2**26) / 2**26
            rest = self.value - hi
            mid = mp.floor(rest * 2**52) / 2**52
            lo = rest - mid
            return float(hi), float(mid), float(lo)

    def rotation_fraction(self, indices) -> np.ndarray:
        """Fractional part of i·α for integer indices, in [0, 1)."""
        i = np.asarray(indices)
        if i.size and np.max(np.abs(i)) >= _SPLIT_LIMIT:
            return _fraction_mp(self.value, i)
        i = i.astype(np.float64)
        hi, mid, lo = self._split
        frac = np.modf(i * hi)[0] + np.modf(i * mid)[0] + i * lo
        return np.mod(frac, 1.0)


def _fraction_mp(alpha, indices: np.ndarray) -> np.ndarray:
    with mp.workdps(ORACLE_DPS):
        a = mp.mpf(alpha)
        flat = [float(mp.frac(int(i) * a)) for i in np.ravel(indices)]
    return np.mod(np.array(flat, dtype=np.float64).reshape(np.shape(indices)), 1.0)


def orbit_point(x: float, alpha: Union[Frequency, float], i: int) -> float:
    """T^i x = x + 2πiα reduced mod 2π, computed in one multiply-reduce step."""
    if isinstance(alpha, Frequency):
        frac = float(alpha.rotation_fraction(np.array([i]))[0])
    else:
        frac = float(_fraction_mp(alpha, np.array([i]))[0])
    return float(np.mod(x + TWO_PI * frac, TWO_PI))


def orbit_points(x, frequency: Frequency, indices) -> np.ndarray:
    """T^i x for every index, broadcasting x against indices."""
    frac = frequency.rotation_fraction(indices)
    return np.mod(np.asarray(x, dtype=np.float64) + TWO_PI * frac, TWO_PI)


def circle_distance(x, y) -> np.ndarray:
    """Distance on the circle R / 2πZ."""
    d = np.mod(np.asarray(x) - np.asarray(y), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def projective_offset(x, center) -> np.ndarray:
    """Signed offset of x from the nearest point of {center, center + π}, in [-π/2, π/2)."""
    return np.mod(np.asarray(x) - center + math.pi / 2, math.pi) - math.pi / 2


@dataclass(frozen=True)
class CriticalGeometry:
    """The critical set {c1, c1 + π} and its shrinking intervals I_n."""

    frequency: Frequency
    c1: float
    beta: float
    start_index: int = 1
    cap_exponent: int = 4

    @classmethod
    def from_config(cls, config: ExperimentConfig, frequency: Optional[Frequency] = None) -> "CriticalGeometry":
        """Geometry named by an experiment configuration."""
        return cls(
            frequency=frequency or Frequency.from_config(config),
            c1=config.c1,
            beta=config.beta,
            start_index=config.start_index,
            cap_exponent=config.return_cap_exponent,
        )

    @property
    def c2(self) -> float:
        """The antipodal critical point c1 + π."""
        return self.c1 + math.pi

    @property
    def centers(self) -> tuple[float, float]:
        """Both critical points."""
        return (self.c1, self.c2)

    def q(self, n: int) -> int:
        """Denominator q_n of the frequency."""
        return self.frequency.q(n)

    def radius(self, n: int, shrink: float = 1.0) -> float:
        """Half-width q_n^{-β} / shrink of each component of I_n / shrink."""
        return self.q(n) ** (-self.beta) / shrink

    def cap(self, n: int) -> int:
        """Default return scan cap q_n ** cap_exponent."""
        return self.q(n) ** self.cap_exponent

    def distance(self, x) -> np.ndarray:
        """dist(x, C_0)."""
        return np.abs(projective_offset(x, self.c1))

    def contains(self, x, n: int, shrink: float = 1.0) -> np.ndarray:
        """Membership in the closed set I_n / shrink, up to the rounding of phases in [0, 2π)."""
        return self.distance(x) <= self.radius(n, shrink) + _PHASE_ULPS

    def intervals(self, n: int, shrink: float = 1.0) -> list[tuple[float, float]]:
        """The two components [c_i − r, c_i + r]."""
        r = self.radius(n, shrink)
        return [(c - r, c + r) for c in self.centers]

    def component(self, x) -> np.ndarray:
        """Index 0 or 1 of the critical point nearest to x."""
        d = np.mod(np.asarray(x) - self.c1, TWO_PI)
        return ((d >= math.pi / 2) & (d < 3 * math.pi / 2)).astype(int)

    def grid(self, n: int, points: int, shrink: float = 1.0, inner: float = 0.0) -> np.ndarray:
        """Uniform grid on both components of I_n / shrink.

        Args:
            n: Stage index
            points: Points per component
            shrink: Interval shrink factor
            inner: Exclude offsets with |offset| < inner·radius (annulus grids)

        Returns:
            Grid points reduced to [0, 2π), first component first
        """
        r = self.radius(n, shrink)
        offsets = np.linspace(-r, r, points)
        if inner > 0.0:
            offsets = offsets[np.abs(offsets) >= inner * r]
        return np.concatenate([np.mod(c + offsets, TWO_PI) for c in self.centers])


def first_return(
    x: float,
    geometry: CriticalGeometry,
    n: int,
    direction: Direction = "forward",
    cap: Optional[int] = None,
    shrink: float = 1.0,
) -> int:
    """Smallest i in [1, cap] with T^{±i} x in I_n / shrink.

    Raises:
        ReturnNotFound: If no return happens before the cap
    """
    if cap is None:
        cap = geometry.cap(n)
    sign = 1 if direction == "forward" else -1
    for start in range(1, cap + 1, _RETURN_CHUNK):
        idx = np.arange(start, min(start + _RETURN_CHUNK, cap + 1))
        hits = geometry.contains(orbit_points(x, geometry.frequency, sign * idx), n, shrink)
        if hits.any():
            return int(idx[np.argmax(hits)])
    raise ReturnNotFound(x, n, cap)


def min_return_time(geometry: CriticalGeometry, n: int, shrink: float = 1.0, cap: Optional[int] = None) -> int:
    """Exact minimum of the first return time over all of I_n / shrink.

    Some point of I_n returns after i steps iff the rotation by 2πiα moves one component onto itself or
    onto the antipodal one within twice the radius.
    """
    if cap is None:
        cap = geometry.cap(n)
    width = 2.0 * geometry.radius(n, shrink)
    for start in range(1, cap + 1, _RETURN_CHUNK):
        idx = np.arange(start, min(start + _RETURN_CHUNK, cap + 1))
        shift = np.abs(projective_offset(TWO_PI * geometry.frequency.rotation_fraction(idx), 0.0))
        hits = shift <= width
        if hits.any():
            return int(idx[np.argmax(hits)])
    raise ReturnNotFound(geometry.c1, n, cap)


def min_max_return(geometry: CriticalGeometry, n: int, grid_size: int, threads: int = 1) -> ReturnStats:
    """Min of r_n^± over an I_n grid and max first return to I_n/10 over an I_n/10 grid."""
    outer = geometry.grid(n, grid_size)
    inner = geometry.grid(n, grid_size, shrink=10.0)

    def both_directions(x: float) -> int:
        return min(first_return(x, geometry, n, "forward"), first_return(x, geometry, n, "backward"))

    def tenth_return(x: float) -> int:
        return first_return(x, geometry, n, "forward", shrink=10.0)

    shortest = min(map_ordered(both_directions, outer, threads))
    longest = max(map_ordered(tenth_return, inner, threads))
    stats = ReturnStats(n=n, q=geometry.q(n), min_return=shortest, max_return_tenth=longest)
    logger.debug("stage %d: min return %d, max return to I_n/10 %d", n, shortest, longest)
    return stats


def _resonance_thresholds(geometry: CriticalGeometry, n: int) -> np.ndarray:
    big_n = geometry.start_index
    if n < big_n:
        raise ValueError(f"nonresonance is defined for n >= N = {big_n}")
    thresholds = np.full(geometry.q(n), geometry.radius(big_n))
    for k in range(big_n + 1, n + 1):
        thresholds[geometry.q(k - 1) : geometry.q(k)] = geometry.radius(k)
    return thresholds


def is_nonresonant(x: float, n: int, geometry: CriticalGeometry) -> bool:
    """Whether the orbit of x keeps the distances to C_0 required up to stage n (strict inequalities)."""
    thresholds = _resonance_thresholds(geometry, n)
    points = orbit_points(x, geometry.frequency, np.arange(thresholds.size))
    return bool(np.all(geometry.distance(points) > thresholds))


def nonresonant_mask(xs, n: int, geometry: CriticalGeometry) -> np.ndarray:
    """Vectorised is_nonresonant over an array of phases."""
    thresholds = _resonance_thresholds(geometry, n)
    xs = np.asarray(xs, dtype=np.float64)
    points = orbit_points(xs[:, None], geometry.frequency, np.arange(thresholds.size)[None, :])
    return np.all(geometry.distance(points) > thresholds[None, :], axis=1)


def nonresonant_fraction(geometry: CriticalGeometry, n: int, grid_size: int) -> tuple[float, float]:
    """Measured nonresonant fraction of a uniform grid and the lower bound 1 − Σ_{N<=k<n} q_k^{1−β}."""
    xs = np.linspace(0.0, TWO_PI, grid_size, endpoint=False)
    fraction = float(np.mean(nonresonant_mask(xs, n, geometry)))
    bound = 1.0 - math.fsum(geometry.q(k) ** (1.0 - geometry.beta) for k in range(geometry.start_index, n))
    return fraction, bound


@dataclass(frozen=True)
class LambdaSchedule:
    """The decreasing rates ln λ_n and the increasing rates ln λ̃_n, indexed from N."""

    log_lambda: float
    epsilon: float
    gamma: float
    coeff: float
    start_index: int
    q: tuple[int, ...]
    lower: tuple[float, ...] = field(default=())
    upper: tuple[float, ...] = field(default=())
    increments: float = 0.0

    @property
    def absorbed(self) -> bool:
        """Whether Σ coeff·q_i^{γ−1} < ε ln λ, so that λ_∞ >= λ^{1−2ε}."""
        return self.increments < self.epsilon * self.log_lambda

    def at(self, n: int) -> tuple[float, float]:
        """(ln λ_n, ln λ̃_n) at stage n."""
        k = n - self.start_index
        if not 0 <= k < len(self.lower):
            raise IndexError(f"stage {n} outside the schedule")
        return self.lower[k], self.upper[k]


def lambda_schedule(config: ExperimentConfig, q: Sequence[int]) -> LambdaSchedule:
    """Schedules ln λ_{n+1} = ln λ_n − coeff·q_{n+1}^{γ−1} and ln λ̃_{n+1} = ln λ̃_n + coeff·q_{n+1}^{γ−1}.

    Args:
        config: Supplies ln λ, ε, γ, the coefficient and N
        q: Denominators q_N, q_{N+1}, ...

    Returns:
        LambdaSchedule starting from ln λ_N = (1−ε) ln λ and ln λ̃_N = (1+ε) ln λ
    """
    if not 0.0 < config.gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    log_lambda = config.log_lambda
    lower = [(1.0 - config.epsilon) * log_lambda]
    upper = [(1.0 + config.epsilon) * log_lambda]
    steps = [config.schedule_coeff * qk ** (config.gamma - 1.0) for qk in q[1:]]
    for step in steps:
        lower.append(lower[-1] - step)
        upper.append(upper[-1] + step)
    return LambdaSchedule(
        log_lambda=log_lambda,
        epsilon=config.epsilon,
        gamma=config.gamma,
        coeff=config.schedule_coeff,
        start_index=config.start_index,
        q=tuple(int(v) for v in q),
        lower=tuple(lower),
        upper=tuple(upper),
        increments=math.fsum(steps),
    )
