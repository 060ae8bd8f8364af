"""Flat bump functions and the cutoffs built from them.

The flat bump f(x) = e^{-|x|^{-ν}} has derivatives f^{(n)}(x) = Σ_i a_i^n x^{-(iν+n)} e^{-x^{-ν}} for x > 0,
with the coefficient table

    a_1^1 = ν,    a_i^{n+1} = ν a_{i-1}^n − (iν + n) a_i^n.

All derivative evaluations sum this expansion in log scale, so no intermediate power of 1/x overflows.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import expit, gammaln, logsumexp

from cocyclab.arithmetic import CriticalGeometry, projective_offset
from cocyclab.constants import EXP_UNDERFLOW
from cocyclab.errors import BoundViolated
from cocyclab.gevrey.functions import ArcSin, SmoothFunction
from cocyclab.gevrey.jets import JetSeries, jet_logistic, jet_mul, jet_power

logger = logging.getLogger(__name__)

MAX_BUMP_ORDER = 60


@dataclass(frozen=True, eq=False)
class BumpCoefficients:
    """Table a_i^n for 0 <= i <= n <= n_max, with a_0^0 = 1."""

    nu: float
    table: np.ndarray

    @property
    def n_max(self) -> int:
        """Highest tabulated derivative order."""
        return self.table.shape[0] - 1

    def row(self, n: int) -> np.ndarray:
        """a_1^n, ..., a_n^n (just [1] for n = 0)."""
        if n == 0:
            return self.table[0, :1]
        return self.table[n, 1 : n + 1]

    def log_bound(self, n: int, i: int) -> float:
        """ln of (2ν+2)^{n+i} (ν+n)^{n−i}."""
        return (n + i) * math.log(2 * self.nu + 2) + (n - i) * math.log(self.nu + n)

    def bound_violations(self) -> list[tuple[int, int]]:
        """Entries with |a_i^n| above (2ν+2)^{n+i}(ν+n)^{n−i}."""
        bad = []
        for n in range(1, self.n_max + 1):
            for i in range(1, n + 1):
                value = abs(self.table[n, i])
                if value > 0.0 and math.log(value) > self.log_bound(n, i) + 1e-12:
                    bad.append((n, i))
        return bad

    def verify(self) -> None:
        """Raise when any entry breaks the bound.

        Raises:
            BoundViolated: Listing the first offending entry
        """
        bad = self.bound_violations()
        if bad:
            n, i = bad[0]
            raise BoundViolated(f"|a_{i}^{n}| exceeds its bound for nu={self.nu} ({len(bad)} entries)")


@lru_cache(maxsize=32)
def bump_coefficients(nu: float, n_max: int = MAX_BUMP_ORDER) -> BumpCoefficients:
    """Build and verify the coefficient table up to order n_max.

    Raises:
        ValueError: If ν <= 0 or n_max is outside [0, 60]
        BoundViolated: If an entry breaks the proven bound
    """
    if not nu > 0.0:
        raise ValueError("nu must be positive")
    if not 0 <= n_max <= MAX_BUMP_ORDER:
        raise ValueError(f"n_max must lie in [0, {MAX_BUMP_ORDER}]")
    table = np.zeros((n_max + 1, n_max + 1))
    table[0, 0] = 1.0
    for n in range(n_max):
        for i in range(1, n + 2):
            table[n + 1, i] = nu * table[n, i - 1] - (i * nu + n) * table[n, i]
    coeffs = BumpCoefficients(nu=nu, table=table)
    coeffs.verify()
    logger.debug("bump table nu=%g up to order %d", nu, n_max)
    return coeffs


def bump_eval(nu: float, x) -> np.ndarray:
    """e^{-|x|^{-ν}}, 0 at x = 0."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    with np.errstate(divide="ignore"):
        return np.exp(-(ax ** (-nu)))


def _log_expansion(nu: float, x, n: int, sign_flip: bool, exponent_sign: float):
    """ln|Σ_i (±1)^i a_i^n |x|^{-(iν+n)}| ± |x|^{-ν} and its sign, for x != 0."""
    if not 0 <= n <= MAX_BUMP_ORDER:
        raise ValueError(f"derivative order must lie in [0, {MAX_BUMP_ORDER}]")
    coeffs = bump_coefficients(nu)
    ax = np.abs(np.asarray(x, dtype=np.float64))
    lx = np.log(ax)
    core = exponent_sign * ax ** (-nu)
    if n == 0:
        return core, np.ones_like(ax)
    i = np.arange(1, n + 1, dtype=np.float64)
    row = coeffs.row(n)
    if sign_flip:
        row = row * (-1.0) ** i
    with np.errstate(divide="ignore"):
        log_a = np.log(np.abs(row))
    shape = (-1,) + (1,) * ax.ndim
    terms = log_a.reshape(shape) - (i * nu + n).reshape(shape) * lx
    log_sum, sign = logsumexp(terms, axis=0, b=np.sign(row).reshape(shape), return_sign=True)
    return log_sum + core, sign


def log_bump_derivative(nu: float, x, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(ln|f^{(n)}(x)|, sign) of the flat bump; (−inf, 0) at x = 0."""
    x = np.asarray(x, dtype=np.float64)
    zero = x == 0.0
    safe = np.where(zero, 1.0, x)
    log_value, sign = _log_expansion(nu, safe, n, sign_flip=False, exponent_sign=-1.0)
    sign = np.where((safe < 0) & (n % 2 == 1), -sign, sign)
    return np.where(zero, -np.inf, log_value), np.where(zero, 0.0, sign)


def bump_derivative(nu: float, x, n: int) -> np.ndarray:
    """f^{(n)}(x) of the flat bump e^{-|x|^{-ν}}, exactly 0 at x = 0."""
    log_value, sign = log_bump_derivative(nu, x, n)
    return sign * np.exp(log_value)


def log_inverse_bump_derivative(nu: float, x, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(ln|h^{(n)}(x)|, sign) of h(x) = e^{|x|^{-ν}} for x != 0.

    Raises:
        ValueError: If any x is 0
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(x == 0.0):
        raise ValueError("e^{|x|^-nu} is undefined at x = 0")
    log_value, sign = _log_expansion(nu, x, n, sign_flip=True, exponent_sign=1.0)
    return log_value, np.where((x < 0) & (n % 2 == 1), -sign, sign)


def inverse_bump_derivative(nu: float, x, n: int) -> np.ndarray:
    """h^{(n)}(x) of h(x) = e^{|x|^{-ν}}; may overflow to ±inf close to 0."""
    log_value, sign = log_inverse_bump_derivative(nu, x, n)
    with np.errstate(over="ignore"):
        return sign * np.exp(log_value)


def fit_bound_constant(log_derivatives: np.ndarray, log_envelope: np.ndarray, s: float) -> float:
    """Smallest C with ln|f^{(n)}| <= n ln C + envelope + s ln n! on the samples.

    Args:
        log_derivatives: ln|f^{(n)}(x)| with n = 1, 2, ... on axis 0
        log_envelope: ln of the x-dependent envelope per sample point
        s: Gevrey exponent of the factorial
    """
    n = np.arange(1, log_derivatives.shape[0] + 1, dtype=np.float64).reshape(-1, 1)
    ratios = (log_derivatives - log_envelope[None, :] - s * gammaln(n + 1.0)) / n
    finite = ratios[np.isfinite(ratios)]
    return float(np.exp(finite.max())) if finite.size else 0.0


def fit_gevrey_constant(nu: float, xs, n_max: int) -> float:
    """Fitted C in |f^{(n)}(x)| <= C^n e^{-1/(2|x|^ν)} (n!)^{1+1/ν} over nonzero sample points."""
    xs = np.asarray(xs, dtype=np.float64)
    xs = xs[xs != 0.0]
    logs = np.stack([log_bump_derivative(nu, xs, n)[0] for n in range(1, n_max + 1)])
    return fit_bound_constant(logs, -0.5 * np.abs(xs) ** (-nu), 1.0 + 1.0 / nu)


def gevrey_bound_violations(nu: float, xs, n_max: int, C: float) -> int:
    """Sample points and orders where the flat-bump Gevrey bound with constant C fails."""
    xs = np.asarray(xs, dtype=np.float64)
    xs = xs[xs != 0.0]
    s = 1.0 + 1.0 / nu
    count = 0
    for n in range(1, n_max + 1):
        log_value = log_bump_derivative(nu, xs, n)[0]
        bound = n * math.log(C) - 0.5 * np.abs(xs) ** (-nu) + s * gammaln(n + 1.0)
        count += int(np.sum(log_value > bound + 1e-9))
    return count


def inverse_bump_bound_check(nu: float, xs, n_max: int) -> float:
    """Fitted C in |h^{(n)}(x)| <= C^n e^{2/|x|^ν} (n!)^{1+1/ν} for h = e^{|x|^{-ν}}."""
    xs = np.asarray(xs, dtype=np.float64)
    logs = np.stack([log_inverse_bump_derivative(nu, xs, n)[0] for n in range(1, n_max + 1)])
    return fit_bound_constant(logs, 2.0 * np.abs(xs) ** (-nu), 1.0 + 1.0 / nu)


class PeriodicBump(SmoothFunction):
    """g(x) = c·exp(−(t^{−ν} + (π−t)^{−ν})) with t = (x − c1) mod π, and g = 0 on c1 + πZ."""

    def __init__(self, c1: float, nu: float, amplitude: float = 1.0):
        self.c1 = float(c1)
        self.nu = float(nu)
        self.amplitude = float(amplitude)

    @property
    def period(self) -> Optional[float]:
        return math.pi

    def _phase(self, x) -> np.ndarray:
        return np.mod(np.asarray(x, dtype=np.float64) - self.c1, math.pi)

    def __call__(self, x) -> np.ndarray:
        t = self._phase(x)
        return self.amplitude * bump_eval(self.nu, t) * bump_eval(self.nu, math.pi - t)

    def log_envelope(self, x) -> np.ndarray:
        """ln of e^{−(|t|^{−ν} + |π−t|^{−ν})/2}, the envelope of the derivative bound."""
        t = self._phase(x)
        with np.errstate(divide="ignore"):
            return -0.5 * (t ** (-self.nu) + (math.pi - t) ** (-self.nu))

    def jet(self, x0, order: int) -> JetSeries:
        if order > MAX_BUMP_ORDER:
            raise ValueError(f"jets of the periodic bump are limited to order {MAX_BUMP_ORDER}")
        t = self._phase(x0)
        left = np.stack([bump_derivative(self.nu, t, k) for k in range(order + 1)])
        right = np.stack([(-1.0) ** k * bump_derivative(self.nu, math.pi - t, k) for k in range(order + 1)])
        jet = jet_mul(JetSeries.from_derivatives(x0, left), JetSeries.from_derivatives(x0, right))
        return jet * self.amplitude


class Plateau(SmoothFunction):
    """π-periodic cutoff: 1 within radius/10 of {c1, c1+π}, 0 beyond 2·radius/10, flat in between.

    With z = 10·|offset|/radius the transition is σ((z−1)^{−p} − (2−z)^{−p}), σ the logistic function.
    """

    def __init__(self, c1: float, radius: float, exponent: float):
        if not radius > 0.0:
            raise ValueError("radius must be positive")
        if not exponent > 0.0:
            raise ValueError("exponent must be positive")
        self.c1 = float(c1)
        self.radius = float(radius)
        self.exponent = float(exponent)

    @property
    def period(self) -> Optional[float]:
        return math.pi

    @property
    def scale(self) -> float:
        """dz/d|offset|."""
        return 10.0 / self.radius

    def _z(self, x):
        offset = projective_offset(np.asarray(x, dtype=np.float64), self.c1)
        return offset, np.abs(offset) * self.scale

    def _argument(self, z):
        with np.errstate(divide="ignore", over="ignore"):
            return (z - 1.0) ** (-self.exponent) - (2.0 - z) ** (-self.exponent)

    def __call__(self, x) -> np.ndarray:
        _, z = self._z(x)
        inner = z <= 1.0
        outer = z >= 2.0
        mid = ~(inner | outer)
        out = np.where(inner, 1.0, 0.0)
        if np.any(mid):
            out = np.where(mid, expit(self._argument(np.where(mid, z, 1.5))), out)
        return out

    def jet(self, x0, order: int) -> JetSeries:
        x0 = np.asarray(x0, dtype=np.float64)
        flat = np.atleast_1d(x0)
        offset, z = self._z(flat)
        coeffs = np.zeros((order + 1,) + flat.shape)
        coeffs[0] = np.where(z <= 1.0, 1.0, 0.0)
        mid = (z > 1.0) & (z < 2.0)
        if np.any(mid):
            zm = z[mid]
            arg0 = self._argument(zm)
            coeffs[0, mid] = expit(arg0)
            live = np.abs(arg0) <= EXP_UNDERFLOW
            if np.any(live):
                idx = np.flatnonzero(mid)[live]
                slope = np.sign(offset[idx]) * self.scale
                b = JetSeries.constant(flat[idx], z[idx] - 1.0, order)
                a = JetSeries.constant(flat[idx], 2.0 - z[idx], order)
                if order >= 1:
                    b.coeffs[1] = slope
                    a.coeffs[1] = -slope
                arg = jet_power(b, -self.exponent) - jet_power(a, -self.exponent)
                coeffs[:, idx] = jet_logistic(arg).coeffs
        return JetSeries(x0, coeffs.reshape((order + 1,) + x0.shape))


def periodic_bump(c1: float, nu: float, amplitude: float = 1.0) -> PeriodicBump:
    """The periodic flat bump g vanishing to infinite order on c1 + πZ."""
    if not 0.0 < nu < 1.0:
        raise ValueError("nu must lie in (0, 1)")
    return PeriodicBump(c1, nu, amplitude)


def plateau(n: int, geometry: CriticalGeometry, delta: float) -> Plateau:
    """The cutoff f_n: 1 on I_n/10, 0 outside the middle fifth of I_n, with flat exponent 1/δ."""
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    return Plateau(geometry.c1, geometry.radius(n), 1.0 / delta)


def sample_angle(c: float, c1: float, nu: float) -> SmoothFunction:
    """φ₀ = arcsin(c·g), principal branch."""
    if not 0.0 < c < 1.0e-3:
        raise ValueError("amplitude c must lie in (0, 1/1000)")
    return ArcSin(periodic_bump(c1, nu, amplitude=c))
