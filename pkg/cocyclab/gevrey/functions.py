"""Closed-form smooth functions that can be evaluated and expanded into jets at any point.

Functions are immutable node trees. Each node implements ``__call__`` (vectorised evaluation) and
``jet(x0, order)``; composite nodes combine the jets of their children with the recursions of
``cocyclab.gevrey.jets``.
"""

import math
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Chebyshev

from cocyclab.arithmetic import TWO_PI, projective_offset
from cocyclab.gevrey.jets import (
    JetSeries,
    jet_arcsin,
    jet_cos,
    jet_exp,
    jet_mul,
    jet_recip,
    jet_sin,
    jet_sqrt,
)


def _common_period(children: Sequence["SmoothFunction"]) -> Optional[float]:
    periods = {c.period for c in children if c.period != 0.0}
    if not periods:
        return 0.0
    if None in periods:
        return None
    longest = max(periods)
    if all(math.isclose(longest / p, round(longest / p)) for p in periods):
        return longest
    return None


class SmoothFunction(ABC):
    """A C^∞ function of one real variable with jets of any order."""

    @property
    def period(self) -> Optional[float]:
        """Smallest known period, 0.0 for constants, None when not periodic."""
        return None

    @abstractmethod
    def __call__(self, x) -> np.ndarray:
        """Evaluate at x (scalar or array)."""

    @abstractmethod
    def jet(self, x0, order: int) -> JetSeries:
        """Jet of the function at x0 (scalar or array) up to the given order."""

    def derivative(self, x, k: int) -> np.ndarray:
        """k-th derivative at x."""
        return self.jet(x, k).derivative(k)

    def __add__(self, other):
        return Sum(self, _lift(other))

    def __radd__(self, other):
        return Sum(_lift(other), self)

    def __sub__(self, other):
        return Sum(self, Scale(-1.0, _lift(other)))

    def __rsub__(self, other):
        return Sum(_lift(other), Scale(-1.0, self))

    def __neg__(self):
        return Scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, SmoothFunction):
            return Product(self, other)
        return Scale(float(other), self)

    def __rmul__(self, other):
        return Scale(float(other), self)


def _lift(value) -> SmoothFunction:
    return value if isinstance(value, SmoothFunction) else Constant(float(value))


class Constant(SmoothFunction):
    """x ↦ value."""

    def __init__(self, value: float):
        self.value = float(value)

    @property
    def period(self) -> Optional[float]:
        return 0.0

    def __call__(self, x) -> np.ndarray:
        return np.full(np.shape(x), self.value)

    def jet(self, x0, order: int) -> JetSeries:
        return JetSeries.constant(x0, self.value, order)


class Affine(SmoothFunction):
    """x ↦ slope·x + intercept."""

    def __init__(self, slope: float = 1.0, intercept: float = 0.0):
        self.slope = float(slope)
        self.intercept = float(intercept)

    def __call__(self, x) -> np.ndarray:
        return self.slope * np.asarray(x, dtype=np.float64) + self.intercept

    def jet(self, x0, order: int) -> JetSeries:
        jet = JetSeries.constant(x0, self(x0), order)
        if order >= 1:
            jet.coeffs[1] = self.slope
        return jet


class Sum(SmoothFunction):
    """Sum of terms."""

    def __init__(self, *terms: SmoothFunction):
        self.terms = tuple(terms)

    @property
    def period(self) -> Optional[float]:
        return _common_period(self.terms)

    def __call__(self, x) -> np.ndarray:
        return sum((t(x) for t in self.terms[1:]), self.terms[0](x))

    def jet(self, x0, order: int) -> JetSeries:
        jets = [t.jet(x0, order) for t in self.terms]
        return JetSeries(x0, sum((j.coeffs for j in jets[1:]), jets[0].coeffs))


class Product(SmoothFunction):
    """Product of factors."""

    def __init__(self, *factors: SmoothFunction):
        self.factors = tuple(factors)

    @property
    def period(self) -> Optional[float]:
        return _common_period(self.factors)

    def __call__(self, x) -> np.ndarray:
        out = self.factors[0](x)
        for f in self.factors[1:]:
            out = out * f(x)
        return out

    def jet(self, x0, order: int) -> JetSeries:
        out = self.factors[0].jet(x0, order)
        for f in self.factors[1:]:
            out = jet_mul(out, f.jet(x0, order))
        return out


class Scale(SmoothFunction):
    """factor · inner."""

    def __init__(self, factor: float, inner: SmoothFunction):
        self.factor = float(factor)
        self.inner = inner

    @property
    def period(self) -> Optional[float]:
        return self.inner.period

    def __call__(self, x) -> np.ndarray:
        return self.factor * self.inner(x)

    def jet(self, x0, order: int) -> JetSeries:
        return self.inner.jet(x0, order) * self.factor


class _Unary(SmoothFunction):
    def __init__(self, inner: SmoothFunction):
        self.inner = inner

    @property
    def period(self) -> Optional[float]:
        return self.inner.period


class Exp(_Unary):
    """exp ∘ inner."""

    def __call__(self, x) -> np.ndarray:
        return np.exp(self.inner(x))

    def jet(self, x0, order: int) -> JetSeries:
        return jet_exp(self.inner.jet(x0, order))


class Sin(_Unary):
    """sin ∘ inner."""

    def __call__(self, x) -> np.ndarray:
        return np.sin(self.inner(x))

    def jet(self, x0, order: int) -> JetSeries:
        return jet_sin(self.inner.jet(x0, order))


class Cos(_Unary):
    """cos ∘ inner."""

    def __call__(self, x) -> np.ndarray:
        return np.cos(self.inner(x))

    def jet(self, x0, order: int) -> JetSeries:
        return jet_cos(self.inner.jet(x0, order))


class Reciprocal(_Unary):
    """1 / inner."""

    def __call__(self, x) -> np.ndarray:
        return 1.0 / self.inner(x)

    def jet(self, x0, order: int) -> JetSeries:
        return jet_recip(self.inner.jet(x0, order))


class Sqrt(_Unary):
    """√inner."""

    def __call__(self, x) -> np.ndarray:
        return np.sqrt(self.inner(x))

    def jet(self, x0, order: int) -> JetSeries:
        return jet_sqrt(self.inner.jet(x0, order))


class ArcSin(_Unary):
    """arcsin ∘ inner, principal branch."""

    def __call__(self, x) -> np.ndarray:
        return np.arcsin(self.inner(x))

    def jet(self, x0, order: int) -> JetSeries:
        return jet_arcsin(self.inner.jet(x0, order))


class Derivative(_Unary):
    """The derivative of inner."""

    def __call__(self, x) -> np.ndarray:
        return self.inner.derivative(x, 1)

    def jet(self, x0, order: int) -> JetSeries:
        return self.inner.jet(x0, order + 1).differentiate()


class Localized(SmoothFunction):
    """inner · cutoff, set to exactly 0 wherever the cutoff vanishes.

    The inner function is only evaluated on the support of the cutoff.
    """

    def __init__(self, inner: SmoothFunction, cutoff: SmoothFunction):
        self.inner = inner
        self.cutoff = cutoff

    @property
    def period(self) -> Optional[float]:
        return self.cutoff.period

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        flat = np.atleast_1d(x)
        weight = np.atleast_1d(self.cutoff(flat))
        out = np.zeros_like(weight)
        mask = weight != 0.0
        if np.any(mask):
            out[mask] = self.inner(flat[mask]) * weight[mask]
        return out.reshape(x.shape)

    def jet(self, x0, order: int) -> JetSeries:
        x0 = np.asarray(x0, dtype=np.float64)
        flat = np.atleast_1d(x0)
        weight = self.cutoff.jet(flat, order).coeffs
        out = np.zeros_like(weight)
        mask = np.any(weight != 0.0, axis=0)
        if np.any(mask):
            inner = self.inner.jet(flat[mask], order)
            out[:, mask] = jet_mul(inner, JetSeries(flat[mask], weight[:, mask])).coeffs
        return JetSeries(x0, out.reshape((order + 1,) + x0.shape))


class ComponentInterpolant(SmoothFunction):
    """Chebyshev interpolants on the two components of a critical interval.

    The interpolants are written in the signed offset from the nearest critical point, c1 for the first
    component and c1 + π for the second. The function is π-periodic only when both pieces agree.
    """

    def __init__(self, c1: float, radius: float, pieces: Sequence[Chebyshev]):
        if len(pieces) != 2:
            raise ValueError("need one interpolant per component")
        self.c1 = float(c1)
        self.radius = float(radius)
        self.pieces = tuple(pieces)

    @property
    def period(self) -> Optional[float]:
        return TWO_PI

    def _locate(self, x):
        offset = projective_offset(x, self.c1)
        d = np.mod(np.asarray(x) - self.c1, TWO_PI)
        second = (d >= math.pi / 2) & (d < 3 * math.pi / 2)
        return offset, second

    @lru_cache(maxsize=64)
    def _derived(self, piece: int, k: int) -> Chebyshev:
        return self.pieces[piece].deriv(k) if k else self.pieces[piece]

    def __call__(self, x) -> np.ndarray:
        offset, second = self._locate(x)
        return np.where(second, self.pieces[1](offset), self.pieces[0](offset))

    def jet(self, x0, order: int) -> JetSeries:
        offset, second = self._locate(x0)
        coeffs = np.empty((order + 1,) + np.shape(offset))
        for k in range(order + 1):
            first = self._derived(0, k)(offset)
            other = self._derived(1, k)(offset)
            coeffs[k] = np.where(second, other, first) / math.factorial(k)
        return JetSeries(x0, coeffs)
