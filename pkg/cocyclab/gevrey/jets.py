"""Truncated Taylor series (jets) and the power-series recursions behind Faà di Bruno.

A JetSeries holds c_0..c_K with c_k = f^{(k)}(x₀)/k!. The coefficient axis is axis 0; any trailing axes
vectorise over base points, so one jet can describe a function at a whole grid at once.
"""

import math
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np
from scipy.special import expit, factorial

from cocyclab.errors import DomainViolation
from cocyclab.models import InequalityCheck

Number = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class JetSeries:
    """Taylor coefficients of a function at base point(s) x0, truncated at order K."""

    x0: Number
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=np.float64))
        if self.coeffs.ndim == 0:
            raise ValueError("a jet needs at least one coefficient")

    @classmethod
    def constant(cls, x0: Number, value: Number, order: int) -> "JetSeries":
        """Jet of a constant function."""
        value = np.asarray(value, dtype=np.float64)
        value = np.broadcast_to(value, np.broadcast_shapes(np.shape(x0), value.shape))
        coeffs = np.zeros((order + 1,) + np.shape(value))
        coeffs[0] = value
        return cls(x0, coeffs)

    @classmethod
    def variable(cls, x0: Number, order: int) -> "JetSeries":
        """Jet of the identity x ↦ x at x0."""
        jet = cls.constant(x0, x0, order)
        if order >= 1:
            jet.coeffs[1] = 1.0
        return jet

    @classmethod
    def from_derivatives(cls, x0: Number, derivatives) -> "JetSeries":
        """Jet from f(x0), f'(x0), ..., f^{(K)}(x0)."""
        derivatives = np.asarray(derivatives, dtype=np.float64)
        k = np.arange(derivatives.shape[0]).reshape((-1,) + (1,) * (derivatives.ndim - 1))
        return cls(x0, derivatives / factorial(k))

    @property
    def order(self) -> int:
        """Truncation order K."""
        return self.coeffs.shape[0] - 1

    @property
    def value(self) -> np.ndarray:
        """f(x0)."""
        return self.coeffs[0]

    def derivative(self, k: int) -> np.ndarray:
        """f^{(k)}(x0) = k! c_k."""
        return math.factorial(k) * self.coeffs[k]

    def derivatives(self) -> np.ndarray:
        """All derivatives f^{(k)}(x0), k = 0..K."""
        k = np.arange(self.order + 1).reshape((-1,) + (1,) * (self.coeffs.ndim - 1))
        return self.coeffs * factorial(k)

    def differentiate(self) -> "JetSeries":
        """Jet of f' of order K − 1."""
        k = np.arange(1, self.order + 1).reshape((-1,) + (1,) * (self.coeffs.ndim - 1))
        return JetSeries(self.x0, self.coeffs[1:] * k)

    def truncate(self, order: int) -> "JetSeries":
        """Drop coefficients above order."""
        return JetSeries(self.x0, self.coeffs[: order + 1])

    def _check(self, other: "JetSeries") -> None:
        if self.order != other.order:
            raise ValueError(f"jet order mismatch: {self.order} != {other.order}")
        if not np.array_equal(np.asarray(self.x0), np.asarray(other.x0)):
            raise ValueError("jet base point mismatch")

    def __add__(self, other):
        if isinstance(other, JetSeries):
            return jet_add(self, other)
        coeffs = self.coeffs.copy()
        coeffs[0] = coeffs[0] + other
        return JetSeries(self.x0, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return jet_scale(self, -1.0)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, JetSeries):
            return jet_mul(self, other)
        return jet_scale(self, other)

    __rmul__ = __mul__


def jet_add(a: JetSeries, b: JetSeries) -> JetSeries:
    """Coefficientwise sum."""
    a._check(b)
    return JetSeries(a.x0, a.coeffs + b.coeffs)


def jet_scale(a: JetSeries, factor: Number) -> JetSeries:
    """Scalar multiple."""
    return JetSeries(a.x0, a.coeffs * factor)


def _convolve(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    return np.sum(a[: k + 1] * b[k::-1], axis=0)


def jet_mul(a: JetSeries, b: JetSeries) -> JetSeries:
    """Truncated Cauchy product."""
    a._check(b)
    out = np.empty(np.broadcast_shapes(a.coeffs.shape, b.coeffs.shape))
    for k in range(a.order + 1):
        out[k] = _convolve(a.coeffs, b.coeffs, k)
    return JetSeries(a.x0, out)


def _weighted(f: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Σ_{j=1..k} j f_j y_{k−j}."""
    j = np.arange(1, k + 1).reshape((-1,) + (1,) * (f.ndim - 1))
    return np.sum(j * f[1 : k + 1] * y[k - 1 :: -1][:k], axis=0)


def jet_exp(a: JetSeries) -> JetSeries:
    """Jet of exp ∘ f from k y_k = Σ j f_j y_{k−j}."""
    f = a.coeffs
    y = np.empty_like(f)
    y[0] = np.exp(f[0])
    for k in range(1, a.order + 1):
        y[k] = _weighted(f, y, k) / k
    return JetSeries(a.x0, y)


def jet_sincos(a: JetSeries) -> tuple[JetSeries, JetSeries]:
    """Jets of sin ∘ f and cos ∘ f from their joint recursion."""
    f = a.coeffs
    s = np.empty_like(f)
    c = np.empty_like(f)
    s[0] = np.sin(f[0])
    c[0] = np.cos(f[0])
    for k in range(1, a.order + 1):
        s[k] = _weighted(f, c, k) / k
        c[k] = -_weighted(f, s, k) / k
    return JetSeries(a.x0, s), JetSeries(a.x0, c)


def jet_sin(a: JetSeries) -> JetSeries:
    """Jet of sin ∘ f."""
    return jet_sincos(a)[0]


def jet_cos(a: JetSeries) -> JetSeries:
    """Jet of cos ∘ f."""
    return jet_sincos(a)[1]


def jet_recip(a: JetSeries) -> JetSeries:
    """Jet of 1/f.

    Raises:
        DomainViolation: If f(x0) = 0
    """
    f = a.coeffs
    if np.any(f[0] == 0.0):
        raise DomainViolation("reciprocal of a jet with zero constant term")
    y = np.empty_like(f)
    y[0] = 1.0 / f[0]
    for k in range(1, a.order + 1):
        y[k] = -_convolve(f[1:], y, k - 1) / f[0]
    return JetSeries(a.x0, y)


def jet_sqrt(a: JetSeries) -> JetSeries:
    """Jet of √f.

    Raises:
        DomainViolation: If f(x0) <= 0
    """
    f = a.coeffs
    if np.any(f[0] <= 0.0):
        raise DomainViolation("square root of a jet with non-positive constant term")
    y = np.empty_like(f)
    y[0] = np.sqrt(f[0])
    for k in range(1, a.order + 1):
        inner = _convolve(y[1:], y[1:], k - 2) if k >= 2 else 0.0
        y[k] = (f[k] - inner) / (2.0 * y[0])
    return JetSeries(a.x0, y)


def jet_power(a: JetSeries, exponent: float) -> JetSeries:
    """Jet of f^a for f(x0) > 0, from k f_0 y_k = Σ ((a+1)j − k) f_j y_{k−j}.

    Raises:
        DomainViolation: If f(x0) <= 0
    """
    f = a.coeffs
    if np.any(f[0] <= 0.0):
        raise DomainViolation("real power of a jet with non-positive constant term")
    y = np.empty_like(f)
    y[0] = f[0] ** exponent
    for k in range(1, a.order + 1):
        j = np.arange(1, k + 1).reshape((-1,) + (1,) * (f.ndim - 1))
        y[k] = np.sum(((exponent + 1.0) * j - k) * f[1 : k + 1] * y[k - 1 :: -1][:k], axis=0) / (k * f[0])
    return JetSeries(a.x0, y)


def jet_arcsin(a: JetSeries) -> JetSeries:
    """Jet of arcsin ∘ f through y' = f' (1 − f²)^{−1/2}.

    Raises:
        DomainViolation: If |f(x0)| >= 1
    """
    f = a.coeffs
    if np.any(np.abs(f[0]) >= 1.0):
        raise DomainViolation("arcsin of a jet with |constant term| >= 1")
    g = jet_power(1.0 - jet_mul(a, a), -0.5).coeffs
    y = np.empty_like(f)
    y[0] = np.arcsin(f[0])
    for k in range(1, a.order + 1):
        y[k] = _weighted(f, g, k) / k
    return JetSeries(a.x0, y)


def jet_logistic(a: JetSeries) -> JetSeries:
    """Jet of the logistic function σ ∘ f through σ' = σ(1 − σ) f'."""
    f = a.coeffs
    y = np.empty_like(f)
    h = np.empty_like(f)
    y[0] = expit(f[0])
    h[0] = y[0] * (1.0 - y[0])
    for k in range(1, a.order + 1):
        y[k] = _weighted(f, h, k) / k
        h[k] = y[k] - _convolve(y, y, k)
    return JetSeries(a.x0, y)


def jet_compose(outer, inner: JetSeries) -> JetSeries:
    """Jet of g ∘ f given the Taylor coefficients of g at f(x0), by Horner's rule in f − f(x0)."""
    outer = np.asarray(outer, dtype=np.float64)
    if outer.shape[0] < inner.order + 1:
        raise ValueError("outer jet is shorter than the inner one")
    delta = inner.coeffs.copy()
    delta[0] = 0.0
    delta = JetSeries(inner.x0, delta)
    acc = JetSeries.constant(inner.x0, outer[inner.order], inner.order)
    for j in range(inner.order - 1, -1, -1):
        acc = jet_mul(acc, delta) + outer[j]
    return acc


def partitions(n: int) -> Iterator[tuple[int, ...]]:
    """All (k_1, ..., k_n) with k_1 + 2k_2 + ... + n k_n = n."""
    if n == 0:
        yield ()
        return

    def fill(i: int, remaining: int) -> Iterator[list[int]]:
        if i == 0:
            if remaining == 0:
                yield []
            return
        for k in range(remaining // i + 1):
            for rest in fill(i - 1, remaining - k * i):
                yield rest + [k]

    for ks in fill(n, n):
        yield tuple(ks)


def faa_di_bruno(outer_derivatives, inner_derivatives, n: int) -> float:
    """(g ∘ f)^{(n)} from the partition sum Σ n!/(Π k_i! (i!)^{k_i}) g^{(k)} Π (f^{(i)})^{k_i}."""
    if n == 0:
        return float(outer_derivatives[0])
    total = 0.0
    for ks in partitions(n):
        k = sum(ks)
        term = math.factorial(n) * outer_derivatives[k]
        for i, ki in enumerate(ks, start=1):
            term *= inner_derivatives[i] ** ki / (math.factorial(ki) * math.factorial(i) ** ki)
        total += term
    return total


def _relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def faa_di_bruno_check(g_jet: JetSeries, f_jet: JetSeries, n: int, tolerance: float = 1e-9) -> InequalityCheck:
    """Compare the n-th derivative of g ∘ f from jet composition against the partition sum.

    Args:
        g_jet: Jet of the outer function at f(x0), order >= n
        f_jet: Jet of the inner function at x0, order >= n
        n: Derivative order, at most 8
    """
    if not 0 <= n <= 8:
        raise ValueError("partition enumeration is limited to n <= 8")
    via_jets = float(jet_compose(g_jet.coeffs[: n + 1], f_jet.truncate(n)).derivative(n))
    outer, inner = g_jet.derivatives(), f_jet.derivatives()
    via_sum = faa_di_bruno(outer, inner, n)
    # error measured against the sum of absolute terms
    scale = faa_di_bruno(np.abs(outer), np.abs(inner), n)
    gap = abs(via_jets - via_sum) / scale if scale > 0.0 else 0.0
    return InequalityCheck(name=f"faa_di_bruno[{n}]", lhs=gap, rhs=tolerance, passed=gap <= tolerance)


def partition_identity_check(n: int, R: float, tolerance: float = 1e-10) -> InequalityCheck:
    """Check Σ k!/(k_1!⋯k_n!) R^k = R(1+R)^{n−1} over all partitions of n, with k = Σ k_i."""
    if not 1 <= n <= 12:
        raise ValueError("partition enumeration is limited to 1 <= n <= 12")
    total = math.fsum(
        math.factorial(sum(ks)) / math.prod(math.factorial(k) for k in ks) * R ** sum(ks) for ks in partitions(n)
    )
    closed = R * (1.0 + R) ** (n - 1)
    gap = _relative_gap(total, closed)
    return InequalityCheck(name=f"partition_identity[{n}]", lhs=gap, rhs=tolerance, passed=gap <= tolerance)


