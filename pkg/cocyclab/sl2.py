"""Overflow-free SL(2,R) calculus in projective polar form.

Every matrix is stored as A = R_u · diag(σ, 1/σ) · R_{π/2−s} with log_sigma = ln σ >= 0. The unit vector
(cos s, sin s) is the most contracted one and u = s(A⁻¹) is the direction of the expanded image. The overall
sign of A is dropped, so s and u live in [0, π).

Conventions that follow from this form:

* diag(λ, 1/λ) is (ln λ, u=0, s=π/2) and the rotation R_ψ is (0, u=0, s=π/2−ψ).
* A·R_θ moves s to s − θ, R_θ·A moves u to u + θ.
* Λ·R_{π/2−φ} is (ln λ, u=0, s=φ).

Composition works on the middle factor Λ₂ R_θ Λ₁ with θ = π/2 − s_B + u_A. Its norm comes from the
Frobenius norm b = σ² + σ⁻², evaluated with logsumexp, and its axes from the Gram matrices. When b < 4 the
middle factor has entries of order one and its SVD is taken in closed form instead.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from cocyclab.constants import DETERMINANT_TOL, MAX_RECONSTRUCT_LOG_SIGMA, PROJECTIVE_TOL
from cocyclab.errors import NonUnimodular, PreconditionFailed, RepresentationOverflow
from cocyclab.models import HyperbolicityReport, InequalityCheck

logger = logging.getLogger(__name__)

PI = math.pi
HALF_PI = 0.5 * math.pi
LOG_FOUR = math.log(4.0)
_ROTATION_TOL = 1e-15
_CANCELLATION_FLAG = 1.0


def reduce_angle(theta):
    """Reduce angles to [0, π)."""
    r = np.mod(theta, PI)
    return np.where(r >= PI, 0.0, r)


def projective_distance(a, b):
    """Distance between lines in RP¹, in [0, π/2]."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return np.abs(d - PI * np.round(d / PI))


def proj_diff(a, b):
    """Signed difference a − b on the branch nearest 0, in [−π/2, π/2)."""
    return np.mod(np.asarray(a) - np.asarray(b) + HALF_PI, PI) - HALF_PI


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class DenseSL2:
    """A 2×2 matrix written out entry by entry; polar() checks the determinant."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_array(cls, m) -> "DenseSL2":
        """Build from a 2×2 array-like."""
        m = np.asarray(m, dtype=np.float64)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @property
    def array(self) -> np.ndarray:
        """Entries as a numpy array."""
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def det(self) -> float:
        """Determinant."""
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "DenseSL2") -> "DenseSL2":
        return DenseSL2.from_array(self.array @ other.array)


@dataclass(frozen=True)
class LogPolarSL2:
    """Projective polar data (ln‖A‖, u, s) of an SL(2,R) matrix."""

    log_sigma: float
    u: float
    s: float
    ill_conditioned: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "log_sigma", max(float(self.log_sigma), 0.0))
        object.__setattr__(self, "u", float(reduce_angle(self.u)))
        object.__setattr__(self, "s", float(reduce_angle(self.s)))

    @classmethod
    def identity(cls) -> "LogPolarSL2":
        """The identity, canonical form (0, 0, π/2)."""
        return cls(0.0, 0.0, HALF_PI)

    @classmethod
    def hyperbolic(cls, log_lambda: float) -> "LogPolarSL2":
        """Λ = diag(λ, 1/λ)."""
        return cls(log_lambda, 0.0, HALF_PI)

    @classmethod
    def rotation(cls, psi: float) -> "LogPolarSL2":
        """The rotation R_ψ."""
        return cls(0.0, 0.0, HALF_PI - psi)

    @classmethod
    def from_angle(cls, log_lambda: float, phi: float) -> "LogPolarSL2":
        """Λ · R_{π/2−φ}."""
        return cls(log_lambda, 0.0, phi)

    def inverse(self) -> "LogPolarSL2":
        """A⁻¹: same norm with the two directions swapped."""
        return LogPolarSL2(self.log_sigma, self.s, self.u, self.ill_conditioned)

    def rotate_right(self, theta: float) -> "LogPolarSL2":
        """A · R_θ."""
        return rotate_right(self, theta)

    def rotate_left(self, theta: float) -> "LogPolarSL2":
        """R_θ · A."""
        return rotate_left(self, theta)

    def __matmul__(self, other: "LogPolarSL2") -> "LogPolarSL2":
        return compose(self, other)


@dataclass(frozen=True)
class PolarArrays:
    """A batch of polar matrices stored as three equally shaped arrays."""

    log_sigma: np.ndarray
    u: np.ndarray
    s: np.ndarray
    ill_conditioned: Optional[np.ndarray] = None

    @classmethod
    def from_polars(cls, items: Iterable[LogPolarSL2]) -> "PolarArrays":
        """Stack scalar polar matrices along a new first axis."""
        items = list(items)
        return cls(
            np.array([p.log_sigma for p in items], dtype=np.float64),
            np.array([p.u for p in items], dtype=np.float64),
            np.array([p.s for p in items], dtype=np.float64),
        )

    @classmethod
    def from_angles(cls, log_lambda: float, phi) -> "PolarArrays":
        """Λ · R_{π/2−φ} for every angle in phi."""
        phi = np.asarray(phi, dtype=np.float64)
        return cls(np.full(phi.shape, float(log_lambda)), np.zeros(phi.shape), reduce_angle(phi))

    @classmethod
    def identity(cls, shape) -> "PolarArrays":
        """Identity matrices of the given shape."""
        return cls(np.zeros(shape), np.zeros(shape), np.full(shape, HALF_PI))

    @property
    def shape(self) -> tuple:
        """Batch shape."""
        return np.shape(self.log_sigma)

    def __getitem__(self, index) -> "PolarArrays":
        flags = None if self.ill_conditioned is None else self.ill_conditioned[index]
        return PolarArrays(self.log_sigma[index], self.u[index], self.s[index], flags)

    def item(self, index) -> LogPolarSL2:
        """One entry as a LogPolarSL2."""
        flag = False if self.ill_conditioned is None else bool(self.ill_conditioned[index])
        return LogPolarSL2(float(self.log_sigma[index]), float(self.u[index]), float(self.s[index]), flag)

    def inverse(self) -> "PolarArrays":
        """Entrywise inverse."""
        return PolarArrays(self.log_sigma, self.s, self.u, self.ill_conditioned)

    def rotate_right(self, theta) -> "PolarArrays":
        """Entrywise A · R_θ."""
        return PolarArrays(self.log_sigma, self.u, reduce_angle(self.s - theta), self.ill_conditioned)

    def rotate_left(self, theta) -> "PolarArrays":
        """Entrywise R_θ · A."""
        return PolarArrays(self.log_sigma, reduce_angle(self.u + theta), self.s, self.ill_conditioned)


def _svd_angles(a11, a12, a21, a22):
    """Closed-form SVD M = R_φ · diag(σ, 1/σ) · R_ψ of unimodular 2×2 entries.

    Returns (ln σ, u, s). When σ is one to rounding the split between φ and ψ is arbitrary and the
    canonical rotation form u = 0 is returned.
    """
    e = 0.5 * (a11 + a22)
    f = 0.5 * (a11 - a22)
    g = 0.5 * (a21 + a12)
    h = 0.5 * (a21 - a12)
    r = np.hypot(f, g)
    log_sigma = np.arcsinh(r)
    a1 = np.arctan2(g, f)
    a2 = np.arctan2(h, e)
    rotation = r <= _ROTATION_TOL
    u = np.where(rotation, 0.0, 0.5 * (a2 + a1))
    s = np.where(rotation, HALF_PI - a2, HALF_PI - 0.5 * (a2 - a1))
    return log_sigma, reduce_angle(u), reduce_angle(s)


def polar(A: DenseSL2) -> LogPolarSL2:
    """Polar data of a dense unimodular matrix.

    Raises:
        NonUnimodular: If det A deviates from 1 beyond the relative tolerance
    """
    scale = max(1.0, abs(A.a * A.d) + abs(A.b * A.c))
    if abs(A.det - 1.0) > DETERMINANT_TOL * scale:
        raise NonUnimodular(f"determinant {A.det!r} is not 1")
    log_sigma, u, s = _svd_angles(A.a, A.b, A.c, A.d)
    return LogPolarSL2(float(log_sigma), float(u), float(s))


def reconstruct(P: LogPolarSL2) -> DenseSL2:
    """Dense R_u · diag(σ, 1/σ) · R_{π/2−s}.

    Raises:
        RepresentationOverflow: If log_sigma exceeds the representable range
    """
    if P.log_sigma > MAX_RECONSTRUCT_LOG_SIGMA:
        raise RepresentationOverflow(f"log_sigma {P.log_sigma:.3f} exceeds {MAX_RECONSTRUCT_LOG_SIGMA}")
    sigma = math.exp(P.log_sigma)
    m = _rotation(P.u) @ np.diag([sigma, 1.0 / sigma]) @ _rotation(HALF_PI - P.s)
    return DenseSL2.from_array(m)


def _log_two_sinh(x):
    """ln(2 sinh 2x) for x >= 0, −inf at 0."""
    with np.errstate(divide="ignore"):
        return 2.0 * x + np.log(-np.expm1(-4.0 * x))


def _major_axis(log_a, log_c, log_q, log_cos2, log_sin2, log_sin2t, sign_sin2t):
    """Half of atan2(Y, X) with X = 2sinh(2 ln a)cos²θ + 2sinh(2 ln c)sin²θ, Y = −2sinh(2 ln q)sin 2θ.

    Every term is scaled by the largest of them so nothing overflows.
    """
    t1 = _log_two_sinh(log_a) + log_cos2
    t2 = _log_two_sinh(np.abs(log_c)) + log_sin2
    t3 = _log_two_sinh(log_q) + log_sin2t
    top = np.maximum(np.maximum(t1, t2), t3)
    top = np.where(np.isfinite(top), top, 0.0)
    x = np.exp(t1 - top) + np.sign(log_c) * np.exp(t2 - top)
    y = -sign_sin2t * np.exp(t3 - top)
    return 0.5 * np.arctan2(y, x)


def compose_arrays(B: PolarArrays, A: PolarArrays) -> PolarArrays:
    """Entrywise polar data of B · A, broadcasting the two batches."""
    arrays = np.broadcast_arrays(
        np.asarray(A.log_sigma, dtype=np.float64),
        np.asarray(A.u, dtype=np.float64),
        np.asarray(A.s, dtype=np.float64),
        np.asarray(B.log_sigma, dtype=np.float64),
        np.asarray(B.u, dtype=np.float64),
        np.asarray(B.s, dtype=np.float64),
    )
    shape = arrays[0].shape
    l1, u_a, s_a, l2, u_b, s_b = (np.ravel(a) for a in arrays)
    delta = u_a - s_b
    cos_t = -np.sin(delta)
    sin_t = np.cos(delta)

    with np.errstate(divide="ignore"):
        log_cos2 = 2.0 * np.log(np.abs(cos_t))
        log_sin2 = 2.0 * np.log(np.abs(sin_t))
    log_a = l1 + l2
    log_c = l1 - l2
    log_b = logsumexp(
        np.stack([2 * log_a + log_cos2, -2 * log_a + log_cos2, 2 * log_c + log_sin2, -2 * log_c + log_sin2]),
        axis=0,
    )
    log_sin2t = math.log(2.0) + 0.5 * (log_cos2 + log_sin2)
    sign_sin2t = np.sign(cos_t * sin_t)

    y = 4.0 * np.exp(-2.0 * log_b)
    with np.errstate(invalid="ignore"):
        log_sigma = 0.5 * (log_b + np.log1p(-y / (2.0 * (1.0 + np.sqrt(np.maximum(1.0 - y, 0.0))))))
    s_mid = HALF_PI + _major_axis(log_a, log_c, l2, log_cos2, log_sin2, log_sin2t, sign_sin2t)
    u_mid = _major_axis(log_a, -log_c, l1, log_cos2, log_sin2, log_sin2t, -sign_sin2t)

    small = log_b < LOG_FOUR
    flags = np.zeros(log_b.shape, dtype=bool)
    if np.any(small):
        sign_cos = np.sign(cos_t[small])
        with np.errstate(divide="ignore"):
            log_cos = np.log(np.abs(cos_t[small]))
        a11 = sign_cos * np.exp(log_a[small] + log_cos)
        a22 = sign_cos * np.exp(-log_a[small] + log_cos)
        a12 = -np.exp(-log_c[small]) * sin_t[small]
        a21 = np.exp(log_c[small]) * sin_t[small]
        ls, uu, ss = _svd_angles(a11, a12, a21, a22)
        log_sigma[small] = ls
        u_mid[small] = uu
        s_mid[small] = ss
        flags[small] = log_a[small] - ls > _CANCELLATION_FLAG

    log_sigma = np.clip(log_sigma, 0.0, log_a)
    u = reduce_angle(u_b + u_mid)
    s = reduce_angle(s_mid + s_a - HALF_PI)
    flags = flags.reshape(shape)
    for parent in (A.ill_conditioned, B.ill_conditioned):
        if parent is not None:
            flags = flags | parent
    return PolarArrays(log_sigma.reshape(shape), u.reshape(shape), s.reshape(shape), flags)


def compose(B: LogPolarSL2, A: LogPolarSL2) -> LogPolarSL2:
    """Polar data of the product B · A computed in log scale."""
    out = compose_arrays(
        PolarArrays(np.array(B.log_sigma), np.array(B.u), np.array(B.s)),
        PolarArrays(np.array(A.log_sigma), np.array(A.u), np.array(A.s)),
    )
    flag = bool(out.ill_conditioned) or A.ill_conditioned or B.ill_conditioned
    if flag:
        logger.debug("near total cancellation: %.3g + %.3g -> %.3g", A.log_sigma, B.log_sigma, float(out.log_sigma))
    return LogPolarSL2(float(out.log_sigma), float(out.u), float(out.s), flag)


def compose_chain(blocks: Sequence[LogPolarSL2]) -> LogPolarSL2:
    """The cocycle product blocks[-1] ⋯ blocks[1] · blocks[0]; the empty chain is the identity."""
    if not blocks:
        return LogPolarSL2.identity()
    acc = blocks[0]
    for block in blocks[1:]:
        acc = compose(block, acc)
    return acc


def fold(factors: PolarArrays, keep_prefixes: bool = False):
    """Batched compose_chain along axis 0 of the factor arrays.

    Args:
        factors: Factors A_0, ..., A_{r−1} stacked on the first axis
        keep_prefixes: Also return ln‖A_{i−1}⋯A_0‖ for i = 1..r

    Returns:
        The product, or (product, prefix log norms) when keep_prefixes is set
    """
    acc = factors[0]
    prefixes = [np.asarray(acc.log_sigma)] if keep_prefixes else None
    for i in range(1, factors.shape[0]):
        acc = compose_arrays(factors[i], acc)
        if keep_prefixes:
            prefixes.append(np.asarray(acc.log_sigma))
    if keep_prefixes:
        return acc, np.stack(prefixes)
    return acc


def suffix_log_norms(factors: PolarArrays) -> np.ndarray:
    """ln‖A_{r−1}⋯A_{r−i}‖ for i = 1..r, the prefix norms of the inverse-reversed block."""
    r = factors.shape[0]
    acc = factors[r - 1]
    norms = [np.asarray(acc.log_sigma)]
    for i in range(r - 2, -1, -1):
        acc = compose_arrays(acc, factors[i])
        norms.append(np.asarray(acc.log_sigma))
    return np.stack(norms)


def rotate_right(A: LogPolarSL2, theta: float) -> LogPolarSL2:
    """A · R_θ, which moves s to s − θ."""
    return LogPolarSL2(A.log_sigma, A.u, A.s - theta, A.ill_conditioned)


def rotate_left(A: LogPolarSL2, theta: float) -> LogPolarSL2:
    """R_θ · A, which moves u to u + θ."""
    return LogPolarSL2(A.log_sigma, A.u + theta, A.s, A.ill_conditioned)


def inverse(A: LogPolarSL2) -> LogPolarSL2:
    """A⁻¹."""
    return A.inverse()


def block_margins(factors: PolarArrays, log_mu: float, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Forward and inverse-reversed prefix margins ln‖A^i‖ − i(1−ε) ln μ along axis 0."""
    _, forward = fold(factors, keep_prefixes=True)
    backward = suffix_log_norms(factors)
    steps = np.arange(1, factors.shape[0] + 1, dtype=np.float64)
    steps = steps.reshape((-1,) + (1,) * (forward.ndim - 1))
    rate = (1.0 - epsilon) * log_mu
    return forward - steps * rate, backward - steps * rate


def is_mu_hyperbolic(
    block: Sequence[LogPolarSL2], log_mu: float, epsilon: float, log_cap: Optional[float] = None
) -> HyperbolicityReport:
    """Audit a block against ‖A^i‖ >= μ^{i(1−ε)} for all prefixes of it and of its inverse-reversed block.

    Args:
        block: Matrices A_0, ..., A_{n−1}
        log_mu: ln μ
        epsilon: Rate slack ε
        log_cap: ln λ bounding each factor norm, defaults to ln μ

    Raises:
        ValueError: On an empty block or μ outside (1, λ]
    """
    if not block:
        raise ValueError("block is empty")
    if log_cap is None:
        log_cap = log_mu
    if not 0.0 < log_mu <= log_cap + 1e-12:
        raise ValueError("need 1 < mu <= lambda_cap")
    factors = PolarArrays.from_polars(block)
    forward, backward = block_margins(factors, log_mu, epsilon)
    max_factor = float(np.max(factors.log_sigma))
    verdict = bool(np.all(forward >= 0.0) and np.all(backward >= 0.0) and max_factor <= log_cap + 1e-12)
    return HyperbolicityReport(
        block_length=len(block),
        log_mu=log_mu,
        epsilon=epsilon,
        log_cap=log_cap,
        forward_margins=[float(v) for v in forward],
        inverse_margins=[float(v) for v in backward],
        max_factor_log_norm=max_factor,
        verdict=verdict,
    )


def young_check(
    block: Sequence[LogPolarSL2], C: LogPolarSL2, log_mu: float, epsilon: float, m: Optional[int] = None
) -> InequalityCheck:
    """Check ln‖A^n · C‖ >= (m+n)(1−ε) ln μ + ln θ, where 2θ = d(s(C⁻¹), s(A^n)).

    Args:
        block: A μ-hyperbolic block A_0, ..., A_{n−1}
        C: Matrix applied first, with ‖C‖ >= μ^m
        log_mu: ln μ
        epsilon: Rate slack ε
        m: Exponent of the norm of C, defaults to the largest admissible integer

    Raises:
        PreconditionFailed: If the block is not μ-hyperbolic or ‖C‖ < μ^m
    """
    report = is_mu_hyperbolic(block, log_mu, epsilon, log_cap=max(log_mu, max(b.log_sigma for b in block)))
    if not report.verdict:
        raise PreconditionFailed(f"block is not mu-hyperbolic (min margin {report.min_margin:.3e})")
    if m is None:
        m = int(math.floor(C.log_sigma / log_mu + 1e-12))
    if C.log_sigma < m * log_mu - 1e-12:
        raise PreconditionFailed(f"||C|| is below mu^{m}")
    power = compose_chain(block)
    theta = 0.5 * float(projective_distance(C.u, power.s))
    value = compose(power, C).log_sigma
    bound = (m + len(block)) * (1.0 - epsilon) * log_mu + (math.log(theta) if theta > 0.0 else -math.inf)
    return InequalityCheck(name="young", lhs=bound, rhs=value, passed=value >= bound - 1e-12, vacuous=theta == 0.0)


def cancellation_check(A: LogPolarSL2, B: LogPolarSL2, tolerance: float = PROJECTIVE_TOL) -> InequalityCheck:
    """Check ln‖B·A‖ <= ln 2 + |ln‖A‖ − ln‖B‖| for an aligned pair.

    The pair is aligned when the expanded image of A falls on the contracted direction of B, which puts the
    middle angle of the product at π/2.

    Raises:
        PreconditionFailed: If the pair is not aligned within tolerance
    """
    residual = float(projective_distance(A.u, B.s))
    if residual > tolerance:
        raise PreconditionFailed(f"pair is not aligned: residual {residual:.3e}")
    value = compose(B, A).log_sigma
    bound = math.log(2.0) + abs(A.log_sigma - B.log_sigma)
    return InequalityCheck(name="cancellation", lhs=value, rhs=bound, passed=value <= bound + 1e-12)
