"""Extended-precision reference computations used as oracles by checks and tests."""

import math
from typing import Callable, Sequence

from mpmath import mp

from cocyclab.constants import ORACLE_DPS
from cocyclab.sl2 import LogPolarSL2


def _digits(blocks: Sequence[LogPolarSL2]) -> int:
    total = sum(b.log_sigma for b in blocks)
    return ORACLE_DPS + int(total / math.log(10.0)) + 10


def _rotation(theta):
    return mp.matrix([[mp.cos(theta), -mp.sin(theta)], [mp.sin(theta), mp.cos(theta)]])


def dense_matrix(P: LogPolarSL2):
    """R_u · diag(σ, 1/σ) · R_{π/2−s} as an mpmath matrix at the working precision."""
    sigma = mp.exp(mp.mpf(P.log_sigma))
    middle = mp.matrix([[sigma, 0], [0, 1 / sigma]])
    return _rotation(mp.mpf(P.u)) * middle * _rotation(mp.pi / 2 - mp.mpf(P.s))


def polar_mp(m) -> tuple:
    """Closed-form polar data (ln σ, u, s) of a unimodular mpmath matrix, angles reduced mod π."""
    e = (m[0, 0] + m[1, 1]) / 2
    f = (m[0, 0] - m[1, 1]) / 2
    g = (m[1, 0] + m[0, 1]) / 2
    h = (m[1, 0] - m[0, 1]) / 2
    r = mp.sqrt(f**2 + g**2)
    a1 = mp.atan2(g, f)
    a2 = mp.atan2(h, e)
    if r == 0:
        u, s = mp.mpf(0), mp.pi / 2 - a2
    else:
        u, s = (a2 + a1) / 2, mp.pi / 2 - (a2 - a1) / 2
    return mp.asinh(r), u % mp.pi, s % mp.pi


def dense_product(blocks: Sequence[LogPolarSL2]) -> LogPolarSL2:
    """blocks[-1] ⋯ blocks[0] multiplied densely in extended precision, then reduced to polar form."""
    with mp.workdps(_digits(blocks)):
        acc = mp.eye(2)
        for block in blocks:
            acc = dense_matrix(block) * acc
        log_sigma, u, s = polar_mp(acc)
        return LogPolarSL2(float(log_sigma), float(u), float(s))


def dense_compose(B: LogPolarSL2, A: LogPolarSL2) -> LogPolarSL2:
    """B · A through the dense extended-precision product."""
    return dense_product([A, B])


def prefix_log_norms(blocks: Sequence[LogPolarSL2]) -> list[float]:
    """ln‖A_{i−1}⋯A_0‖ for i = 1..n in extended precision."""
    norms = []
    with mp.workdps(_digits(blocks)):
        acc = mp.eye(2)
        for block in blocks:
            acc = dense_matrix(block) * acc
            norms.append(float(polar_mp(acc)[0]))
    return norms


def derivative(func: Callable, x: float, n: int, dps: int = ORACLE_DPS) -> float:
    """n-th derivative of an mpmath-callable function at x by mpmath numerical differentiation."""
    with mp.workdps(dps):
        return float(mp.diff(func, mp.mpf(x), n))


def bump_derivative_mp(nu: float, x: float, n: int, dps: int = ORACLE_DPS) -> float:
    """n-th derivative of e^{-|x|^{-ν}} at x != 0 in extended precision."""
    sign = 1 if x > 0 else -1
    with mp.workdps(dps):
        value = mp.diff(lambda t: mp.exp(-(t ** (-mp.mpf(nu)))), mp.mpf(abs(x)), n)
    return float(value) * (sign**n)
