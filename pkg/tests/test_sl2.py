"""Tests for the log-polar SL(2,R) calculus."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cocyclab.errors import NonUnimodular, PreconditionFailed, RepresentationOverflow
from cocyclab.oracles import dense_compose, dense_product, prefix_log_norms
from cocyclab.sl2 import (
    HALF_PI,
    DenseSL2,
    LogPolarSL2,
    PolarArrays,
    block_margins,
    cancellation_check,
    compose,
    compose_arrays,
    compose_chain,
    fold,
    is_mu_hyperbolic,
    polar,
    proj_diff,
    projective_distance,
    reconstruct,
    young_check,
)

angles = st.floats(min_value=0.0, max_value=math.pi, exclude_max=True)
log_norms = st.floats(min_value=0.0, max_value=20.0)
polars = st.builds(LogPolarSL2, log_norms, angles, angles)


def test_diag_and_rotation_forms():
    """Test Λ and R_ψ in canonical polar form."""
    L = LogPolarSL2.hyperbolic(math.log(10.0))
    assert (L.u, L.s) == (0.0, pytest.approx(HALF_PI))
    R = LogPolarSL2.rotation(0.3)
    assert R.log_sigma == 0.0
    assert R.s == pytest.approx(HALF_PI - 0.3)


def test_polar_reconstruct_roundtrip():
    """Test polar ∘ reconstruct on a fixed matrix."""
    P = LogPolarSL2(2.0, 0.4, 1.1)
    Q = polar(reconstruct(P))
    assert Q.log_sigma == pytest.approx(2.0, rel=1e-12)
    assert projective_distance(Q.u, P.u) < 1e-12
    assert projective_distance(Q.s, P.s) < 1e-12


def test_polar_diag():
    """Test diag(λ, 1/λ) has its contracted direction on the vertical axis."""
    P = polar(DenseSL2(10.0, 0.0, 0.0, 0.1))
    assert P.log_sigma == pytest.approx(math.log(10.0))
    assert projective_distance(P.s, HALF_PI) < 1e-14
    assert projective_distance(P.u, 0.0) < 1e-14


def test_polar_rejects_non_unimodular():
    """Test determinant checking."""
    with pytest.raises(NonUnimodular):
        polar(DenseSL2(2.0, 0.0, 0.0, 1.0))


def test_reconstruct_overflow():
    """Test dense reconstruction refuses huge norms."""
    with pytest.raises(RepresentationOverflow):
        reconstruct(LogPolarSL2(1000.0, 0.0, 0.0))


def test_contracted_direction_is_contracted():
    """Test A maps (cos s, sin s) to a vector of length 1/σ."""
    P = LogPolarSL2(1.5, 0.2, 0.9)
    A = reconstruct(P).array
    v = A @ np.array([math.cos(P.s), math.sin(P.s)])
    assert np.linalg.norm(v) == pytest.approx(math.exp(-1.5), rel=1e-12)


def test_inverse_swaps_directions():
    """Test A⁻¹ has the same norm with u and s swapped."""
    P = LogPolarSL2(3.0, 0.2, 1.3)
    Q = P.inverse()
    assert (Q.log_sigma, Q.u, Q.s) == (P.log_sigma, P.s, P.u)
    assert compose(Q, P).log_sigma < 1e-9


def test_rotations_shift_angles():
    """Test A·R_θ moves s and R_θ·A moves u."""
    P = LogPolarSL2(2.0, 0.5, 1.0)
    right = compose(P, LogPolarSL2.rotation(0.2))
    left = compose(LogPolarSL2.rotation(0.2), P)
    assert projective_distance(right.s, P.rotate_right(0.2).s) < 1e-12
    assert projective_distance(left.u, P.rotate_left(0.2).u) < 1e-12
    assert right.log_sigma == pytest.approx(2.0, rel=1e-12)


def test_hyperbolic_with_angle():
    """Test Λ·R_{π/2−φ} has s = φ."""
    P = compose(LogPolarSL2.hyperbolic(4.0), LogPolarSL2.rotation(HALF_PI - 0.7))
    assert P.log_sigma == pytest.approx(4.0, rel=1e-12)
    assert projective_distance(P.s, 0.7) < 1e-12
    assert projective_distance(P.s, LogPolarSL2.from_angle(4.0, 0.7).s) < 1e-12


@given(polars, polars)
@settings(max_examples=200, deadline=None)
def test_compose_matches_oracle(A, B):
    """Test compose against the extended-precision dense product."""
    fast = compose(B, A)
    exact = dense_compose(B, A)
    assert abs(fast.log_sigma - exact.log_sigma) <= 1e-10 * max(1.0, exact.log_sigma)
    if exact.log_sigma > 1e-3:
        assert projective_distance(fast.s, exact.s) < 1e-8
        assert projective_distance(fast.u, exact.u) < 1e-8


def test_compose_perpendicular_is_rotation():
    """Test Λ R_{π/2} Λ is a rotation."""
    L = LogPolarSL2.hyperbolic(15.0)
    product = compose(LogPolarSL2.from_angle(15.0, 0.0), L)
    assert product.log_sigma <= 1e-12


def test_compose_aligned_adds_norms():
    """Test a zero middle angle adds the log norms exactly."""
    A = LogPolarSL2(7.0, 0.4, 1.0)
    B = LogPolarSL2(5.0, 2.0, 0.4 + HALF_PI)
    assert compose(B, A).log_sigma == pytest.approx(12.0, abs=1e-12)


def test_compose_no_overflow():
    """Test products far beyond the float range keep finite log norms."""
    L = LogPolarSL2.from_angle(400.0, 0.3)
    P = compose_chain([L] * 10)
    assert math.isfinite(P.log_sigma)
    assert P.log_sigma == pytest.approx(4000.0 + 9 * math.log(math.sin(0.3)), rel=1e-9)


def test_compose_arrays_broadcast():
    """Test batched composition against the scalar version."""
    phis = np.linspace(0.0, math.pi, 7, endpoint=False)
    A = PolarArrays.from_angles(3.0, phis)
    B = PolarArrays.from_angles(2.0, phis[::-1])
    out = compose_arrays(B, A)
    for i in range(phis.size):
        scalar = compose(B.item(i), A.item(i))
        assert out.log_sigma[i] == pytest.approx(scalar.log_sigma, rel=1e-14, abs=1e-14)


def test_fold_matches_dense_product():
    """Test fold and its prefix norms against the dense oracle."""
    rng = np.random.default_rng(3)
    blocks = [LogPolarSL2.from_angle(5.0, phi) for phi in rng.uniform(0.0, math.pi, 12)]
    factors = PolarArrays.from_polars(blocks)
    product, prefixes = fold(factors, keep_prefixes=True)
    exact = dense_product(blocks)
    assert float(product.log_sigma) == pytest.approx(exact.log_sigma, rel=1e-9)
    np.testing.assert_allclose(prefixes, prefix_log_norms(blocks), rtol=1e-9, atol=1e-9)


def test_compose_chain_empty_is_identity():
    """Test the empty chain."""
    assert compose_chain([]) == LogPolarSL2.identity()


def test_proj_diff_branch():
    """Test signed projective differences lie on the branch nearest 0."""
    assert proj_diff(0.1, math.pi - 0.1) == pytest.approx(0.2)
    assert proj_diff(math.pi - 0.1, 0.1) == pytest.approx(-0.2)
    assert projective_distance(0.0, math.pi) == pytest.approx(0.0)


@pytest.mark.parametrize(
    "a, b, expected",
    [(0.0, 6.07e-20, 6.07e-20), (6.07e-20, 0.0, 6.07e-20), (1e-300, -1e-300, 2e-300)],
)
def test_projective_distance_keeps_tiny_differences(a, b, expected):
    """Test differences far below the spacing of π are not rounded to 0."""
    assert projective_distance(a, b) == pytest.approx(expected, rel=1e-12)


def test_projective_distance_wraps():
    """Test lines a multiple of π apart coincide and the distance is at most π/2."""
    assert projective_distance(math.pi - 1e-3, 0.0) == pytest.approx(1e-3, rel=1e-9)
    assert projective_distance(0.2, 0.2 + 3 * math.pi) == pytest.approx(0.0, abs=1e-14)
    assert projective_distance(0.0, HALF_PI) == pytest.approx(HALF_PI)


def test_block_margins_constant_block():
    """Test a constant Λ block has margins i·ε·ln λ."""
    factors = PolarArrays.from_angles(10.0, np.full((5, 1), HALF_PI))
    forward, backward = block_margins(factors, 10.0, 0.5)
    np.testing.assert_allclose(forward[:, 0], 5.0 * np.arange(1, 6), rtol=1e-12)
    np.testing.assert_allclose(backward[:, 0], 5.0 * np.arange(1, 6), rtol=1e-12)


def test_is_mu_hyperbolic_detects_collapse():
    """Test a block with a perpendicular pair fails the audit."""
    good = [LogPolarSL2.from_angle(10.0, HALF_PI)] * 4
    assert is_mu_hyperbolic(good, 10.0, 0.2).verdict
    bad = [LogPolarSL2.from_angle(10.0, HALF_PI), LogPolarSL2.from_angle(10.0, 0.0)]
    report = is_mu_hyperbolic(bad, 10.0, 0.2)
    assert not report.verdict
    assert report.min_margin < 0.0
    with pytest.raises(ValueError):
        is_mu_hyperbolic([], 10.0, 0.2)


def test_young_check_holds():
    """Test the Young bound on a hyperbolic block and a transverse matrix."""
    block = [LogPolarSL2.from_angle(8.0, 1.2)] * 6
    C = LogPolarSL2(20.0, 0.3, 2.0)
    check = young_check(block, C, 8.0, 0.2)
    assert check.passed
    assert check.margin >= 0.0
    assert not check.vacuous


def test_young_check_precondition():
    """Test the Young check refuses a non-hyperbolic block."""
    bad = [LogPolarSL2.from_angle(10.0, HALF_PI), LogPolarSL2.from_angle(10.0, 0.0)]
    with pytest.raises(PreconditionFailed):
        young_check(bad, LogPolarSL2(1.0, 0.0, 0.0), 10.0, 0.2)


@given(polars, log_norms, angles)
@settings(max_examples=200, deadline=None)
def test_cancellation_bound(A, log_b, u_b):
    """Test ‖BA‖ <= 2·max ratio for aligned pairs."""
    B = LogPolarSL2(log_b, u_b, A.u)
    check = cancellation_check(A, B)
    assert check.passed


def test_cancellation_requires_alignment():
    """Test the cancellation check refuses a misaligned pair."""
    A = LogPolarSL2(3.0, 0.2, 0.5)
    B = LogPolarSL2(3.0, 0.0, 1.0)
    with pytest.raises(PreconditionFailed):
        cancellation_check(A, B)
