"""Tests for the flat bump, its coefficient table and the cutoffs built from it."""

import math

import numpy as np
import pytest
from mpmath import mp

from cocyclab.arithmetic import CriticalGeometry, Frequency
from cocyclab.gevrey.bumps import (
    Plateau,
    bump_coefficients,
    bump_derivative,
    bump_eval,
    fit_gevrey_constant,
    gevrey_bound_violations,
    inverse_bump_bound_check,
    inverse_bump_derivative,
    log_inverse_bump_derivative,
    periodic_bump,
    plateau,
    sample_angle,
)
from cocyclab.models import ExperimentConfig
from cocyclab.oracles import bump_derivative_mp, derivative


def test_coefficient_table_first_rows():
    """Test a_1^1 = ν, a_1^2 = −ν(ν+1) and a_2^2 = ν²."""
    table = bump_coefficients(0.5, 10)
    np.testing.assert_allclose(table.row(1), [0.5])
    np.testing.assert_allclose(table.row(2), [-0.75, 0.25])
    np.testing.assert_allclose(table.row(0), [1.0])


@pytest.mark.parametrize("nu", [0.3, 0.5, 0.8])
def test_coefficient_bound_holds(nu):
    """Test every tabulated entry up to order 60 respects its bound."""
    assert bump_coefficients(nu).bound_violations() == []


def test_coefficient_table_limits():
    """Test invalid ν and orders are refused."""
    with pytest.raises(ValueError):
        bump_coefficients(0.0)
    with pytest.raises(ValueError):
        bump_coefficients(0.5, 61)


@pytest.mark.parametrize("x", [0.3, 0.6, -0.45])
@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_bump_derivative_against_mpmath(x, n):
    """Test the log-scale expansion against extended-precision differentiation."""
    expected = bump_derivative_mp(0.5, x, n)
    assert float(bump_derivative(0.5, x, n)) == pytest.approx(expected, rel=1e-8)


def test_bump_is_flat_at_zero():
    """Test the bump and all its derivatives vanish at 0."""
    assert bump_eval(0.5, 0.0) == 0.0
    for n in range(0, 10):
        assert bump_derivative(0.5, 0.0, n) == 0.0
    assert bump_derivative(0.5, 1e-6, 5) < 1e-30


def test_inverse_bump_derivative():
    """Test h = e^{|x|^{−ν}} and its singularity at 0."""
    x = 0.4
    expected = derivative(lambda t: mp.exp(t ** mp.mpf(-0.5)), x, 3)
    assert float(inverse_bump_derivative(0.5, x, 3)) == pytest.approx(expected, rel=1e-8)
    with pytest.raises(ValueError):
        log_inverse_bump_derivative(0.5, np.array([0.1, 0.0]), 2)


def test_gevrey_constant_fit():
    """Test the fitted constant is finite and makes the bound hold on its samples."""
    xs = np.concatenate([-np.linspace(0.05, 1.0, 20), np.linspace(0.05, 1.0, 20)])
    C = fit_gevrey_constant(0.5, xs, 20)
    assert 0.0 < C < math.inf
    assert gevrey_bound_violations(0.5, xs, 20, C) == 0
    assert gevrey_bound_violations(0.5, xs, 20, 0.5 * C) > 0


def test_inverse_bump_constant_fit():
    """Test the inverse bump bound constant is finite on a sample grid."""
    C = inverse_bump_bound_check(0.5, np.linspace(0.05, 1.0, 20), 12)
    assert 0.0 < C < math.inf


def test_periodic_bump_zeros_and_period():
    """Test g vanishes on c1 + πZ and is π-periodic."""
    g = periodic_bump(0.3, 0.5, amplitude=2.0)
    assert g(0.3) == 0.0
    assert g(0.3 + math.pi) == 0.0
    assert float(g(1.1)) == pytest.approx(float(g(1.1 + math.pi)), rel=1e-12)
    mid = 0.3 + math.pi / 2
    assert float(g(mid)) == pytest.approx(2.0 * math.exp(-2.0 * (math.pi / 2) ** -0.5), rel=1e-12)
    with pytest.raises(ValueError):
        periodic_bump(0.3, 1.0)


def test_periodic_bump_jet():
    """Test the product jet of the periodic bump against mpmath."""
    g = periodic_bump(0.3, 0.5)
    x = 1.3
    jet = g.jet(x, 4)

    def exact(t):
        u = t - mp.mpf(0.3)
        return mp.exp(-(u ** mp.mpf(-0.5)) - (mp.pi - u) ** mp.mpf(-0.5))

    for k in range(5):
        assert float(jet.derivative(k)) == pytest.approx(derivative(exact, x, k), rel=1e-8)


def test_plateau_levels():
    """Test 1 on the inner tenth, 0 beyond the fifth and strictly between in the transition."""
    cutoff = Plateau(0.3, 1.0, 2.0)
    assert cutoff(0.3 + 0.099) == 1.0
    assert cutoff(0.3 - 0.099 + math.pi) == 1.0
    assert cutoff(0.3 + 0.201) == 0.0
    assert cutoff(0.3 + 1.5) == 0.0
    assert 0.0 < float(cutoff(0.45)) < 1.0


@pytest.mark.parametrize("x", [0.44, 0.45, 0.47])
def test_plateau_jet_in_transition(x):
    """Test plateau derivatives in the transition against mpmath, relative to the largest of them."""
    cutoff = Plateau(0.3, 1.0, 2.0)
    jet = cutoff.jet(x, 3)

    def exact(t):
        z = 10 * (t - mp.mpf(0.3))
        return 1 / (1 + mp.exp(-((z - 1) ** -2 - (2 - z) ** -2)))

    expected = [float(derivative(exact, x, k)) for k in range(4)]
    scale = max(abs(v) for v in expected)
    for k in range(4):
        assert float(jet.derivative(k)) == pytest.approx(expected[k], rel=1e-6, abs=1e-9 * scale)


def test_plateau_jet_flat_outside_transition():
    """Test higher jet coefficients vanish where the plateau is constant."""
    cutoff = Plateau(0.3, 1.0, 2.0)
    jet = cutoff.jet(np.array([0.3, 0.35, 1.5]), 5)
    np.testing.assert_array_equal(jet.coeffs[1:], 0.0)
    np.testing.assert_array_equal(jet.coeffs[0], [1.0, 1.0, 0.0])


def test_plateau_from_geometry():
    """Test the stage cutoff uses the interval radius and c1."""
    geometry = CriticalGeometry.from_config(ExperimentConfig(), Frequency.preset("golden", 40))
    f = plateau(6, geometry, 0.05)
    assert f.radius == pytest.approx(geometry.radius(6))
    assert f.exponent == pytest.approx(20.0)
    assert f(geometry.c1) == 1.0
    assert f(geometry.c2) == 1.0
    with pytest.raises(ValueError):
        plateau(6, geometry, 0.0)


def test_sample_angle():
    """Test φ₀ = arcsin(c·g) and the admissible amplitude range."""
    phi0 = sample_angle(1e-4, 0.3, 0.5)
    mid = 0.3 + math.pi / 2
    expected = math.asin(1e-4 * math.exp(-2.0 * (math.pi / 2) ** -0.5))
    assert float(phi0(mid)) == pytest.approx(expected, rel=1e-12)
    assert phi0(0.3) == 0.0
    with pytest.raises(ValueError):
        sample_angle(0.01, 0.3, 0.5)
