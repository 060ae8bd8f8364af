"""Tests for the stage-by-stage construction."""

import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from cocyclab.arithmetic import min_return_time
from cocyclab.construction import (
    AngleFunction,
    build_correction,
    build_degenerate,
    build_stages,
    collapse_check,
    degenerate_distance,
    load_snapshot,
    norm_envelope,
    return_block,
    save_snapshot,
    stage_init,
    verify_alignment,
    verify_conjugation,
)
from cocyclab.errors import NotHyperbolic, PreconditionFailed
from cocyclab.gevrey.functions import Constant
from cocyclab.models import ExperimentConfig


@pytest.fixture(scope="module")
def config():
    """Small, well-separated construction: λ = 10¹², coarse grids, permissive tolerances."""
    return ExperimentConfig(
        lam=1e12,
        chebyshev_nodes=33,
        audit_grid=9,
        interpolation_tol=1e-6,
        alignment_tol=1e-6,
        conjugation_tol=1e-6,
    )


@pytest.fixture(scope="module")
def construction(config):
    """One corrected stage and its degenerate counterpart."""
    return build_stages(config, 1)


def test_stage_init(config):
    """Test the initial stage is hyperbolic with the minimal return time as block length."""
    stage = stage_init(config)
    assert stage.kind == "initial"
    assert stage.n == config.start_index
    assert stage.block_length == min_return_time(stage.geometry, stage.n)
    assert stage.audit.hyperbolic
    assert stage.angle.mode == "initial"


def test_stage_init_rejects_flat_angle(config):
    """Test φ₀ ≡ 0 gives Λ·R_{π/2}, whose products collapse."""
    with pytest.raises(NotHyperbolic):
        stage_init(config, base=Constant(0.0))
    stage = stage_init(config, base=Constant(0.0), strict=False)
    assert not stage.audit.hyperbolic


def test_stage_evaluates_polar_factors(config):
    """Test A_n(x) = (ln λ, 0, φ(x)) in polar form."""
    stage = stage_init(config)
    xs = np.array([0.1, 1.0, 2.5])
    factors = stage(xs)
    np.testing.assert_allclose(factors.log_sigma, config.log_lambda)
    np.testing.assert_array_equal(factors.u, 0.0)
    np.testing.assert_allclose(factors.s, stage.angle(xs))


def test_corrected_stage(construction):
    """Test the corrected stage is hyperbolic, aligned with φ₀ and conjugate to the previous one."""
    (corrected, _), = construction.pairs()
    assert corrected.kind == "corrected"
    assert corrected.audit.hyperbolic
    assert corrected.audit.interpolation_residual <= corrected.config.interpolation_tol
    assert corrected.alignment.target == "phi0"
    assert corrected.alignment.inner_ok
    assert corrected.conjugation.passed
    assert corrected.angle.mode == "corrected"


def test_degenerate_stage(construction):
    """Test the degenerate stage aligns s and s' on I_n/10 and stays hyperbolic."""
    (corrected, degenerate), = construction.pairs()
    assert degenerate.kind == "degenerate"
    assert degenerate.block_length == corrected.block_length
    assert degenerate.audit.hyperbolic
    assert degenerate.alignment.target == "zero"
    assert degenerate.alignment.inner_ok
    assert degenerate.conjugation.passed


def test_degenerate_matches_corrected_off_interval(construction):
    """Test φ̃_n = φ_n outside I_n and φ̃_n = φ_n − φ₀ on I_n/10."""
    (corrected, degenerate), = construction.pairs()
    geometry = corrected.geometry
    n = corrected.n
    outside = geometry.c1 + np.array([0.5, 1.0, 2.0])
    np.testing.assert_array_equal(degenerate.angle(outside), corrected.angle(outside))
    inner = geometry.grid(n, 7, shrink=10.0)
    expected = corrected.angle(inner) - corrected.angle.base(inner)
    np.testing.assert_allclose(degenerate.angle(inner), expected, rtol=1e-12, atol=1e-18)


def test_construction_audits_in_order(construction):
    """Test audits are listed as initial, corrected, degenerate."""
    kinds = [audit.kind for audit in construction.audits()]
    assert kinds == ["initial", "corrected", "degenerate"]
    assert construction.indices == [construction.initial.n]


def test_build_stages_rejects_short_prefix(config):
    """Test stages beyond the partial quotient prefix are refused."""
    with pytest.raises(ValueError):
        build_stages(config, config.prefix_length)


def test_return_block(construction):
    """Test return blocks inside I_n and the precondition outside it."""
    (corrected, _), = construction.pairs()
    block = return_block(corrected, corrected.geometry.c1)
    assert block.r_plus == corrected.block_length
    assert block.hyperbolicity.verdict
    with pytest.raises(PreconditionFailed):
        return_block(corrected, corrected.geometry.c1 + 1.0)


def test_norm_envelope(construction):
    """Test the forward block norms sit between r·ln λ_n and r·ln λ̃_n."""
    (corrected, _), = construction.pairs()
    lower, upper = norm_envelope(corrected)
    assert lower.passed
    assert upper.passed


def test_degenerate_distance(construction):
    """Test sup|φ_n − φ̃_n| stays below q_n^{-2}."""
    corrected, degenerate = construction.pairs()[0]
    distance = degenerate_distance(corrected, degenerate, k_max=6)
    assert distance.passed
    assert distance.reference == pytest.approx(corrected.geometry.q(corrected.n) ** -2.0)


def test_collapse_check(construction):
    """Test the collapse bound of the degenerate blocks."""
    _, degenerate = construction.pairs()[0]
    assert collapse_check(degenerate).passed


def test_angle_function_without_corrections():
    """Test last_term needs at least one correction."""
    with pytest.raises(ValueError):
        AngleFunction(Constant(0.1)).last_term()


def test_snapshot_roundtrip(construction):
    """Test a saved stage reloads to the same angle function and reports."""
    _, degenerate = construction.pairs()[0]
    with tempfile.TemporaryDirectory() as tmpdir:
        path = save_snapshot(degenerate, Path(tmpdir) / "snapshots" / "stage.json")
        loaded = load_snapshot(path)
    xs = np.linspace(0.0, 2 * np.pi, 50, endpoint=False)
    xs = np.concatenate([xs, degenerate.geometry.grid(degenerate.n, 9)])
    np.testing.assert_array_equal(loaded.angle(xs), degenerate.angle(xs))
    assert loaded.kind == "degenerate"
    assert loaded.block_length == degenerate.block_length
    assert loaded.config == degenerate.config
    assert loaded.audit == degenerate.audit


def test_snapshot_schema_version(construction):
    """Test unknown snapshot versions are refused."""
    with tempfile.TemporaryDirectory() as tmpdir:
        path = save_snapshot(construction.initial, Path(tmpdir) / "stage.json")
        document = json.loads(path.read_text(encoding="utf-8"))
        document["schema_version"] = 99
        path.write_text(json.dumps(document), encoding="utf-8")
        with pytest.raises(ValueError):
            load_snapshot(path)


def test_snapshot_refuses_custom_base(config):
    """Test stages on a custom base angle cannot be saved."""
    stage = stage_init(config, base=Constant(0.1), strict=False)
    with tempfile.TemporaryDirectory() as tmpdir:
        with pytest.raises(ValueError):
            save_snapshot(stage, Path(tmpdir) / "stage.json")


def test_build_correction_is_reproducible(construction):
    """Test rebuilding stage N from the initial cocycle gives the same angle function."""
    corrected, _ = construction.pairs()[0]
    again = build_correction(construction.initial, corrected.n)
    xs = np.concatenate([corrected.geometry.grid(corrected.n, 7), np.array([0.1, 2.0, 4.0])])
    np.testing.assert_array_equal(again.angle(xs), corrected.angle(xs))
    assert again.block_length == corrected.block_length


def test_build_degenerate_appends_cutoff_term(construction):
    """Test the degenerate stage adds one term to the corrected angle."""
    corrected, degenerate = construction.pairs()[0]
    rebuilt = build_degenerate(corrected)
    assert len(rebuilt.angle.corrections) == len(corrected.angle.corrections) + 1
    xs = corrected.geometry.grid(corrected.n, 7)
    np.testing.assert_array_equal(rebuilt.angle(xs), degenerate.angle(xs))


def test_verify_reports_on_coarser_grid(construction):
    """Test the alignment and conjugation verdicts hold on a different grid."""
    corrected, degenerate = construction.pairs()[0]
    assert verify_alignment(corrected, points=5).inner_ok
    assert verify_alignment(degenerate, points=5).inner_ok
    assert verify_conjugation(construction.initial, corrected, points=5).passed
    assert verify_conjugation(corrected, degenerate, points=5).passed


@pytest.fixture(scope="module")
def three_stages():
    """Stages N, N+1, N+2 at the default grids and tolerances, λ = 10¹²."""
    return build_stages(ExperimentConfig(lam=1e12, audit_grid=9), 3)


def _outside(geometry, n, count=64):
    """Phases of a uniform grid that lie outside I_n."""
    xs = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
    return xs[~geometry.contains(xs, n)]


def test_three_stages_are_built(three_stages):
    """Test every corrected stage is hyperbolic with its interpolation residual in tolerance."""
    start = three_stages.initial.n
    assert three_stages.indices == [start, start + 1, start + 2]
    for corrected, degenerate in three_stages.pairs():
        assert corrected.audit.hyperbolic
        assert corrected.audit.interpolation_residual <= corrected.config.interpolation_tol
        assert degenerate.n == corrected.n
    assert [c.n for c in three_stages.corrected[-1].angle.corrections] == three_stages.indices


def test_support_invariant_across_stages(three_stages):
    """Test φ_n = φ_{n−1} and φ̃_n = φ_n bit for bit outside I_n at every stage."""
    previous = three_stages.initial
    for corrected, degenerate in three_stages.pairs():
        outside = _outside(corrected.geometry, corrected.n)
        assert outside.size > 0
        np.testing.assert_array_equal(corrected.angle(outside), previous.angle(outside))
        np.testing.assert_array_equal(degenerate.angle(outside), corrected.angle(outside))
        previous = corrected


def test_corrections_vanish_outside_their_interval(three_stages):
    """Test every correction of the last stage is exactly 0 outside its own I_i."""
    last = three_stages.degenerate[-1]
    for correction in last.angle.corrections:
        term = last.angle.term(correction)
        assert np.all(term(_outside(last.geometry, correction.n)) == 0.0)


def test_corrections_decay_geometrically(three_stages):
    """Test sup|ê_{n+1}| <= sup|ê_n| / 2 on I_{n+1}, down to the rounding floor."""
    sups = []
    for corrected in three_stages.corrected:
        xs = corrected.geometry.grid(corrected.n, 101)
        sups.append(float(np.max(np.abs(corrected.angle.last_term()(xs)))))
    for before, after in zip(sups, sups[1:]):
        assert after <= 0.5 * before + 1e-12


def test_identities_at_second_stage(three_stages):
    """Test conjugation and alignment of stage N+1 against stage N."""
    corrected, degenerate = three_stages.pairs()[1]
    assert corrected.n == three_stages.initial.n + 1
    assert corrected.conjugation.passed
    assert corrected.conjugation.deviation <= corrected.config.conjugation_tol
    assert corrected.alignment.inner_ok
    assert degenerate.alignment.inner_ok
    assert degenerate.conjugation.passed
    assert verify_conjugation(three_stages.corrected[0], corrected, points=5).passed


def test_collapse_check_every_stage(three_stages):
    """Test the collapse bound holds for the degenerate blocks of every stage."""
    for _, degenerate in three_stages.pairs():
        check = collapse_check(degenerate)
        assert check.passed, check
        assert check.lhs <= check.rhs + 1e-9 * max(1.0, abs(check.rhs))


def test_return_block_at_interval_endpoints(construction):
    """Test the rounded endpoints c ± r of both components are accepted."""
    (corrected, _), = construction.pairs()
    for x in corrected.geometry.grid(corrected.n, 2):
        block = return_block(corrected, float(x))
        assert block.r_plus == corrected.block_length
