"""Stage-by-stage construction of the corrected cocycles A_n and the degenerate cocycles Ã_n.

A stage cocycle is A_n(x) = Λ·R_{π/2−φ_n(x)}, which in polar form is (ln λ, u=0, s=φ_n(x)). Stage n is built
from stage n−1 by comparing the contracted directions of the forward block A^{r}(x) and the backward block
A^{−r}(x) on I_n, where r is the minimal return time to I_n, and adding the correction ê_n = e_n·f_n with

    e_n = φ₀ − (s̄_n − s̄'_n)   on I_n,

so that s_n − s'_n = φ₀ on I_n/10. The degenerate stage adds ẽ_n = −φ₀·f_n on top of φ_n, which makes the
two directions coincide on I_n/10.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial.chebyshev import chebpts2

from cocyclab.arithmetic import TWO_PI, CriticalGeometry, Frequency, lambda_schedule, min_return_time, orbit_points
from cocyclab.constants import DEFAULT_STAGES, SNAPSHOT_SCHEMA_VERSION
from cocyclab.errors import InterpolationDiverged, NotHyperbolic, PreconditionFailed
from cocyclab.gevrey.bumps import Plateau, plateau, sample_angle
from cocyclab.gevrey.functions import ComponentInterpolant, Localized, Scale, SmoothFunction, Sum
from cocyclab.gevrey.jets import JetSeries
from cocyclab.gevrey.seminorm import seminorm_estimate
from cocyclab.models import (
    AlignmentReport,
    ConjugationReport,
    DegenerateDistance,
    ExperimentConfig,
    HyperbolicityReport,
    InequalityCheck,
    StageAudit,
)
from cocyclab.parallel import map_ordered
from cocyclab.sl2 import (
    LogPolarSL2,
    PolarArrays,
    block_margins,
    compose_arrays,
    fold,
    is_mu_hyperbolic,
    proj_diff,
    projective_distance,
)

logger = logging.getLogger(__name__)

StageKind = Literal["initial", "corrected", "degenerate"]


@dataclass(frozen=True)
class StageCorrection:
    """One stage correction: inner·cutoff, exactly zero where the cutoff vanishes.

    A degenerate correction has no inner function; it stands for −φ₀·f_n.
    """

    n: int
    kind: Literal["corrected", "degenerate"]
    cutoff: Plateau
    inner: Optional[SmoothFunction] = None
    residual: Optional[float] = None


class AngleFunction(SmoothFunction):
    """φ = φ₀ + Σ corrections, each supported in its own I_i."""

    def __init__(self, base: SmoothFunction, corrections: Sequence[StageCorrection] = (), base_name: str = "sample"):
        self.base = base
        self.corrections = tuple(corrections)
        self.base_name = base_name

    @property
    def period(self) -> Optional[float]:
        return TWO_PI

    @property
    def mode(self) -> str:
        """Kind of the last correction, "initial" without corrections."""
        return self.corrections[-1].kind if self.corrections else "initial"

    def term(self, correction: StageCorrection) -> SmoothFunction:
        """The correction as a function of x."""
        inner = correction.inner if correction.inner is not None else Scale(-1.0, self.base)
        return Localized(inner, correction.cutoff)

    @cached_property
    def function(self) -> SmoothFunction:
        """The full node tree."""
        return Sum(self.base, *(self.term(c) for c in self.corrections))

    def __call__(self, x) -> np.ndarray:
        return self.function(x)

    def jet(self, x0, order: int) -> JetSeries:
        return self.function.jet(x0, order)

    def with_correction(self, correction: StageCorrection) -> "AngleFunction":
        """New angle function with one more correction."""
        return AngleFunction(self.base, self.corrections + (correction,), self.base_name)

    def last_term(self) -> SmoothFunction:
        """The most recent correction as a function."""
        if not self.corrections:
            raise ValueError("angle function has no corrections")
        return self.term(self.corrections[-1])


@dataclass(frozen=True)
class CocycleStage:
    """The cocycle A_n(x) = Λ·R_{π/2−φ_n(x)} of one stage, with its reports."""

    n: int
    config: ExperimentConfig
    frequency: Frequency
    geometry: CriticalGeometry
    angle: AngleFunction
    kind: StageKind = "initial"
    block_length: int = 0
    audit: Optional[StageAudit] = None
    alignment: Optional[AlignmentReport] = None
    conjugation: Optional[ConjugationReport] = None

    @property
    def log_lambda(self) -> float:
        """ln λ."""
        return self.config.log_lambda

    @property
    def log_mu(self) -> float:
        """Audit rate ln λ_N = (1−ε) ln λ."""
        return (1.0 - self.config.epsilon) * self.config.log_lambda

    def __call__(self, x) -> PolarArrays:
        """A_n at every phase of x."""
        return PolarArrays.from_angles(self.log_lambda, self.angle(np.asarray(x, dtype=np.float64)))

    def orbit_factors(self, xs, indices) -> PolarArrays:
        """A_n(T^i x) with i along axis 0 and x along axis 1."""
        xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
        indices = np.asarray(indices)
        return self(orbit_points(xs[None, :], self.frequency, indices[:, None]))

    def blocks(self, xs, r: int) -> tuple[PolarArrays, PolarArrays]:
        """Forward blocks A^{r}(x) and backward blocks A^{−r}(x) for every x."""
        forward = fold(self.orbit_factors(xs, np.arange(r)))
        past = fold(self.orbit_factors(xs, np.arange(-r, 0)))
        return forward, past.inverse()

    def mismatch(self, xs, r: Optional[int] = None) -> np.ndarray:
        """s(A^{r}(x)) − s(A^{−r}(x)) on the branch nearest 0."""
        forward, backward = self.blocks(xs, r or self.block_length)
        return proj_diff(forward.s, backward.s)


@dataclass(frozen=True)
class ReturnBlockData:
    """Forward and backward return blocks at one phase of I_n."""

    x: float
    r_plus: int
    r_minus: int
    forward: LogPolarSL2
    backward: LogPolarSL2
    hyperbolicity: HyperbolicityReport

    @property
    def s(self) -> float:
        """s(P⁺)."""
        return self.forward.s

    @property
    def s_prime(self) -> float:
        """s(P⁻)."""
        return self.backward.s

    @property
    def mismatch(self) -> float:
        """s − s' on the branch nearest 0."""
        return float(proj_diff(self.s, self.s_prime))


@dataclass
class Construction:
    """All stages of one run: corrected stages and their degenerate counterparts."""

    initial: CocycleStage
    corrected: list[CocycleStage] = field(default_factory=list)
    degenerate: list[CocycleStage] = field(default_factory=list)

    @property
    def indices(self) -> list[int]:
        """Stage indices n."""
        return [stage.n for stage in self.corrected]

    def pairs(self) -> list[tuple[CocycleStage, CocycleStage]]:
        """(A_n, Ã_n) per stage."""
        return list(zip(self.corrected, self.degenerate))

    def audits(self) -> list[StageAudit]:
        """Audits of every built stage in build order."""
        stages = [self.initial] + [s for pair in self.pairs() for s in pair]
        return [s.audit for s in stages if s.audit is not None]


def audit_stage(stage: CocycleStage, points: Optional[int] = None) -> StageAudit:
    """Check that the forward blocks over an I_n grid are λ_N-hyperbolic."""
    n = stage.n
    xs = stage.geometry.grid(n, points or stage.config.audit_grid)
    factors = stage.orbit_factors(xs, np.arange(stage.block_length))
    forward, backward = block_margins(factors, stage.log_mu, stage.config.epsilon)
    min_margin = float(min(forward.min(), backward.min()))
    residual = None
    sup_correction = 0.0
    if stage.angle.corrections and stage.angle.corrections[-1].n == n:
        residual = stage.angle.corrections[-1].residual
        sup_correction = float(np.max(np.abs(stage.angle.last_term()(xs))))
    audit = StageAudit(
        stage=n,
        kind=stage.kind,
        q=stage.geometry.q(n),
        block_length=stage.block_length,
        min_margin=min_margin,
        hyperbolic=min_margin >= 0.0,
        interpolation_residual=residual,
        sup_correction=sup_correction,
    )
    logger.debug("stage %d (%s): r=%d, min margin %.3f", n, stage.kind, stage.block_length, min_margin)
    return audit


def stage_init(config: ExperimentConfig, base: Optional[SmoothFunction] = None, strict: bool = True) -> CocycleStage:
    """The uncorrected stage N with φ = φ₀.

    Args:
        config: Experiment parameters
        base: Replaces the sample angle φ₀
        strict: Raise when the audit fails

    Raises:
        NotHyperbolic: If the stage-N blocks are not λ_N-hyperbolic and strict is set
    """
    frequency = Frequency.from_config(config)
    geometry = CriticalGeometry.from_config(config, frequency)
    n = config.start_index
    if base is None:
        angle = AngleFunction(sample_angle(config.amplitude, config.c1, config.nu))
    else:
        angle = AngleFunction(base, base_name="custom")
    stage = CocycleStage(
        n=n,
        config=config,
        frequency=frequency,
        geometry=geometry,
        angle=angle,
        block_length=min_return_time(geometry, n),
    )
    audit = audit_stage(stage)
    if strict and not audit.hyperbolic:
        raise NotHyperbolic(f"stage {n} is not hyperbolic: min prefix margin {audit.min_margin:.3e}", audit)
    return replace(stage, audit=audit)


def return_block(stage: CocycleStage, x: float, n: Optional[int] = None) -> ReturnBlockData:
    """Forward and backward return blocks of the stage cocycle at x ∈ I_n.

    Raises:
        PreconditionFailed: If x lies outside I_n
    """
    n = stage.n if n is None else n
    if not stage.geometry.contains(x, n):
        raise PreconditionFailed(f"x={x:.12g} lies outside I_{n}")
    r = stage.block_length if n == stage.n else min_return_time(stage.geometry, n)
    forward, backward = stage.blocks(np.array([x]), r)
    block = [stage.orbit_factors([x], [i]).item((0, 0)) for i in range(r)]
    report = is_mu_hyperbolic(block, stage.log_mu, stage.config.epsilon, log_cap=stage.log_lambda)
    if not report.verdict:
        logger.warning("return block at x=%.6f, stage %d is not hyperbolic", x, n)
    return ReturnBlockData(
        x=float(x),
        r_plus=r,
        r_minus=r,
        forward=forward.item(0),
        backward=backward.item(0),
        hyperbolicity=report,
    )


def _fit_component(previous: CocycleStage, center: float, radius: float, r: int) -> tuple[Chebyshev, float]:
    config = previous.config
    phi0 = previous.angle.base

    def mismatch_target(offsets: np.ndarray) -> np.ndarray:
        xs = np.mod(center + offsets, TWO_PI)
        return phi0(xs) - np.unwrap(previous.mismatch(xs, r), period=math.pi)

    nodes = radius * chebpts2(config.chebyshev_nodes)
    piece = Chebyshev.fit(nodes, mismatch_target(nodes), deg=config.chebyshev_nodes - 1, domain=[-radius, radius])
    checks = np.linspace(-radius, radius, config.audit_grid)
    residual = float(np.max(np.abs(piece(checks) - mismatch_target(checks))))
    return piece, residual


def build_correction(previous: CocycleStage, n: int, threads: int = 1) -> CocycleStage:
    """Corrected stage n built from the cocycle of the previous stage.

    Raises:
        InterpolationDiverged: If the Chebyshev interpolants miss the mismatch by more than the tolerance
    """
    config = previous.config
    geometry = previous.geometry
    r = min_return_time(geometry, n)
    radius = geometry.radius(n)
    fitted = map_ordered(lambda c: _fit_component(previous, c, radius, r), geometry.centers, threads)
    residual = max(res for _, res in fitted)
    logger.debug("stage %d: interpolation residual %.3e with r=%d", n, residual, r)
    if residual > config.interpolation_tol:
        raise InterpolationDiverged(n, residual, config.interpolation_tol)
    correction = StageCorrection(
        n=n,
        kind="corrected",
        cutoff=plateau(n, geometry, config.effective_plateau_delta),
        inner=ComponentInterpolant(geometry.c1, radius, [piece for piece, _ in fitted]),
        residual=residual,
    )
    stage = replace(
        previous,
        n=n,
        angle=previous.angle.with_correction(correction),
        kind="corrected",
        block_length=r,
        audit=None,
        alignment=None,
        conjugation=None,
    )
    return replace(stage, audit=audit_stage(stage))


def build_degenerate(stage: CocycleStage) -> CocycleStage:
    """Degenerate stage with φ̃_n = φ_n − φ₀·f_n."""
    correction = StageCorrection(
        n=stage.n,
        kind="degenerate",
        cutoff=plateau(stage.n, stage.geometry, stage.config.effective_plateau_delta),
    )
    degenerate = replace(
        stage,
        angle=stage.angle.with_correction(correction),
        kind="degenerate",
        audit=None,
        alignment=None,
        conjugation=None,
    )
    return replace(degenerate, audit=audit_stage(degenerate))


def _deviation(actual: PolarArrays, expected: PolarArrays) -> float:
    log_gap = np.abs(actual.log_sigma - expected.log_sigma) / np.maximum(1.0, np.abs(expected.log_sigma))
    angle_gap = np.maximum(projective_distance(actual.s, expected.s), projective_distance(actual.u, expected.u))
    return float(np.max(np.maximum(log_gap, angle_gap)))


def verify_conjugation(previous: CocycleStage, stage: CocycleStage, points: Optional[int] = None) -> ConjugationReport:
    """Check A_n^{r}(x) = A_{n−1}^{r}(x)·R_{−ê(x)} and A_n^{−r}(x) = R_{ê(T^{−r}x)}·A_{n−1}^{−r}(x) on I_n."""
    n = stage.n
    r = stage.block_length
    xs = stage.geometry.grid(n, points or stage.config.audit_grid)
    correction = stage.angle.last_term()
    before_forward, before_backward = previous.blocks(xs, r)
    after_forward, after_backward = stage.blocks(xs, r)
    expected_forward = before_forward.rotate_right(-correction(xs))
    expected_backward = before_backward.rotate_left(correction(orbit_points(xs, stage.frequency, -r)))
    report = ConjugationReport(
        stage=n,
        forward_deviation=_deviation(after_forward, expected_forward),
        backward_deviation=_deviation(after_backward, expected_backward),
        tolerance=stage.config.conjugation_tol,
    )
    if not report.passed:
        logger.warning("stage %d: conjugation deviation %.3e", n, report.deviation)
    return report


def verify_alignment(stage: CocycleStage, points: Optional[int] = None) -> AlignmentReport:
    """Alignment of s_n − s'_n with φ₀ (or with 0 on a degenerate stage) on I_n/10, separation on the annulus."""
    n = stage.n
    points = points or stage.config.audit_grid
    phi0 = stage.angle.base
    inner = stage.geometry.grid(n, points, shrink=10.0)
    d = stage.mismatch(inner)
    if stage.kind == "degenerate":
        return AlignmentReport(
            stage=n,
            target="zero",
            inner_residual=float(np.max(np.abs(d))),
            tolerance=stage.config.alignment_tol,
        )
    annulus = stage.geometry.grid(n, points, inner=0.1)
    margin = np.abs(stage.mismatch(annulus)) - 0.5 * np.abs(phi0(annulus))
    return AlignmentReport(
        stage=n,
        target="phi0",
        inner_residual=float(np.max(np.abs(d - phi0(inner)))),
        annulus_margin=float(np.min(margin)),
        tolerance=stage.config.alignment_tol,
    )


def build_stages(
    config: ExperimentConfig,
    stages: int = DEFAULT_STAGES,
    threads: int = 1,
    strict: bool = True,
    base: Optional[SmoothFunction] = None,
) -> Construction:
    """Build corrected and degenerate stages N, ..., N+stages−1 with their verification reports.

    Raises:
        NotHyperbolic: If a corrected stage fails its audit and strict is set
        InterpolationDiverged: If a correction is under-resolved
    """
    if config.start_index + stages > Frequency.from_config(config).depth:
        raise ValueError("not enough partial quotients for the requested stages")
    initial = stage_init(config, base=base, strict=strict)
    construction = Construction(initial=initial)
    previous = initial
    for n in range(config.start_index, config.start_index + stages):
        logger.info("building stage %d", n)
        corrected = build_correction(previous, n, threads)
        if strict and not corrected.audit.hyperbolic:
            raise NotHyperbolic(
                f"stage {n} is not hyperbolic: min prefix margin {corrected.audit.min_margin:.3e}", corrected.audit
            )
        corrected = replace(
            corrected,
            alignment=verify_alignment(corrected),
            conjugation=verify_conjugation(previous, corrected),
        )
        degenerate = build_degenerate(corrected)
        degenerate = replace(
            degenerate,
            alignment=verify_alignment(degenerate),
            conjugation=verify_conjugation(corrected, degenerate),
        )
        construction.corrected.append(corrected)
        construction.degenerate.append(degenerate)
        previous = corrected
    return construction


def norm_envelope(stage: CocycleStage, points: Optional[int] = None) -> list[InequalityCheck]:
    """Margins of ln‖A_n^{r}(x)‖ over an I_n grid against r·ln λ_n below and r·ln λ̃_n above."""
    config = stage.config
    n = stage.n
    q = [stage.geometry.q(k) for k in range(config.start_index, n + 1)]
    lower, upper = lambda_schedule(config, q).at(n)
    r = stage.block_length
    forward, _ = stage.blocks(stage.geometry.grid(n, points or config.audit_grid), r)
    smallest = float(np.min(forward.log_sigma))
    largest = float(np.max(forward.log_sigma))
    return [
        InequalityCheck(name="envelope_lower", lhs=r * lower, rhs=smallest, passed=r * lower <= smallest),
        InequalityCheck(name="envelope_upper", lhs=largest, rhs=r * upper, passed=largest <= r * upper + 1e-9),
    ]


def degenerate_distance(
    corrected: CocycleStage,
    degenerate: CocycleStage,
    s: Optional[float] = None,
    K: float = 1.0,
    k_max: int = 20,
    points: Optional[int] = None,
) -> DegenerateDistance:
    """sup|φ_n − φ̃_n| on I_n against q_n^{-2}, with the sampled seminorm of ẽ_n."""
    n = degenerate.n
    s = 1.0 + 1.0 / degenerate.config.nu if s is None else s
    xs = degenerate.geometry.grid(n, points or degenerate.config.audit_grid)
    difference = np.abs(corrected.angle(xs) - degenerate.angle(xs))
    return DegenerateDistance(
        stage=n,
        sup_difference=float(np.max(difference)),
        reference=float(degenerate.geometry.q(n)) ** -2,
        seminorm=seminorm_estimate(degenerate.angle.last_term(), s, K, k_max, xs),
    )


def collapse_check(degenerate: CocycleStage, points: Optional[int] = None) -> InequalityCheck:
    """Check ln‖P⁺·(P⁻)⁻¹‖ <= ln(2·max ratio + ‖P⁺‖‖P⁻‖·|sin residual|) over an I_n/10 grid.

    The reported sides are those of the grid point with the smallest margin.
    """
    xs = degenerate.geometry.grid(degenerate.n, points or degenerate.config.audit_grid, shrink=10.0)
    forward, backward = degenerate.blocks(xs, degenerate.block_length)
    past = backward.inverse()
    value = np.asarray(compose_arrays(forward, past).log_sigma)
    a = forward.log_sigma
    b = past.log_sigma
    residual = projective_distance(forward.s, past.u)
    with np.errstate(divide="ignore"):
        bound = np.logaddexp(math.log(2.0) + np.abs(a - b), a + b + np.log(np.abs(np.sin(residual))))
    margins = bound - value
    worst = int(np.argmin(margins))
    passed = bool(np.all(margins >= -1e-9 * np.maximum(1.0, np.abs(bound))))
    return InequalityCheck(name="collapse", lhs=float(value[worst]), rhs=float(bound[worst]), passed=passed)


def _experiment_dump(config: ExperimentConfig) -> dict:
    return config.model_dump(mode="json", by_alias=True, include=set(ExperimentConfig.model_fields))


def save_snapshot(stage: CocycleStage, path: Union[str, Path]) -> Path:
    """Write a versioned JSON snapshot of a stage.

    Raises:
        ValueError: If the stage uses a custom base angle or a correction without Chebyshev pieces
    """
    if stage.angle.base_name != "sample":
        raise ValueError("only stages built on the sample angle can be saved")
    corrections = []
    for c in stage.angle.corrections:
        entry = {
            "n": c.n,
            "kind": c.kind,
            "radius": c.cutoff.radius,
            "exponent": c.cutoff.exponent,
            "residual": c.residual,
        }
        if c.kind == "corrected":
            if not isinstance(c.inner, ComponentInterpolant):
                raise ValueError(f"correction at stage {c.n} has no interpolant")
            entry["pieces"] = [
                {"coef": p.coef.tolist(), "domain": p.domain.tolist(), "window": p.window.tolist()}
                for p in c.inner.pieces
            ]
        corrections.append(entry)
    document = {
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
        "stage": stage.n,
        "kind": stage.kind,
        "block_length": stage.block_length,
        "config": _experiment_dump(stage.config),
        "corrections": corrections,
        "audit": stage.audit.model_dump() if stage.audit else None,
        "alignment": stage.alignment.model_dump() if stage.alignment else None,
        "conjugation": stage.conjugation.model_dump() if stage.conjugation else None,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_snapshot(path: Union[str, Path]) -> CocycleStage:
    """Rebuild a stage from a snapshot written by save_snapshot.

    Raises:
        ValueError: On an unknown schema version
    """
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    if document.get("schema_version") != SNAPSHOT_SCHEMA_VERSION:
        raise ValueError(f"unsupported snapshot schema {document.get('schema_version')!r}")
    config = ExperimentConfig.model_validate(document["config"])
    frequency = Frequency.from_config(config)
    geometry = CriticalGeometry.from_config(config, frequency)
    angle = AngleFunction(sample_angle(config.amplitude, config.c1, config.nu))
    for entry in document["corrections"]:
        cutoff = Plateau(config.c1, entry["radius"], entry["exponent"])
        inner = None
        if entry["kind"] == "corrected":
            pieces = [Chebyshev(p["coef"], domain=p["domain"], window=p["window"]) for p in entry["pieces"]]
            inner = ComponentInterpolant(config.c1, entry["radius"], pieces)
        angle = angle.with_correction(
            StageCorrection(n=entry["n"], kind=entry["kind"], cutoff=cutoff, inner=inner, residual=entry["residual"])
        )
    return CocycleStage(
        n=document["stage"],
        config=config,
        frequency=frequency,
        geometry=geometry,
        angle=angle,
        kind=document["kind"],
        block_length=document["block_length"],
        audit=StageAudit.model_validate(document["audit"]) if document["audit"] else None,
        alignment=AlignmentReport.model_validate(document["alignment"]) if document["alignment"] else None,
        conjugation=ConjugationReport.model_validate(document["conjugation"]) if document["conjugation"] else None,
    )
