"""Pydantic models for experiment configuration and reports."""

import json
import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cocyclab.constants import (
    ALIGNMENT_TOL,
    CONJUGATION_TOL,
    DEFAULT_AMPLITUDE,
    DEFAULT_AUDIT_GRID,
    DEFAULT_BETA,
    DEFAULT_BOUND_M,
    DEFAULT_C1,
    DEFAULT_CHEBYSHEV_NODES,
    DEFAULT_DELTA,
    DEFAULT_EPSILON,
    DEFAULT_G,
    DEFAULT_LAMBDA,
    DEFAULT_NU,
    DEFAULT_PREFIX_LENGTH,
    DEFAULT_RETURN_GRID,
    DEFAULT_SCHEDULE_COEFF,
    DEFAULT_SEMINORM_GRID,
    DEFAULT_SEMINORM_KMAX,
    DEFAULT_STAGES,
    DEFAULT_START_INDEX,
    DEFAULT_T,
    FREQUENCY_PRESETS,
    INTERPOLATION_TOL,
    RETURN_CAP_EXPONENT,
)


class ExperimentConfig(BaseModel):
    """Parameters of one counterexample construction."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)

    lam: float = Field(DEFAULT_LAMBDA, alias="lambda", description="Hyperbolic scale λ of Λ = diag(λ, 1/λ)")
    # Audit slack only. The gap verdicts and the nonresonant growth check use the measured ε_desk.
    epsilon: float = Field(DEFAULT_EPSILON, description="Growth-rate slack ε of the hyperbolicity audits")
    delta: float = Field(DEFAULT_DELTA, description="Target LE drop δ of the degenerate stages")
    bound_m: int = Field(DEFAULT_BOUND_M, description="Bounded-type constant M with q_{n+1} <= M q_n")
    nu: float = Field(DEFAULT_NU, description="Flatness exponent ν of the sample angle")
    beta: float = Field(DEFAULT_BETA, description="Critical interval exponent β, radius q_n^-β")
    start_index: int = Field(DEFAULT_START_INDEX, description="First stage index N")
    amplitude: float = Field(DEFAULT_AMPLITUDE, description="Amplitude c of the sample angle")
    c1: float = Field(DEFAULT_C1, description="First critical point, in [0, π)")
    frequency: str = Field("golden", description="Frequency preset used when partial_quotients is not given")
    prefix_length: int = Field(DEFAULT_PREFIX_LENGTH, description="Length of the preset partial quotient prefix")
    partial_quotients: Optional[list[int]] = Field(None, description="Explicit partial quotient prefix a_1, a_2, ...")
    schedule_coeff: float = Field(DEFAULT_SCHEDULE_COEFF, description="Increment coefficient of the λ_n schedules")
    plateau_delta: Optional[float] = Field(None, description="Inner parameter of the plateau cutoff")
    chebyshev_nodes: int = Field(DEFAULT_CHEBYSHEV_NODES, description="Interpolation nodes per critical interval")
    audit_grid: int = Field(DEFAULT_AUDIT_GRID, description="Grid points per interval for audits and checks")
    return_grid: int = Field(DEFAULT_RETURN_GRID, description="Grid points per interval for return statistics")
    seminorm_kmax: int = Field(DEFAULT_SEMINORM_KMAX, description="Highest derivative order in seminorm estimates")
    seminorm_grid: int = Field(DEFAULT_SEMINORM_GRID, description="Sample points in seminorm estimates")
    return_cap_exponent: int = Field(RETURN_CAP_EXPONENT, description="Return scans stop after q_n ** exponent")
    interpolation_tol: float = Field(INTERPOLATION_TOL, description="Largest accepted interpolation residual")
    alignment_tol: float = Field(ALIGNMENT_TOL, description="Tolerance of the alignment verdicts")
    conjugation_tol: float = Field(CONJUGATION_TOL, description="Tolerance of the conjugation identity")
    le_slack: float = Field(0.01, description="Allowed drop of the corrected exponent below the stage N value")
    le_ratio_floor: float = Field(0.95, description="Reported floor for L(A_n) / ln λ")
    gap_floor: float = Field(0.03, description="Reported floor for the relative gap")

    @field_validator("lam")
    @classmethod
    def validate_lam(cls, v: float) -> float:
        """Validate that λ > 1."""
        if not v > 1.0:
            raise ValueError("lambda must be greater than 1")
        return v

    @field_validator("epsilon")
    @classmethod
    def validate_epsilon(cls, v: float) -> float:
        """Validate that 0 < ε < 1."""
        if not 0.0 < v < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        return v

    @field_validator("nu")
    @classmethod
    def validate_nu(cls, v: float) -> float:
        """Validate that 0 < ν < 1."""
        if not 0.0 < v < 1.0:
            raise ValueError("nu must lie in (0, 1)")
        return v

    @field_validator("beta")
    @classmethod
    def validate_beta(cls, v: float) -> float:
        """Validate that β > 1, needed for r_n >= q_n / 2."""
        if not v > 1.0:
            raise ValueError("beta must be greater than 1")
        return v

    @field_validator("amplitude")
    @classmethod
    def validate_amplitude(cls, v: float) -> float:
        """Validate that 0 < c < 1/1000."""
        if not 0.0 < v < 1.0e-3:
            raise ValueError("amplitude must lie in (0, 1/1000)")
        return v

    @field_validator("c1")
    @classmethod
    def validate_c1(cls, v: float) -> float:
        """Validate that the critical point lies in [0, π)."""
        if not 0.0 <= v < math.pi:
            raise ValueError("c1 must lie in [0, pi)")
        return v

    @field_validator("frequency")
    @classmethod
    def validate_frequency(cls, v: str) -> str:
        """Validate the frequency preset name."""
        if v not in FREQUENCY_PRESETS:
            raise ValueError(f"frequency must be one of {sorted(FREQUENCY_PRESETS)}")
        return v

    @field_validator("partial_quotients")
    @classmethod
    def validate_partial_quotients(cls, v: Optional[list[int]]) -> Optional[list[int]]:
        """Validate that partial quotients are positive."""
        if v is not None:
            if not v:
                raise ValueError("partial_quotients cannot be empty")
            if any(a < 1 for a in v):
                raise ValueError("partial quotients must be positive integers")
        return v

    @field_validator("start_index", "bound_m", "prefix_length", "return_cap_exponent")
    @classmethod
    def validate_positive_int(cls, v: int) -> int:
        """Validate that integer knobs are positive."""
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("chebyshev_nodes", "audit_grid", "return_grid", "seminorm_grid")
    @classmethod
    def validate_grid(cls, v: int) -> int:
        """Validate that grids have at least two points."""
        if v < 2:
            raise ValueError("grids need at least 2 points")
        return v

    @model_validator(mode="after")
    def validate_exponents(self) -> "ExperimentConfig":
        """Validate the joint constraints between ν, β and the plateau parameter."""
        if not self.beta < 1.0 / self.nu:
            raise ValueError("beta must be smaller than 1/nu")
        if self.plateau_delta is not None:
            if not 0.0 < self.plateau_delta < 1.0:
                raise ValueError("plateau_delta must lie in (0, 1)")
            if not self.beta / (1.0 / self.nu - self.plateau_delta) < 1.0:
                raise ValueError("plateau_delta too large: need beta / (1/nu - plateau_delta) < 1")
        if self.start_index >= len(self.quotients()):
            raise ValueError("start_index must be smaller than the number of partial quotients")
        return self

    @property
    def gamma(self) -> float:
        """The exponent γ = νβ."""
        return self.nu * self.beta

    @property
    def log_lambda(self) -> float:
        """ln λ."""
        return math.log(self.lam)

    @property
    def effective_plateau_delta(self) -> float:
        """Plateau parameter, defaulting to 0.1·(1/ν − β)/β."""
        if self.plateau_delta is not None:
            return self.plateau_delta
        return 0.1 * (1.0 / self.nu - self.beta) / self.beta

    def quotients(self) -> list[int]:
        """Resolved partial quotient prefix."""
        if self.partial_quotients is not None:
            return list(self.partial_quotients)
        return [FREQUENCY_PRESETS[self.frequency]] * self.prefix_length


class RunConfig(ExperimentConfig):
    """Experiment parameters plus the run controls of the command line."""

    subcommand: Optional[str] = Field(None, description="Subcommand this run was started with")
    stages: int = Field(DEFAULT_STAGES, description="Number of stages N, N+1, ... to build")
    T: int = Field(DEFAULT_T, description="Iterations of the finite Lyapunov exponent")
    G: int = Field(DEFAULT_G, description="Phase grid size of the finite Lyapunov exponent")
    seed: int = Field(0, description="Seed of the randomized property suites")
    threads: int = Field(1, description="Worker threads for grid evaluations")
    trials: int = Field(1000, description="Randomized trials per property suite")

    @field_validator("stages", "T", "G", "threads", "trials")
    @classmethod
    def validate_run_counts(cls, v: int) -> int:
        """Validate that run counts are positive."""
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @model_validator(mode="after")
    def validate_stage_range(self) -> "RunConfig":
        """Validate that every requested stage has a stored convergent."""
        if self.start_index + self.stages > len(self.quotients()):
            raise ValueError("start_index + stages exceeds the partial quotient prefix")
        return self

    def experiment(self) -> ExperimentConfig:
        """The experiment part of this run configuration."""
        fields = ExperimentConfig.model_fields
        return ExperimentConfig(**{name: getattr(self, name) for name in fields})

    def to_echo(self) -> str:
        """Render the effective configuration as sorted key = value lines."""
        data = self.model_dump(by_alias=True, mode="json")
        return "".join(f"{key} = {_echo_value(data[key])}\n" for key in sorted(data))


def _echo_value(value) -> str:
    """Format one config value so it parses back through the config loader."""
    return json.dumps(value)


class HyperbolicityReport(BaseModel):
    """Prefix margins of a block and of its inverse-reversed block."""

    block_length: int
    log_mu: float
    epsilon: float
    log_cap: float
    forward_margins: list[float]
    inverse_margins: list[float]
    max_factor_log_norm: float
    verdict: bool

    @property
    def min_margin(self) -> float:
        """Smallest margin over both prefix families."""
        return min(self.forward_margins + self.inverse_margins, default=math.inf)


class InequalityCheck(BaseModel):
    """Outcome of one numerically checked inequality, lhs <= rhs in log scale."""

    name: str
    lhs: float
    rhs: float
    passed: bool
    vacuous: bool = False
    stage: Optional[int] = None

    @property
    def margin(self) -> float:
        """rhs − lhs; non-negative when the inequality holds."""
        return self.rhs - self.lhs


class GevreySeminorm(BaseModel):
    """Sampled Gevrey seminorm |f|_{s,K}, a lower estimate of the true supremum."""

    s: float
    K: float
    value: float
    log_value: float
    k_max: int
    grid_size: int
    k_star: Optional[int] = None
    x_star: Optional[float] = None

    @property
    def saturated(self) -> bool:
        """True when the maximum sits at the truncation order."""
        return self.k_star == self.k_max


class AlgebraItem(BaseModel):
    """One inequality of the Gevrey algebra suite."""

    name: str
    status: str = Field(..., description="passed, violated or precondition_failed")
    lhs: Optional[float] = None
    rhs: Optional[float] = None

    @property
    def margin(self) -> Optional[float]:
        """rhs − lhs when both sides were evaluated."""
        if self.lhs is None or self.rhs is None:
            return None
        return self.rhs - self.lhs


class AlgebraReport(BaseModel):
    """All items of the Gevrey algebra suite for one pair (f, g)."""

    s: float
    K: float
    epsilon: float
    items: list[AlgebraItem]

    @property
    def violations(self) -> int:
        """Number of violated items."""
        return sum(1 for item in self.items if item.status == "violated")


class ReturnStats(BaseModel):
    """Min first return to I_n against max first return to I_n/10."""

    n: int
    q: int
    min_return: int
    max_return_tenth: int

    @property
    def ratio(self) -> float:
        """min / max, the return ratio of the windowed upper bound."""
        return self.min_return / self.max_return_tenth


class AlignmentReport(BaseModel):
    """Alignment of forward and backward contracting directions on I_n."""

    stage: int
    target: str = Field(..., description="phi0 for corrected stages, zero for degenerate ones")
    inner_residual: float
    annulus_margin: Optional[float] = None
    tolerance: float

    @property
    def inner_ok(self) -> bool:
        """Alignment on I_n/10 within tolerance."""
        return self.inner_residual <= self.tolerance

    @property
    def annulus_ok(self) -> bool:
        """Separation on the annulus I_n minus I_n/10."""
        return self.annulus_margin is None or self.annulus_margin >= -self.tolerance


class ConjugationReport(BaseModel):
    """Deviation of A_n^r against A_{n-1}^r rotated by the correction."""

    stage: int
    forward_deviation: float
    backward_deviation: float
    tolerance: float

    @property
    def deviation(self) -> float:
        """Largest deviation over both identities."""
        return max(self.forward_deviation, self.backward_deviation)

    @property
    def passed(self) -> bool:
        """Both identities hold within tolerance."""
        return self.deviation <= self.tolerance


class StageAudit(BaseModel):
    """Summary of one built stage."""

    stage: int
    kind: str
    q: int
    block_length: int
    min_margin: float
    hyperbolic: bool
    interpolation_residual: Optional[float] = None
    sup_correction: float = 0.0


class LEEstimate(BaseModel):
    """Space average of (1/T) ln ||A_T(x)|| over a uniform phase grid."""

    T: int
    G: int
    mean: float
    minimum: float
    maximum: float
    std: float
    nonresonant_mean: Optional[float] = None


class GapRow(BaseModel):
    """One stage of the discontinuity experiment."""

    stage: int
    T: int
    G: int
    le_corrected: float
    le_degenerate: float
    log_lambda: float
    gap_doubled: Optional[float] = None
    localized_gap: Optional[float] = None
    off_support_gap: Optional[float] = None

    @property
    def gap(self) -> float:
        """L_T(A_n) − L_T(Ã_n)."""
        return self.le_corrected - self.le_degenerate

    @property
    def ratio(self) -> float:
        """Gap relative to ln λ."""
        return self.gap / self.log_lambda

    def csv_row(self) -> dict:
        """Row of the gap CSV."""
        return {
            "stage": self.stage,
            "T": self.T,
            "G": self.G,
            "le_corrected": repr(self.le_corrected),
            "le_degenerate": repr(self.le_degenerate),
            "gap": repr(self.gap),
            "ratio": repr(self.ratio),
        }


class GapReport(BaseModel):
    """Discontinuity experiment over all stages with desk-scale verdicts."""

    rows: list[GapRow]
    log_lambda: float
    epsilon_desk: float
    delta_desk: float
    return_ratio: float
    le_ratio_floor: float
    gap_floor: float

    @property
    def corrected_ok(self) -> bool:
        """Corrected exponents stay above (1 − ε_desk) ln λ."""
        floor = (1.0 - self.epsilon_desk) * self.log_lambda
        return all(row.le_corrected >= floor - 1e-12 for row in self.rows)

    @property
    def degenerate_ok(self) -> bool:
        """Degenerate exponents fall below (1 − δ_desk) L_T(A_n)."""
        return all(row.le_degenerate <= (1.0 - self.delta_desk) * row.le_corrected for row in self.rows)

    @property
    def monotone_ok(self) -> bool:
        """Degeneration never raises the estimate."""
        return all(row.le_degenerate <= row.le_corrected + 1e-12 for row in self.rows)

    @property
    def acceptance_ok(self) -> bool:
        """The fixed ratio and gap floors."""
        return all(
            row.le_corrected / self.log_lambda >= self.le_ratio_floor and row.ratio >= self.gap_floor
            for row in self.rows
        )

    @property
    def passed(self) -> bool:
        """Desk verdicts: corrected high, degenerate low, degeneration monotone."""
        return self.corrected_ok and self.degenerate_ok and self.monotone_ok


class GrowthReport(BaseModel):
    """Return ladder and growth margins of a nonresonant phase."""

    x: float
    ladder: list[int]
    levels: list[int]
    angles: list[float]
    log_norms: list[float]
    margins: list[float]

    @property
    def min_margin(self) -> float:
        """Smallest growth margin along the ladder."""
        return min(self.margins, default=math.inf)


class WindowReport(BaseModel):
    """Windowed norm bound along the returns of x to I_n/10."""

    x: float
    rho: float
    rate: float
    returns: list[int]
    log_norms: list[float]
    bounds: list[float]

    @property
    def margins(self) -> list[float]:
        """bound − value per window."""
        return [b - v for b, v in zip(self.bounds, self.log_norms)]

    @property
    def passed(self) -> bool:
        """Every window satisfies the bound."""
        return all(m >= 0.0 for m in self.margins)


class SuiteResult(BaseModel):
    """One randomized property suite."""

    name: str
    trials: int
    violations: int
    worst_margin: Optional[float] = None

    @property
    def passed(self) -> bool:
        """No violation observed."""
        return self.violations == 0


class DegenerateDistance(BaseModel):
    """Distance between the corrected angle φ_n and the degenerate angle φ̃_n."""

    stage: int
    sup_difference: float
    reference: float
    seminorm: GevreySeminorm

    @property
    def passed(self) -> bool:
        """sup|φ_n − φ̃_n| stays below q_n^{-2}."""
        return self.sup_difference <= self.reference
