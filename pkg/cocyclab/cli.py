"""CLI commands for cocyclab."""

import logging
import textwrap
from pathlib import Path
from typing import Any, Optional

import click
import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from cocyclab.arithmetic import CriticalGeometry, Frequency, min_max_return, nonresonant_fraction, nonresonant_mask
from cocyclab.config import OutputDir, load_run_config
from cocyclab.construction import (
    CocycleStage,
    build_stages,
    collapse_check,
    degenerate_distance,
    norm_envelope,
    save_snapshot,
)
from cocyclab.display.plots import gap_chart
from cocyclab.display.tables import (
    display_bumps,
    display_convergents,
    display_gap,
    display_le,
    display_returns,
    display_stages,
    display_suites,
)
from cocyclab.errors import CocyclabError, ConfigError, PreconditionFailed
from cocyclab.gevrey.bumps import (
    bump_coefficients,
    fit_gevrey_constant,
    gevrey_bound_violations,
    inverse_bump_bound_check,
    plateau,
    sample_angle,
)
from cocyclab.gevrey.seminorm import decay_rate, restricted_seminorm_decay
from cocyclab.lyapunov import (
    degenerate_upper_check,
    finite_le,
    le_gap_experiment,
    nonresonant_growth_check,
    phase_grid,
    subadditivity_check,
)
from cocyclab.models import RunConfig
from cocyclab.properties import SUITES, run_all

console = Console()

COCYCLAB_HEADER = r"""
                            _       _
  ___ ___   ___ _   _  ___| | __ _| |__
 / __/ _ \ / __| | | |/ __| |/ _` | '_ \
| (_| (_) | (__| |_| | (__| | (_| | |_) |
 \___\___/ \___|\__, |\___|_|\__,_|_.__/
                |___/
""".strip("\n")

BUMP_NUS = (0.3, 0.5, 0.8)


@click.group()
@click.option("-v", "--verbose", count=True, help="Log progress (-v) or debug detail (-vv)")
def cli(verbose: int):
    """cocyclab - A numerical lab for quasiperiodic SL(2,R) cocycles."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_time=False, show_path=False)],
        force=True,
    )


cli.help = textwrap.dedent(f"""\
\b
{COCYCLAB_HEADER}

🌀 cocyclab - Build cocycles whose Lyapunov exponent jumps, and measure the jump

""").strip("\n")


def config_option(func):
    return click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        default=None,
        help="Config file (JSON or key = value lines)",
    )(func)


def out_option(func):
    return click.option(
        "--out",
        type=click.Path(file_okay=False, path_type=Path),
        default=None,
        help="Output directory (default: ./cocyclab-out)",
    )(func)


def threads_option(func):
    return click.option("--threads", type=int, default=None, help="Worker threads for grid evaluations")(func)


def _prepare(
    subcommand: str, config_path: Optional[Path], out: Optional[Path], **overrides
) -> tuple[RunConfig, OutputDir]:
    """Load and validate the run config, then create the output directory and echo the config into it."""
    try:
        config = load_run_config(config_path, {"subcommand": subcommand, **overrides})
    except (ConfigError, ValidationError) as e:
        console.print(f"[red]✗ Invalid configuration: {e}[/red]")
        raise SystemExit(2)
    try:
        output = OutputDir(out)
        output.echo_config(config)
    except OSError as e:
        console.print(f"[red]✗ Cannot write to output directory: {e}[/red]")
        raise SystemExit(2)
    return config, output


def _finish(output: OutputDir, report: dict[str, Any], passed: bool, what: str) -> None:
    """Save the report and exit 1 on a failed verdict."""
    path = output.save_report(report)
    console.print(f"[dim]Report saved to {path}[/dim]")
    if not passed:
        console.print(f"[red]✗ {what}: verdict failed[/red]")
        raise SystemExit(1)
    console.print(f"[green]✓ {what}: all verdicts passed[/green]")


def _runtime_failure(what: str, e: Exception):
    console.print(f"[red]✗ {what} failed: {e}[/red]")
    raise SystemExit(3)


def _stage_entry(stage: CocycleStage) -> dict[str, Any]:
    """Report entry of one stage; the alignment verdict covers I_n/10, the annulus margin is reported."""
    entry: dict[str, Any] = {
        "stage": stage.n,
        "kind": stage.kind,
        "audit": stage.audit.model_dump(mode="json"),
        "alignment": None,
        "alignment_ok": None,
        "conjugation": None,
        "conjugation_ok": None,
    }
    if stage.alignment is not None:
        entry["alignment"] = {**stage.alignment.model_dump(mode="json"), "annulus_ok": stage.alignment.annulus_ok}
        entry["alignment_ok"] = stage.alignment.inner_ok
    if stage.conjugation is not None:
        entry["conjugation"] = {**stage.conjugation.model_dump(mode="json"), "deviation": stage.conjugation.deviation}
        entry["conjugation_ok"] = stage.conjugation.passed
    return entry


@cli.command()
@config_option
@out_option
@threads_option
@click.option("--stages", type=int, default=None, help="Number of stages after N")
def cf(config_path: Optional[Path], out: Optional[Path], threads: Optional[int], stages: Optional[int]):
    """Show convergents and first-return statistics."""
    config, output = _prepare("cf", config_path, out, threads=threads, stages=stages)
    try:
        frequency = Frequency.from_config(config)
        geometry = CriticalGeometry.from_config(config, frequency)
        indices = range(config.start_index, config.start_index + config.stages)
        console.print(f"[blue]Scanning returns for stages {indices[0]}..{indices[-1]}...[/blue]")
        stats = [min_max_return(geometry, n, config.return_grid, config.threads) for n in indices]
        fractions = [nonresonant_fraction(geometry, n, config.G) for n in indices]
    except (CocyclabError, ValueError) as e:
        _runtime_failure("Return scan", e)

    console.print(display_convergents(frequency, config.start_index + config.stages))
    console.print(display_returns(stats, fractions))
    passed = all(2 * s.min_return >= s.q and 0.0 < s.ratio <= 1.0 for s in stats)
    report = {
        "subcommand": "cf",
        "alpha": repr(frequency.alpha),
        "bound_m": frequency.bound,
        "convergents": [list(pq) for pq in frequency.convergents[: config.start_index + config.stages]],
        "returns": [{**s.model_dump(mode="json"), "ratio": s.ratio} for s in stats],
        "nonresonant": [{"fraction": f, "lower_bound": b} for f, b in fractions],
        "passed": passed,
    }
    _finish(output, report, passed, "Return times")


@cli.command()
@config_option
@out_option
@click.option("--n-max", type=int, default=30, help="Highest derivative order in the Gevrey bound fits")
def bumps(config_path: Optional[Path], out: Optional[Path], n_max: int):
    """Check flat-bump coefficient tables, derivative bounds and the plateau cutoff."""
    config, output = _prepare("bumps", config_path, out)
    try:
        half = np.linspace(0.05, 1.0, 20)
        xs = np.concatenate([-half[::-1], half])
        geometry = CriticalGeometry.from_config(config)
        n = config.start_index
        cutoff = plateau(n, geometry, config.effective_plateau_delta)
        radius = geometry.radius(n)
        inner = geometry.grid(n, config.audit_grid, shrink=10.0)
        offsets = np.linspace(0.21, 1.0, config.audit_grid)
        outside = np.concatenate([geometry.c1 + offsets * radius, geometry.c1 - offsets * radius])
        plateau_ok = bool(np.all(cutoff(inner) == 1.0) and np.all(cutoff(outside) == 0.0))
        rows = []
        for nu in sorted(set(BUMP_NUS) | {config.nu}):
            console.print(f"[blue]Checking ν={nu:g}...[/blue]")
            C = fit_gevrey_constant(nu, xs, n_max)
            rows.append(
                {
                    "nu": nu,
                    "n_max": n_max,
                    "table_violations": len(bump_coefficients(nu, 40).bound_violations()),
                    "C": C,
                    "bound_violations": gevrey_bound_violations(nu, xs, n_max, C),
                    "inverse_C": inverse_bump_bound_check(nu, xs, n_max),
                    "plateau_ok": plateau_ok,
                }
            )
        console.print("[blue]Measuring φ₀ on the critical intervals...[/blue]")
        phi0 = sample_angle(config.amplitude, geometry.c1, config.nu)
        decay = restricted_seminorm_decay(
            phi0,
            geometry,
            range(n, n + 3),
            1.0 + 1.0 / config.nu,
            1.0,
            config.gamma,
            k_max=min(config.seminorm_kmax, 12),
            points=config.audit_grid,
        )
    except (CocyclabError, ValueError) as e:
        _runtime_failure("Bump checks", e)

    console.print(display_bumps(rows))
    for check in decay:
        console.print(f"  ln|φ₀|_{check.name} = {check.lhs:.4g}  (reference {check.rhs:.4g})")
    passed = all(r["table_violations"] == 0 and r["bound_violations"] == 0 for r in rows) and plateau_ok
    report = {
        "subcommand": "bumps",
        "bumps": rows,
        "phi0_decay": [c.model_dump(mode="json") for c in decay],
        "phi0_decay_rate": decay_rate(decay),
        "passed": passed,
    }
    _finish(output, report, passed, "Bump checks")


@cli.command()
@config_option
@out_option
@threads_option
@click.option("--stages", type=int, default=None, help="Number of stages after N")
@click.option("--lambda", "lam", type=float, default=None, help="Hyperbolic scale λ")
@click.option("--snapshots", is_flag=True, help="Write a JSON snapshot of every stage")
def construct(
    config_path: Optional[Path],
    out: Optional[Path],
    threads: Optional[int],
    stages: Optional[int],
    lam: Optional[float],
    snapshots: bool,
):
    """Build corrected and degenerate stages and audit them."""
    config, output = _prepare("construct", config_path, out, threads=threads, stages=stages, **{"lambda": lam})
    try:
        console.print(f"[blue]Building {config.stages} stages from N={config.start_index}...[/blue]")
        construction = build_stages(config, config.stages, threads=config.threads, strict=False)
        entries = [_stage_entry(construction.initial)]
        checks = []
        for corrected, degenerate in construction.pairs():
            entries += [_stage_entry(corrected), _stage_entry(degenerate)]
            distance = degenerate_distance(corrected, degenerate)
            checks.append(
                {
                    "stage": corrected.n,
                    "envelope": [c.model_dump(mode="json") for c in norm_envelope(corrected)],
                    "degenerate_distance": {**distance.model_dump(mode="json"), "passed": distance.passed},
                    "collapse": collapse_check(degenerate).model_dump(mode="json"),
                }
            )
            if snapshots:
                for stage in (corrected, degenerate):
                    path = save_snapshot(stage, output.out_dir / "snapshots" / f"stage-{stage.n}-{stage.kind}.json")
                    console.print(f"[dim]Snapshot saved to {path}[/dim]")
    except (CocyclabError, ValueError) as e:
        _runtime_failure("Construction", e)

    console.print(display_stages(entries))
    for check in checks:
        if not check["collapse"]["passed"]:
            console.print(f"[red]✗ Stage {check['stage']}: collapse bound not met on the grid[/red]")
    corrected_ok = all(e["audit"]["hyperbolic"] for e in entries if e["kind"] != "degenerate")
    identities_ok = all(e["alignment_ok"] is not False and e["conjugation_ok"] is not False for e in entries)
    collapse_ok = all(check["collapse"]["passed"] for check in checks)
    passed = corrected_ok and identities_ok and collapse_ok
    report = {"subcommand": "construct", "stages": entries, "checks": checks, "passed": passed}
    _finish(output, report, passed, "Construction")


@cli.command()
@config_option
@out_option
@threads_option
@click.option("--stage", "stage_index", type=int, default=None, help="Stage index n (default: N)")
@click.option(
    "--kind",
    type=click.Choice(["initial", "corrected", "degenerate"]),
    default="corrected",
    help="Which cocycle of the stage",
)
@click.option("--lambda", "lam", type=float, default=None, help="Hyperbolic scale λ")
@click.option("--T", "T", type=int, default=None, help="Iterations")
@click.option("--G", "G", type=int, default=None, help="Phase grid size")
@click.option("--subadditivity", is_flag=True, help="Also check mean_{2T} <= mean_T over doublings")
def le(
    config_path: Optional[Path],
    out: Optional[Path],
    threads: Optional[int],
    stage_index: Optional[int],
    kind: str,
    lam: Optional[float],
    T: Optional[int],
    G: Optional[int],
    subadditivity: bool,
):
    """Estimate the finite Lyapunov exponent of one stage."""
    overrides = {"threads": threads, "T": T, "G": G, "lambda": lam}
    config, output = _prepare("le", config_path, out, **overrides)
    n = config.start_index if stage_index is None else stage_index
    if n < config.start_index:
        console.print(f"[red]✗ Stage {n} precedes the first stage N={config.start_index}[/red]")
        raise SystemExit(2)
    try:
        console.print(f"[blue]Building stages up to {n}...[/blue]")
        if kind == "initial":
            if n != config.start_index:
                console.print(f"[yellow]⚠ The initial cocycle lives at stage N={config.start_index}[/yellow]")
            construction = build_stages(config, 1, threads=config.threads, strict=False)
            stage = construction.initial
        else:
            construction = build_stages(config, n - config.start_index + 1, threads=config.threads, strict=False)
            stage = construction.corrected[-1] if kind == "corrected" else construction.degenerate[-1]
        console.print(f"[blue]Iterating T={config.T} over G={config.G} phases...[/blue]")
        estimate = finite_le(stage, config.T, config.G, threads=config.threads)
        checks = []
        if subadditivity:
            doublings = max(1, min(6, config.T.bit_length() - 1))
            checks = subadditivity_check(stage, config.G, doublings)
    except (CocyclabError, ValueError) as e:
        _runtime_failure("Exponent estimate", e)

    console.print(display_le(f"{kind} stage {stage.n}", estimate, config.log_lambda))
    passed = all(c.passed for c in checks)
    report = {
        "subcommand": "le",
        "stage": stage.n,
        "kind": kind,
        "log_lambda": config.log_lambda,
        "estimate": estimate.model_dump(mode="json"),
        "subadditivity": [c.model_dump(mode="json") for c in checks],
        "passed": passed,
    }
    _finish(output, report, passed, "Exponent estimate")


def _first_nonresonant(stage: CocycleStage, G: int) -> Optional[float]:
    xs = phase_grid(G)
    mask = nonresonant_mask(xs, stage.n, stage.geometry)
    return float(xs[np.argmax(mask)]) if np.any(mask) else None


@cli.command()
@config_option
@out_option
@threads_option
@click.option("--stages", type=int, default=None, help="Number of stages after N")
@click.option("--lambda", "lam", type=float, default=None, help="Hyperbolic scale λ")
@click.option("--T", "T", type=int, default=None, help="Iterations")
@click.option("--G", "G", type=int, default=None, help="Phase grid size")
@click.option("--doubling", is_flag=True, help="Recompute every gap at 2T")
@click.option("--windows", type=int, default=3, help="Returns to I_n/10 in the windowed upper bound")
def gap(
    config_path: Optional[Path],
    out: Optional[Path],
    threads: Optional[int],
    stages: Optional[int],
    lam: Optional[float],
    T: Optional[int],
    G: Optional[int],
    doubling: bool,
    windows: int,
):
    """Run the discontinuity experiment: L_T(A_n) against L_T(Ã_n) for every stage."""
    overrides = {"threads": threads, "stages": stages, "T": T, "G": G, "lambda": lam}
    config, output = _prepare("gap", config_path, out, **overrides)
    try:
        console.print(f"[blue]Building {config.stages} stages from N={config.start_index}...[/blue]")
        construction = build_stages(config, config.stages, threads=config.threads, strict=False)
        console.print(f"[blue]Estimating exponents at T={config.T}, G={config.G}...[/blue]")
        report = le_gap_experiment(config, construction, doubling=doubling)
        diagnostics = []
        for row, (corrected, degenerate) in zip(report.rows, construction.pairs()):
            entry: dict[str, Any] = {"stage": row.stage, "growth": None}
            window = degenerate_upper_check(degenerate, config.c1, windows, row.le_corrected)
            entry["window"] = {**window.model_dump(mode="json"), "passed": window.passed}
            x = _first_nonresonant(corrected, config.G)
            if x is not None:
                try:
                    growth = nonresonant_growth_check(corrected, x, config.T, epsilon_desk=report.epsilon_desk)
                    entry["growth"] = {**growth.model_dump(mode="json"), "min_margin": growth.min_margin}
                except PreconditionFailed:
                    pass
            diagnostics.append(entry)
    except (CocyclabError, ValueError) as e:
        _runtime_failure("Gap experiment", e)

    console.print(display_gap(report))
    csv_path = output.save_gap_csv(report.rows)
    svg_path = output.save_svg(gap_chart(report))
    console.print(f"[dim]CSV saved to {csv_path}[/dim]")
    console.print(f"[dim]Plot saved to {svg_path}[/dim]")
    if not report.acceptance_ok:
        console.print(
            f"[yellow]⚠ Fixed floors not met (ratio ≥ {report.le_ratio_floor}, gap ≥ {report.gap_floor})[/yellow]"
        )
    result = {
        "subcommand": "gap",
        "gap": report.model_dump(mode="json"),
        "verdicts": {
            "corrected": report.corrected_ok,
            "degenerate": report.degenerate_ok,
            "monotone": report.monotone_ok,
            "acceptance_floors": report.acceptance_ok,
        },
        "diagnostics": diagnostics,
        "passed": report.passed,
    }
    _finish(output, result, report.passed, "Gap experiment")


@cli.command()
@out_option
@click.option("--seed", type=int, default=None, help="Seed of the randomized suites (default: 0)")
@click.option("--trials", type=int, default=None, help="Trials per suite (default: 1000)")
@click.option("--suite", "suites", multiple=True, type=click.Choice(list(SUITES)), help="Run only these suites")
@config_option
def props(
    out: Optional[Path],
    seed: Optional[int],
    trials: Optional[int],
    suites: tuple[str, ...],
    config_path: Optional[Path],
):
    """Run the randomized property suites."""
    config, output = _prepare("props", config_path, out, seed=seed, trials=trials)
    try:
        console.print(f"[blue]Running property suites with seed {config.seed}...[/blue]")
        results = run_all(config.seed, config.trials, list(suites) or None)
    except (CocyclabError, ValueError) as e:
        _runtime_failure("Property suites", e)

    console.print(display_suites(results))
    passed = all(r.passed for r in results)
    report = {
        "subcommand": "props",
        "seed": config.seed,
        "trials": config.trials,
        "suites": [r.model_dump(mode="json") for r in results],
        "passed": passed,
    }
    _finish(output, report, passed, "Property suites")
