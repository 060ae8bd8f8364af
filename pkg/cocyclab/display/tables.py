from typing import Optional, Sequence

from rich.table import Table
from rich.text import Text

from cocyclab.arithmetic import Frequency
from cocyclab.models import GapReport, LEEstimate, ReturnStats, SuiteResult


def _verdict(passed: Optional[bool]) -> Text:
    """Render a verdict cell: green ✓, red ✗, or a dim dash when nothing was checked."""
    if passed is None:
        return Text("-", style="dim")
    return Text("✓", style="green") if passed else Text("✗", style="red")


def _number(value: Optional[float], fmt: str = ".6g") -> str:
    return "-" if value is None else format(value, fmt)


def display_convergents(frequency: Frequency, count: int) -> Table:
    """Display the first convergents of a frequency.

    Args:
        frequency: Frequency with a partial quotient prefix
        count: Number of convergents to show

    Returns:
        Rich Table with k, a_k, p_k and q_k
    """
    table = Table(title=f"Convergents of α ≈ {frequency.alpha:.15f}", show_header=True)
    table.add_column("k", justify="right", style="cyan")
    table.add_column("a_k", justify="right")
    table.add_column("p_k", justify="right")
    table.add_column("q_k", justify="right", style="bold")
    pq = frequency.partial_quotients
    for k, (p, q) in enumerate(frequency.convergents[:count], start=1):
        table.add_row(str(k), str(pq[k - 1]), str(p), str(q))
    return table


def display_returns(stats: Sequence[ReturnStats], fractions: Sequence[tuple[float, float]] = ()) -> Table:
    """Display first-return statistics per stage.

    Args:
        stats: One ReturnStats per stage
        fractions: Optional (measured, lower bound) nonresonant fractions per stage

    Returns:
        Rich Table with the minimum return, the longest return to I_n/10 and their ratio
    """
    table = Table(title="Return times", show_header=True)
    table.add_column("n", justify="right", style="cyan")
    table.add_column("q_n", justify="right")
    table.add_column("min r±", justify="right")
    table.add_column("≥ q_n/2", justify="center")
    table.add_column("max r (I_n/10)", justify="right")
    table.add_column("ratio ρ", justify="right", style="bold")
    if fractions:
        table.add_column("nonresonant", justify="right")
        table.add_column("bound", justify="right", style="dim")
    for i, row in enumerate(stats):
        cells = [
            str(row.n),
            str(row.q),
            str(row.min_return),
            _verdict(2 * row.min_return >= row.q),
            str(row.max_return_tenth),
            f"{row.ratio:.4f}",
        ]
        if fractions:
            measured, bound = fractions[i]
            cells += [f"{measured:.4f}", f"{bound:.4f}"]
        table.add_row(*cells)
    return table


def display_bumps(rows: Sequence[dict]) -> Table:
    """Display the flat-bump derivative reports, one row per ν.

    Each row holds nu, n_max, table_violations, C, bound_violations, inverse_C and plateau_ok.
    """
    table = Table(title="Flat bump derivatives", show_header=True)
    table.add_column("ν", justify="right", style="cyan")
    table.add_column("n max", justify="right")
    table.add_column("table", justify="center")
    table.add_column("fitted C", justify="right", style="bold")
    table.add_column("bound", justify="center")
    table.add_column("inverse C", justify="right")
    table.add_column("plateau", justify="center")
    for row in rows:
        table.add_row(
            f"{row['nu']:g}",
            str(row["n_max"]),
            _verdict(row["table_violations"] == 0),
            f"{row['C']:.6g}",
            _verdict(row["bound_violations"] == 0),
            f"{row['inverse_C']:.6g}",
            _verdict(row["plateau_ok"]),
        )
    return table


def display_stages(stages: Sequence[dict]) -> Table:
    """Display the stage audits of a construction.

    Each entry is the per-stage dict written to report.json by `construct`.
    """
    table = Table(title="Stages", show_header=True, expand=True)
    table.add_column("n", justify="right", style="cyan")
    table.add_column("kind")
    table.add_column("r", justify="right")
    table.add_column("margin", justify="right")
    table.add_column("hyperbolic", justify="center")
    table.add_column("residual", justify="right", style="dim")
    table.add_column("alignment", justify="right")
    table.add_column("aligned", justify="center")
    table.add_column("conjugation", justify="right")
    table.add_column("conjugate", justify="center")
    for stage in stages:
        audit = stage["audit"]
        alignment = stage.get("alignment")
        conjugation = stage.get("conjugation")
        table.add_row(
            str(audit["stage"]),
            audit["kind"],
            str(audit["block_length"]),
            f"{audit['min_margin']:.4g}",
            _verdict(audit["hyperbolic"]),
            _number(audit.get("interpolation_residual"), ".2e"),
            _number(alignment["inner_residual"] if alignment else None, ".2e"),
            _verdict(stage.get("alignment_ok")),
            _number(conjugation["deviation"] if conjugation else None, ".2e"),
            _verdict(stage.get("conjugation_ok")),
        )
    return table


def display_le(label: str, estimate: LEEstimate, log_lambda: Optional[float] = None) -> Table:
    """Display one finite Lyapunov exponent estimate.

    Args:
        label: Cocycle name shown in the title
        estimate: The estimate
        log_lambda: ln λ, adds the ratio row when given

    Returns:
        Rich Table with the phase statistics
    """
    table = Table(title=f"L_T of {label}", show_header=False)
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right")
    table.add_row("T", str(estimate.T))
    table.add_row("G", str(estimate.G))
    table.add_row("mean", f"{estimate.mean:.10g}")
    table.add_row("min", f"{estimate.minimum:.10g}")
    table.add_row("max", f"{estimate.maximum:.10g}")
    table.add_row("std", f"{estimate.std:.3e}")
    if estimate.nonresonant_mean is not None:
        table.add_row("nonresonant mean", f"{estimate.nonresonant_mean:.10g}")
    if log_lambda is not None:
        table.add_row("mean / ln λ", f"{estimate.mean / log_lambda:.6f}")
    return table


def display_gap(report: GapReport) -> Table:
    """Display the discontinuity experiment, one row per stage."""
    table = Table(
        title=f"Exponent gap (ε_desk={report.epsilon_desk:.4f}, δ_desk={report.delta_desk:.4f})",
        show_header=True,
        expand=True,
    )
    table.add_column("n", justify="right", style="cyan")
    table.add_column("L(A_n)", justify="right")
    table.add_column("L(Ã_n)", justify="right")
    table.add_column("gap", justify="right", style="bold")
    table.add_column("ratio", justify="right")
    table.add_column("gap at 2T", justify="right", style="dim")
    table.add_column("localized", justify="right", style="dim")
    table.add_column("off support", justify="right", style="dim")
    for row in report.rows:
        table.add_row(
            str(row.stage),
            f"{row.le_corrected:.8g}",
            f"{row.le_degenerate:.8g}",
            f"{row.gap:.6g}",
            f"{row.ratio:.6f}",
            _number(row.gap_doubled),
            _number(row.localized_gap),
            _number(row.off_support_gap),
        )
    return table


def display_suites(results: Sequence[SuiteResult]) -> Table:
    """Display property suite results."""
    table = Table(title="Property suites", show_header=True)
    table.add_column("Suite", style="cyan")
    table.add_column("Trials", justify="right")
    table.add_column("Violations", justify="right")
    table.add_column("Worst margin", justify="right", style="dim")
    table.add_column("", justify="center")
    for result in results:
        table.add_row(
            result.name,
            str(result.trials),
            str(result.violations),
            _number(result.worst_margin, ".3e"),
            _verdict(result.passed),
        )
    return table
