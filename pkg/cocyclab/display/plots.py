"""Minimal SVG line charts for the gap experiment."""

from typing import Sequence
from xml.sax.saxutils import escape

from cocyclab.models import GapReport

WIDTH = 640
HEIGHT = 400
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _scale(value: float, low: float, high: float, start: float, end: float) -> float:
    if high == low:
        return (start + end) / 2.0
    return start + (value - low) * (end - start) / (high - low)


def line_chart(
    title: str,
    xs: Sequence[float],
    series: Sequence[tuple[str, Sequence[float]]],
    x_label: str = "",
    y_label: str = "",
) -> str:
    """Render series sharing one x axis as a standalone SVG document.

    Coordinates are written with two decimals, so equal inputs give identical text.
    """
    if not xs or not series:
        raise ValueError("a chart needs at least one point and one series")
    values = [v for _, ys in series for v in ys]
    x_low, x_high = min(xs), max(xs)
    y_low, y_high = min(values), max(values)
    pad = 0.05 * (y_high - y_low) or 0.05 * max(1.0, abs(y_high))
    y_low, y_high = y_low - pad, y_high + pad
    left, right = MARGIN, WIDTH - MARGIN / 2
    top, bottom = MARGIN / 2, HEIGHT - MARGIN

    def point(x: float, y: float) -> str:
        return f"{_scale(x, x_low, x_high, left, right):.2f},{_scale(y, y_low, y_high, bottom, top):.2f}"

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for x in xs:
        px = _scale(x, x_low, x_high, left, right)
        lines.append(f'<text x="{px:.2f}" y="{bottom + 16}" text-anchor="middle">{x:g}</text>')
    for y in (y_low, (y_low + y_high) / 2.0, y_high):
        py = _scale(y, y_low, y_high, bottom, top)
        lines.append(f'<text x="{left - 6}" y="{py + 4:.2f}" text-anchor="end">{y:.4g}</text>')
    if x_label:
        lines.append(
            f'<text x="{(left + right) / 2:.2f}" y="{HEIGHT - 16}" text-anchor="middle">{escape(x_label)}</text>'
        )
    if y_label:
        lines.append(
            f'<text x="14" y="{(top + bottom) / 2:.2f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {(top + bottom) / 2:.2f})">{escape(y_label)}</text>'
        )
    for i, (name, ys) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        path = " ".join(point(x, y) for x, y in zip(xs, ys))
        lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        for x, y in zip(xs, ys):
            cx, cy = point(x, y).split(",")
            lines.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>')
        lines.append(
            f'<text x="{right - 4}" y="{top + 16 * (i + 1)}" text-anchor="end" fill="{color}">{escape(name)}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def gap_chart(report: GapReport) -> str:
    """L_T(A_n)/ln λ and L_T(Ã_n)/ln λ against the stage index."""
    stages = [row.stage for row in report.rows]
    return line_chart(
        "Finite Lyapunov exponents by stage",
        stages,
        [
            ("corrected A_n", [row.le_corrected / report.log_lambda for row in report.rows]),
            ("degenerate Ã_n", [row.le_degenerate / report.log_lambda for row in report.rows]),
        ],
        x_label="stage n",
        y_label="L_T / ln λ",
    )
