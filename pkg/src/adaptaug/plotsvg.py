"""Dependency-free SVG rendering of sensitivity curves and solved levels.

Each augmentation kind gets one panel: measured knots as circles, the
monotone spline through them as a single path, and the chosen levels as
X markers sitting on the intensity axis. When a trace holds several
rounds, older rounds fade out; the most recent is fully opaque. Output is
deterministic (no timestamps), so renders diff cleanly.
"""

from __future__ import annotations

import csv
from collections import defaultdict

import numpy as np

from .curve import pchip_eval, pchip_fit


class PlotError(ValueError):
    """Unusable trace or level-set input."""


PANEL_W, PANEL_H = 420, 240
MARGIN = 46
CURVE_COLOR = "#1f77b4"
LEVEL_COLOR = "#d62728"


def read_trace_csv(path) -> dict:
    """Parse kind,round,point_type,x,y rows into {kind: {round: {knots, levels}}}."""
    table: dict = defaultdict(lambda: defaultdict(lambda: {"knots": [], "levels": []}))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["kind", "round", "point_type", "x", "y"]:
            raise PlotError(f"{path}: expected header 'kind,round,point_type,x,y', got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                kind, rnd, ptype, x, y = row[0], int(row[1]), row[2], float(row[3]), float(row[4])
            except (ValueError, IndexError) as exc:
                raise PlotError(f"{path}:{line_no}: bad trace row {row}: {exc}")
            if ptype not in ("knot", "level"):
                raise PlotError(f"{path}:{line_no}: unknown point type {ptype!r}")
            table[kind][rnd]["knots" if ptype == "knot" else "levels"].append((x, y))
    if not table:
        raise PlotError(f"{path}: empty trace")
    return {k: dict(v) for k, v in table.items()}


def levels_json_to_trace(payloads) -> dict:
    """Adapt serialized level sets (no knots) to the trace structure."""
    table = {}
    for ls in payloads:
        levels = [(float(a), 0.0) for a in ls["levels"]]
        table[ls["kind"]] = {0: {"knots": [], "levels": levels}}
    if not table:
        raise PlotError("no level sets to plot")
    return table


def render_svg(trace: dict) -> str:
    """Render one stacked panel per kind and return the SVG document."""
    kinds = sorted(trace)
    width = PANEL_W + 2 * MARGIN
    height = len(kinds) * (PANEL_H + 2 * MARGIN)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<style>text { font-family: sans-serif; font-size: 12px; }</style>',
    ]
    for panel, kind in enumerate(kinds):
        parts.extend(_render_panel(kind, trace[kind], panel))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _render_panel(kind: str, rounds: dict, panel_index: int) -> list:
    top = panel_index * (PANEL_H + 2 * MARGIN) + MARGIN
    left = MARGIN

    xs_all = [p[0] for r in rounds.values() for key in ("knots", "levels") for p in r[key]]
    ys_all = [p[1] for r in rounds.values() for p in r["knots"]]
    x_lo, x_hi = 0.0, max(xs_all + [1.0])
    y_lo, y_hi = 0.0, max(ys_all + [2.0])

    def sx(x: float) -> float:
        return left + (x - x_lo) / (x_hi - x_lo) * PANEL_W

    def sy(y: float) -> float:
        return top + PANEL_H - (y - y_lo) / (y_hi - y_lo) * PANEL_H

    parts = [f'<g class="panel" data-kind="{kind}">']
    parts.append(f'<text x="{left}" y="{top - 10}">{kind}</text>')
    # axes as lines so every <path> in the file is a curve
    parts.append(_line(left, top + PANEL_H, left + PANEL_W, top + PANEL_H, "#333", 1.0))
    parts.append(_line(left, top, left, top + PANEL_H, "#333", 1.0))
    parts.append(f'<text x="{left + PANEL_W - 8}" y="{top + PANEL_H + 16}">{x_hi:g}</text>')
    parts.append(f'<text x="{left - 24}" y="{top + 8}">{y_hi:g}</text>')

    order = sorted(rounds)
    for age, rnd in enumerate(reversed(order)):
        opacity = max(1.0 * (0.55**age), 0.12)
        data = rounds[rnd]
        knots = sorted(data["knots"])
        if len(knots) >= 2:
            curve = pchip_fit(knots)
            grid = np.linspace(knots[0][0], knots[-1][0], 129)
            values = pchip_eval(curve, grid)
            points = " L ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(grid, values))
            parts.append(
                f'<path class="curve" fill="none" stroke="{CURVE_COLOR}" '
                f'stroke-width="1.5" opacity="{opacity:.3f}" d="M {points}"/>'
            )
        for x, y in knots:
            parts.append(
                f'<circle class="knot" cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
                f'fill="{CURVE_COLOR}" opacity="{opacity:.3f}"/>'
            )
        for x, _y in sorted(data["levels"]):
            parts.append(_cross(sx(x), sy(0.0), opacity))
    parts.append("</g>")
    return parts


def _line(x1: float, y1: float, x2: float, y2: float, color: str, opacity: float) -> str:
    return (
        f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
        f'stroke="{color}" opacity="{opacity:.3f}"/>'
    )


def _cross(cx: float, cy: float, opacity: float, arm: float = 4.0) -> str:
    return (
        f'<g class="level" opacity="{opacity:.3f}">'
        f'<line x1="{cx - arm:.2f}" y1="{cy - arm:.2f}" x2="{cx + arm:.2f}" y2="{cy + arm:.2f}" '
        f'stroke="{LEVEL_COLOR}" stroke-width="1.5"/>'
        f'<line x1="{cx - arm:.2f}" y1="{cy + arm:.2f}" x2="{cx + arm:.2f}" y2="{cy - arm:.2f}" '
        f'stroke="{LEVEL_COLOR}" stroke-width="1.5"/>'
        "</g>"
    )
