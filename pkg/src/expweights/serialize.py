"""CSV, JSON and SVG writers for result tables."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

from .harness import ResultTable

SVG_WIDTH, SVG_HEIGHT = 640, 480
MARGIN = 0.05


def emit_csv(table: ResultTable, path) -> None:
    """Header plus one line per row; LF newlines, UTF-8, '.' decimal point."""
    Path(path).write_text(table.to_csv(), encoding="utf-8", newline="\n")


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_csv(text: str) -> ResultTable:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    table = ResultTable(header)
    for line in reader:
        table.add(**{c: _parse_cell(v) for c, v in zip(header, line)})
    return table


def emit_json(table: ResultTable, path) -> None:
    doc = {"columns": table.columns, "rows": table.rows, "meta": table.meta}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def rate_plot_svg(
    table: ResultTable,
    x_col: str = "n",
    y_col: str = "mean_excess",
    slopes: Sequence[float] = (-0.5, -1.0),
) -> str:
    """Log-log scatter of ``y_col`` against ``x_col`` with reference slopes through the first point.

    The drawing uses log10 data coordinates directly (y negated), and the
    viewBox is the bounding box of the points widened by 5% on each side.
    """
    pts = [(float(r[x_col]), float(r[y_col])) for r in table.rows]
    pts = [(math.log10(x), math.log10(y)) for x, y in pts if x > 0 and y > 0 and math.isfinite(y)]
    if len(pts) < 2:
        raise ValueError("a rate plot needs at least two positive points")
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    w, h = (x1 - x0) or 1.0, (y1 - y0) or 1.0
    vb = (x0 - MARGIN * w, -(y1 + MARGIN * h), w * (1 + 2 * MARGIN), h * (1 + 2 * MARGIN))
    # 5 px markers under the non-uniform scaling
    rx, ry = 5 * vb[2] / SVG_WIDTH, 5 * vb[3] / SVG_HEIGHT
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="{" ".join(_fmt(v) for v in vb)}" preserveAspectRatio="none">',
        f"<desc>log10({y_col}) against log10({x_col}); reference slopes {', '.join(f'{s:g}' for s in slopes)}</desc>",
        f'<rect x="{_fmt(vb[0])}" y="{_fmt(vb[1])}" width="{_fmt(vb[2])}" height="{_fmt(vb[3])}" fill="white"/>',
    ]
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    fx, fy = pts[0]
    for k, s in enumerate(slopes):
        out.append(
            f'<line class="ref" data-slope="{s:g}" x1="{_fmt(fx)}" y1="{_fmt(-fy)}" x2="{_fmt(x1)}" '
            f'y2="{_fmt(-(fy + s * (x1 - fx)))}" stroke="{colors[k % len(colors)]}" stroke-dasharray="4 3" '
            f'stroke-width="1" vector-effect="non-scaling-stroke"/>'
        )
    for x, y in pts:
        out.append(f'<ellipse cx="{_fmt(x)}" cy="{_fmt(-y)}" rx="{_fmt(rx)}" ry="{_fmt(ry)}" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg_rate_plot(table: ResultTable, path, x_col: str = "n", y_col: str = "mean_excess", slopes=(-0.5, -1.0)) -> None:
    Path(path).write_text(rate_plot_svg(table, x_col, y_col, slopes), encoding="utf-8", newline="\n")
