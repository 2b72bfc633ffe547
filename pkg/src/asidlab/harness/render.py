"""Deterministic SVG heatmaps of sweep tables.

Numbers appear in the SVG as the same strings that :mod:`.sweep` writes to
the CSV, so the figure carries exactly the data-file values.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..errors import ConfigurationError
from .sweep import SweepTable, fmt

CELL = 40
MARGIN = 60
LEGEND_W = 20
LEGEND_STEPS = 10

# anchors of a dark-blue to yellow ramp
_RAMP = np.array([[68, 1, 84], [33, 145, 140], [253, 231, 37]], dtype=float)


def colour(t: float) -> str:
    """Hex colour for ``t`` in [0, 1] on the ramp."""
    t = min(max(float(t), 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(t), len(_RAMP) - 2)
    rgb = _RAMP[i] + (t - i) * (_RAMP[i + 1] - _RAMP[i])
    return "#" + "".join(f"{int(round(c)):02x}" for c in rgb)


def _unit(value: float, lo: float, hi: float) -> float:
    # a constant metric maps to the middle of the ramp
    return 0.5 if hi == lo else (value - lo) / (hi - lo)


def heatmap_svg(table: SweepTable, metric: str | None = None) -> str:
    """SVG text for one metric of ``table`` (default: its first metric)."""
    if not table.rows:
        raise ConfigurationError("cannot render an empty table")
    metric = metric or table.metrics[0]
    if metric not in table.metrics:
        raise ConfigurationError(f"table has no metric {metric!r}; has {list(table.metrics)}")
    xs = sorted(set(table.column(table.x_name)))
    ys = sorted(set(table.column(table.y_name)))
    values = table.column(metric)
    finite = values[np.isfinite(values)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 0.0)

    grid_w, grid_h = CELL * len(xs), CELL * len(ys)
    width = MARGIN + grid_w + 2 * LEGEND_W + 100
    height = 2 * MARGIN + max(grid_h, CELL * 3)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f'<text x="{MARGIN}" y="{MARGIN // 2}" font-size="12">{escape(metric)}</text>',
    ]
    xi = {x: i for i, x in enumerate(xs)}
    yi = {y: i for i, y in enumerate(ys)}
    col = table.columns.index(metric)
    for row in table.rows:
        x, y, v = row[0], row[1], row[col]
        px = MARGIN + CELL * xi[x]
        py = MARGIN + CELL * (len(ys) - 1 - yi[y])
        fill = colour(_unit(v, lo, hi)) if np.isfinite(v) else "#cccccc"
        out.append(
            f'<rect class="cell" x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="{fill}">'
            f"<title>{escape(table.x_name)}={fmt(x)} {escape(table.y_name)}={fmt(y)} "
            f"{escape(metric)}={fmt(v)}</title></rect>"
        )
    for x, i in xi.items():
        out.append(
            f'<text x="{MARGIN + CELL * i + CELL // 2}" y="{MARGIN + grid_h + 14}" '
            f'text-anchor="middle">{fmt(x)}</text>'
        )
    for y, j in yi.items():
        out.append(
            f'<text x="{MARGIN - 4}" y="{MARGIN + CELL * (len(ys) - 1 - j) + CELL // 2}" '
            f'text-anchor="end">{fmt(y)}</text>'
        )
    out.append(
        f'<text x="{MARGIN + grid_w // 2}" y="{MARGIN + grid_h + 30}" text-anchor="middle">'
        f"{escape(table.x_name)}</text>"
    )
    out.append(f'<text x="4" y="{MARGIN - 8}">{escape(table.y_name)}</text>')

    # legend: a stepped colour bar from the metric's minimum to its maximum
    lx = MARGIN + grid_w + LEGEND_W
    step_h = (height - 2 * MARGIN) / LEGEND_STEPS
    out.append('<g class="legend">')
    for k in range(LEGEND_STEPS):
        t = (LEGEND_STEPS - 1 - k) / (LEGEND_STEPS - 1)
        out.append(
            f'<rect x="{lx}" y="{MARGIN + step_h * k:.3f}" width="{LEGEND_W}" '
            f'height="{step_h:.3f}" fill="{colour(t)}"/>'
        )
    out.append(f'<text x="{lx + LEGEND_W + 4}" y="{MARGIN + 8}">{fmt(hi)}</text>')
    out.append(f'<text x="{lx + LEGEND_W + 4}" y="{height - MARGIN}">{fmt(lo)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_heatmap(table: SweepTable, path: str | Path, metric: str | None = None) -> Path:
    """Write the heatmap of ``metric`` to ``path``; same table gives the same bytes."""
    path = Path(path)
    path.write_text(heatmap_svg(table, metric))
    return path
