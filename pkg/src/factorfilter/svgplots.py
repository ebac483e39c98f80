"""Minimal self-contained SVG renderers for matrices and scatter plots.

Output is plain SVG text with no external references and no timestamps,
so identical inputs produce byte-identical files.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

_CELL = 64
_MARGIN_LEFT = 120
_MARGIN_TOP = 70
_MARGIN_RIGHT = 20
_MARGIN_BOTTOM = 20
_FONT = "font-family=\"monospace\""


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _cell_color(value: float, lo: float, hi: float) -> tuple[str, str]:
    """Background fill and a readable text color for a cell value."""
    if not math.isfinite(value):
        return "#dddddd", "#000000"
    span = hi - lo
    t = 0.0 if span <= 0 else min(1.0, max(0.0, (value - lo) / span))
    # white to deep blue
    r = round(255 + t * (8 - 255))
    g = round(255 + t * (48 - 255))
    b = round(255 + t * (107 - 255))
    fill = f"#{r:02x}{g:02x}{b:02x}"
    text = "#000000" if t < 0.55 else "#ffffff"
    return fill, text


def heatmap_svg(
    values,
    row_labels,
    col_labels,
    title: str = "",
    annotations=None,
    vmin: float = 0.0,
    vmax: float = 1.0,
) -> str:
    """Matrix heatmap with the numeric value printed in every cell.

    annotations, when given, is a same-shaped grid of short strings drawn
    under each value (strength categories, degrees of freedom, and so on).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("values must be 2-d")
    rows, cols = values.shape
    if len(row_labels) != rows or len(col_labels) != cols:
        raise ValueError("label counts must match the matrix shape")
    if annotations is not None:
        annotations = [[str(a) for a in row] for row in annotations]
        if len(annotations) != rows or any(len(r) != cols for r in annotations):
            raise ValueError("annotations must match the matrix shape")
    width = _MARGIN_LEFT + cols * _CELL + _MARGIN_RIGHT
    height = _MARGIN_TOP + rows * _CELL + _MARGIN_BOTTOM
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
            f'font-size="16" {_FONT}>{escape(title)}</text>'
        )
    for j, lab in enumerate(col_labels):
        x = _MARGIN_LEFT + j * _CELL + _CELL / 2
        parts.append(
            f'<text x="{x:.1f}" y="{_MARGIN_TOP - 10}" text-anchor="middle" '
            f'font-size="11" {_FONT}>{escape(str(lab))}</text>'
        )
    for i, lab in enumerate(row_labels):
        y = _MARGIN_TOP + i * _CELL + _CELL / 2 + 4
        parts.append(
            f'<text x="{_MARGIN_LEFT - 8}" y="{y:.1f}" text-anchor="end" '
            f'font-size="11" {_FONT}>{escape(str(lab))}</text>'
        )
    for i in range(rows):
        for j in range(cols):
            v = float(values[i, j])
            x = _MARGIN_LEFT + j * _CELL
            y = _MARGIN_TOP + i * _CELL
            fill, text_color = _cell_color(v, vmin, vmax)
            parts.append(
                f'<rect x="{x}" y="{y}" width="{_CELL}" height="{_CELL}" '
                f'fill="{fill}" stroke="#888888" stroke-width="0.5"/>'
            )
            cy = y + _CELL / 2 + (0 if annotations is None else -4)
            parts.append(
                f'<text x="{x + _CELL / 2:.1f}" y="{cy:.1f}" text-anchor="middle" '
                f'font-size="12" fill="{text_color}" {_FONT}>{escape(_fmt(v))}</text>'
            )
            if annotations is not None and annotations[i][j]:
                parts.append(
                    f'<text x="{x + _CELL / 2:.1f}" y="{y + _CELL / 2 + 14:.1f}" '
                    f'text-anchor="middle" font-size="9" fill="{text_color}" '
                    f'{_FONT}>{escape(annotations[i][j])}</text>'
                )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_svg(
    x,
    y,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    line: tuple[float, float] | None = None,
    annotation: str = "",
    width: int = 480,
    height: int = 360,
) -> str:
    """Scatter plot with an optional fitted line y = slope*x + intercept.

    annotation is free text drawn in the upper-left corner of the plot
    area (typically the correlation and its p-value).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if x.size == 0:
        raise ValueError("nothing to plot")
    ml, mr, mt, mb = 60, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    x_lo, x_hi = float(x.min()), float(x.max())
    y_lo, y_hi = float(y.min()), float(y.max())
    if line is not None:
        slope, intercept = line
        y_lo = min(y_lo, slope * x_lo + intercept, slope * x_hi + intercept)
        y_hi = max(y_hi, slope * x_lo + intercept, slope * x_hi + intercept)
    x_pad = (x_hi - x_lo) * 0.05 or 1.0
    y_pad = (y_hi - y_lo) * 0.05 or 1.0
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    def sx(v):
        return ml + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return mt + ph - (v - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="#000000" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
            f'font-size="15" {_FONT}>{escape(title)}</text>'
        )
    for i in range(5):
        fx = x_lo + (x_hi - x_lo) * i / 4
        fy = y_lo + (y_hi - y_lo) * i / 4
        px, py = sx(fx), sy(fy)
        parts.append(
            f'<line x1="{px:.1f}" y1="{mt + ph}" x2="{px:.1f}" '
            f'y2="{mt + ph + 5}" stroke="#000000"/>'
        )
        parts.append(
            f'<text x="{px:.1f}" y="{mt + ph + 18}" text-anchor="middle" '
            f'font-size="10" {_FONT}>{escape(_fmt(fx))}</text>'
        )
        parts.append(
            f'<line x1="{ml - 5}" y1="{py:.1f}" x2="{ml}" y2="{py:.1f}" '
            f'stroke="#000000"/>'
        )
        parts.append(
            f'<text x="{ml - 8}" y="{py + 3:.1f}" text-anchor="end" '
            f'font-size="10" {_FONT}>{escape(_fmt(fy))}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" '
            f'font-size="12" {_FONT}>{escape(xlabel)}</text>'
        )
    if ylabel:
        cx, cy = 16, mt + ph / 2
        parts.append(
            f'<text x="{cx}" y="{cy:.1f}" text-anchor="middle" font-size="12" '
            f'{_FONT} transform="rotate(-90 {cx} {cy:.1f})">{escape(ylabel)}</text>'
        )
    if line is not None:
        slope, intercept = line
        parts.append(
            f'<line x1="{sx(x_lo):.1f}" y1="{sy(slope * x_lo + intercept):.1f}" '
            f'x2="{sx(x_hi):.1f}" y2="{sy(slope * x_hi + intercept):.1f}" '
            f'stroke="#cc3311" stroke-width="1.5"/>'
        )
    for xi, yi in zip(x, y):
        parts.append(
            f'<circle cx="{sx(xi):.1f}" cy="{sy(yi):.1f}" r="3" '
            f'fill="#0055aa" fill-opacity="0.7"/>'
        )
    if annotation:
        parts.append(
            f'<text x="{ml + 8}" y="{mt + 16}" font-size="11" '
            f'{_FONT}>{escape(annotation)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
