"""Dependency-free SVG rendering for heatmaps and training curves.

Output is plain string-built SVG 1.1; no drawing library involved. Numbers
are formatted with repr-stable ``%g`` so identical inputs give identical
bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

_FONT = "font-family=\"Helvetica, Arial, sans-serif\""

# dark-blue to pale-yellow sequential ramp
_RAMP = (
    (0.00, (35, 23, 107)),
    (0.25, (56, 89, 140)),
    (0.50, (70, 150, 131)),
    (0.75, (151, 201, 93)),
    (1.00, (249, 231, 33)),
)


def _ramp_color(t: float) -> str:
    t = min(1.0, max(0.0, t))
    for (t0, c0), (t1, c1) in zip(_RAMP, _RAMP[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = tuple(round(a + f * (b - a)) for a, b in zip(c0, c1))
            return "#%02x%02x%02x" % rgb
    return "#%02x%02x%02x" % _RAMP[-1][1]


def _fmt(v: float) -> str:
    return "%g" % round(float(v), 6)


def heatmap_svg(values, row_labels: Sequence[str], col_labels: Sequence[str],
                title: str, vmin: float | None = None,
                vmax: float | None = None) -> str:
    """Grid heatmap with labeled axes and a min/max legend."""
    grid = np.asarray(values, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError(f"heatmap_svg: values must be 2-D, got shape {grid.shape}")
    rows, cols = grid.shape
    if len(row_labels) != rows or len(col_labels) != cols:
        raise ValueError("heatmap_svg: label counts do not match the grid")
    lo = float(grid.min()) if vmin is None else float(vmin)
    hi = float(grid.max()) if vmax is None else float(vmax)
    span = hi - lo

    cell = 26
    left = 10 + 7 * max((len(s) for s in row_labels), default=1)
    top = 46
    width = left + cols * cell + 40
    height = top + rows * cell + 58

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:g}" y="22" text-anchor="middle" {_FONT} '
           f'font-size="14" fill="#222">{escape(title)}</text>']
    for r in range(rows):
        y = top + r * cell
        for c in range(cols):
            x = left + c * cell
            t = 0.5 if span == 0 else (grid[r, c] - lo) / span
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="{_ramp_color(t)}" stroke="white" stroke-width="1">'
                       f'<title>{escape(row_labels[r])} x {escape(col_labels[c])}: '
                       f'{_fmt(grid[r, c])}</title></rect>')
        out.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4:g}" text-anchor="end" '
                   f'{_FONT} font-size="10" fill="#333">{escape(row_labels[r])}</text>')
    for c in range(cols):
        x = left + c * cell + cell / 2
        y = top + rows * cell + 8
        out.append(f'<text x="{x:g}" y="{y}" {_FONT} font-size="10" fill="#333" '
                   f'transform="rotate(45 {x:g} {y})">{escape(col_labels[c])}</text>')
    legend_y = height - 12
    out.append(f'<text x="{left}" y="{legend_y}" {_FONT} font-size="10" '
               f'fill="#555">min {_fmt(lo)}</text>')
    out.append(f'<text x="{left + cols * cell}" y="{legend_y}" text-anchor="end" '
               f'{_FONT} font-size="10" fill="#555">max {_fmt(hi)}</text>')
    out.append("</svg>")
    return "\n".join(out)


def bars_svg(categories: Sequence[str], series: dict[str, Sequence[float]],
             title: str, colors: Sequence[str] = ("#38598c", "#97c95d")) -> str:
    """Grouped vertical bars: one cluster per category, one bar per series."""
    if not categories or not series:
        raise ValueError("bars_svg: need at least one category and one series")
    names = list(series)
    mat = np.asarray([series[n] for n in names], dtype=np.float64)
    if mat.shape[1] != len(categories):
        raise ValueError("bars_svg: series lengths do not match categories")
    hi = float(mat.max()) if mat.size else 1.0
    if hi <= 0:
        hi = 1.0

    n_cat, n_ser = len(categories), len(names)
    bar_w, gap = 16, 14
    cluster = n_ser * bar_w + gap
    left, top = 52, 44
    plot_h = 220
    width = left + n_cat * cluster + 30
    height = top + plot_h + 60

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:g}" y="22" text-anchor="middle" {_FONT} '
           f'font-size="14" fill="#222">{escape(title)}</text>',
           f'<line x1="{left}" y1="{top + plot_h}" x2="{width - 16}" '
           f'y2="{top + plot_h}" stroke="#999"/>',
           f'<text x="{left - 6}" y="{top + 4}" text-anchor="end" {_FONT} '
           f'font-size="10" fill="#555">{_fmt(hi)}</text>',
           f'<text x="{left - 6}" y="{top + plot_h + 4}" text-anchor="end" '
           f'{_FONT} font-size="10" fill="#555">0</text>']
    for ci, cat in enumerate(categories):
        x0 = left + ci * cluster
        for si, name in enumerate(names):
            v = mat[si, ci]
            h = 0.0 if hi == 0 else v / hi * plot_h
            x = x0 + si * bar_w
            out.append(f'<rect x="{x}" y="{top + plot_h - h:.2f}" '
                       f'width="{bar_w - 3}" height="{h:.2f}" '
                       f'fill="{colors[si % len(colors)]}">'
                       f'<title>{escape(cat)} {escape(name)}: {_fmt(v)}</title></rect>')
        out.append(f'<text x="{x0 + (cluster - gap) / 2:g}" y="{top + plot_h + 16}" '
                   f'text-anchor="middle" {_FONT} font-size="10" '
                   f'fill="#333">{escape(cat)}</text>')
    legend_x = left
    for si, name in enumerate(names):
        out.append(f'<rect x="{legend_x}" y="{height - 26}" width="12" height="12" '
                   f'fill="{colors[si % len(colors)]}"/>')
        out.append(f'<text x="{legend_x + 16}" y="{height - 16}" {_FONT} '
                   f'font-size="11" fill="#333">{escape(name)}</text>')
        legend_x += 30 + 7 * len(name)
    out.append("</svg>")
    return "\n".join(out)


@dataclass
class CurveGroup:
    """One metric across seeds: every row of ``series`` shares the x grid."""
    label: str
    color: str
    series: list[list[float]]


def curves_svg(x: Sequence[float], groups: Sequence[CurveGroup], title: str,
               y_label: str = "") -> str:
    """Per-seed faint curves, a bold mean, and a +-1 stddev band per group."""
    xs = np.asarray(x, dtype=np.float64)
    if xs.ndim != 1 or xs.size < 2:
        raise ValueError("curves_svg: need at least two x points")
    if not groups:
        raise ValueError("curves_svg: no curve groups")
    mats = []
    for g in groups:
        m = np.asarray(g.series, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != xs.size:
            raise ValueError(f"curves_svg: group {g.label!r} series do not match x grid")
        mats.append(m)

    width, height = 640, 360
    left, right, top, bottom = 58, 16, 40, 44
    plot_w, plot_h = width - left - right, height - top - bottom
    ylo = min(float(m.min()) for m in mats)
    yhi = max(float(m.max()) for m in mats)
    if yhi == ylo:
        yhi = ylo + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def px(v: float) -> float:
        return left + (v - xs[0]) / (xs[-1] - xs[0]) * plot_w

    def py(v: float) -> float:
        return top + (yhi - v) / (yhi - ylo) * plot_h

    def path(points: Sequence[tuple[float, float]]) -> str:
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in points)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2}" y="22" text-anchor="middle" {_FONT} '
           f'font-size="14" fill="#222">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
           f'fill="none" stroke="#999" stroke-width="1"/>']
    for frac in (0.0, 0.5, 1.0):
        yv = ylo + frac * (yhi - ylo)
        out.append(f'<text x="{left - 6}" y="{py(yv) + 4:.2f}" text-anchor="end" '
                   f'{_FONT} font-size="10" fill="#555">{_fmt(yv)}</text>')
        xv = xs[0] + frac * (xs[-1] - xs[0])
        out.append(f'<text x="{px(xv):.2f}" y="{height - bottom + 16}" '
                   f'text-anchor="middle" {_FONT} font-size="10" '
                   f'fill="#555">{_fmt(xv)}</text>')
    if y_label:
        out.append(f'<text x="14" y="{top + plot_h / 2:g}" {_FONT} font-size="11" '
                   f'fill="#333" transform="rotate(-90 14 {top + plot_h / 2:g})" '
                   f'text-anchor="middle">{escape(y_label)}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" '
               f'{_FONT} font-size="11" fill="#333">step</text>')

    legend_x = left + 8
    for g, m in zip(groups, mats):
        mean = m.mean(axis=0)
        std = m.std(axis=0)
        upper = [(px(xv), py(yv)) for xv, yv in zip(xs, mean + std)]
        lower = [(px(xv), py(yv)) for xv, yv in zip(xs, (mean - std))][::-1]
        out.append(f'<polygon points="{path(upper + lower)}" fill="{g.color}" '
                   f'opacity="0.15"/>')
        for row in m:
            pts = [(px(xv), py(yv)) for xv, yv in zip(xs, row)]
            out.append(f'<polyline points="{path(pts)}" fill="none" '
                       f'stroke="{g.color}" stroke-width="1" opacity="0.3"/>')
        pts = [(px(xv), py(yv)) for xv, yv in zip(xs, mean)]
        out.append(f'<polyline points="{path(pts)}" fill="none" '
                   f'stroke="{g.color}" stroke-width="2.5"/>')
        out.append(f'<rect x="{legend_x}" y="{top + 6}" width="14" height="4" '
                   f'fill="{g.color}"/>')
        out.append(f'<text x="{legend_x + 18}" y="{top + 11}" {_FONT} '
                   f'font-size="11" fill="#333">{escape(g.label)}</text>')
        legend_x += 26 + 7 * len(g.label)
    out.append("</svg>")
    return "\n".join(out)
