"""Tiny deterministic SVG line plots: polylines, axes, tick labels.

Static figure output only; byte-identical across runs for golden-file
testing, which is why this is hand-rolled rather than a plotting library.
"""

from __future__ import annotations

import numpy as np

_COLORS = ("#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#2c3e50")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, n)
    return [float(f"{v:.6g}") for v in raw]


def line_plot(path, series, title: str = "", xlabel: str = "",
              ylabel: str = "", width: int = 640, height: int = 420,
              point_series=None):
    """Write an SVG with one polyline per (label, x, y) triple in series.

    point_series optionally adds (label, x, y) scatter markers.
    """
    margin = 60
    series = list(series)
    point_series = list(point_series or [])
    xs = np.concatenate([np.asarray(s[1], dtype=float) for s in series + point_series])
    ys = np.concatenate([np.asarray(s[2], dtype=float) for s in series + point_series])
    finite = np.isfinite(xs) & np.isfinite(ys)
    if not finite.any():
        raise ValueError("nothing finite to plot")
    x_lo, x_hi = xs[finite].min(), xs[finite].max()
    y_lo, y_hi = ys[finite].min(), ys[finite].max()
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad_y = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    def sx(v):
        return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
    ]
    for tv in _ticks(x_lo, x_hi):
        px = sx(tv)
        parts.append(f'<line x1="{px:.2f}" y1="{height - margin}" '
                     f'x2="{px:.2f}" y2="{height - margin + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.2f}" y="{height - margin + 18}" '
                     f'font-size="11" text-anchor="middle">{tv:g}</text>')
    for tv in _ticks(y_lo, y_hi):
        py = sy(tv)
        parts.append(f'<line x1="{margin - 5}" y1="{py:.2f}" '
                     f'x2="{margin}" y2="{py:.2f}" stroke="black"/>')
        parts.append(f'<text x="{margin - 8}" y="{py + 4:.2f}" font-size="11" '
                     f'text-anchor="end">{tv:g}</text>')
    if title:
        parts.append(f'<text x="{width / 2}" y="24" font-size="14" '
                     f'text-anchor="middle">{title}</text>')
    if xlabel:
        parts.append(f'<text x="{width / 2}" y="{height - 12}" font-size="12" '
                     f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{height / 2}" font-size="12" '
                     f'text-anchor="middle" transform="rotate(-90 16 {height / 2})">'
                     f'{ylabel}</text>')
    for k, (label, x, y) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}"
                       for a, b in zip(np.asarray(x), np.asarray(y))
                       if np.isfinite(a) and np.isfinite(b))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width - margin + 4}" '
                     f'y="{margin + 16 * k + 10}" font-size="11" '
                     f'fill="{color}">{label}</text>')
    for k, (label, x, y) in enumerate(point_series):
        color = _COLORS[(len(series) + k) % len(_COLORS)]
        for a, b in zip(np.asarray(x), np.asarray(y)):
            if np.isfinite(a) and np.isfinite(b):
                parts.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" '
                             f'r="2" fill="{color}"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
