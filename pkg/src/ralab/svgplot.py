"""Self-contained SVG line/scatter writer (no plotting dependency)."""

from __future__ import annotations

import numpy as np

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(vals, dtype=float) - lo) * (out_hi - out_lo) / span


def _frame(width, height, title, x_label, y_label):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{width/2}" y="{height-6}" text-anchor="middle" font-size="11">{x_label}</text>',
        f'<text x="14" y="{height/2}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {height/2})">{y_label}</text>',
    ]


def _finish(parts, path):
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def line_chart(series: dict, path: str, title: str = "", x_label: str = "",
               y_label: str = "", width: int = 640, height: int = 400,
               log_y: bool = False) -> None:
    """series: name -> (xs, ys)."""
    margin = 45
    all_x = np.concatenate([np.asarray(xs, float) for xs, _ in series.values()])
    all_y = np.concatenate([np.asarray(ys, float) for _, ys in series.values()])
    if log_y:
        all_y = np.log10(np.maximum(all_y, 1e-300))
    x_lo, x_hi = float(all_x.min()), float(all_x.max())
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    parts = _frame(width, height, title, x_label, y_label)
    parts.append(f'<rect x="{margin}" y="{margin}" width="{width-2*margin}" '
                 f'height="{height-2*margin}" fill="none" stroke="#999"/>')
    for i, (name, (xs, ys)) in enumerate(series.items()):
        ys = np.asarray(ys, float)
        if log_y:
            ys = np.log10(np.maximum(ys, 1e-300))
        px = _scale(xs, x_lo, x_hi, margin, width - margin)
        py = _scale(ys, y_lo, y_hi, height - margin, margin)
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{width-margin-4}" y="{margin+14+14*i}" '
                     f'text-anchor="end" font-size="11" fill="{color}">{name}</text>')
    _finish(parts, path)


def scatter_chart(xs, ys, path: str, title: str = "", x_label: str = "",
                  y_label: str = "", width: int = 480, height: int = 480,
                  log_log: bool = True) -> None:
    margin = 45
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if log_log:
        xs = np.log10(np.maximum(xs, 1e-300))
        ys = np.log10(np.maximum(ys, 1e-300))
    parts = _frame(width, height, title, x_label, y_label)
    parts.append(f'<rect x="{margin}" y="{margin}" width="{width-2*margin}" '
                 f'height="{height-2*margin}" fill="none" stroke="#999"/>')
    px = _scale(xs, xs.min(), xs.max(), margin, width - margin)
    py = _scale(ys, ys.min(), ys.max(), height - margin, margin)
    for x, y in zip(px, py):
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" '
                     f'fill="#1f77b4" fill-opacity="0.7"/>')
    _finish(parts, path)
