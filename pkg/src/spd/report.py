"""Deterministic SVG line charts.

Byte-for-byte reproducible: fixed viewport, fixed palette order, fixed
number formatting, no timestamps or generated ids.  Identical inputs
give identical files, so charts can be golden-tested like any other
artifact.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 30, 40
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
PAD_FRAC = 0.05  # axis bounds pad the data range by 5% on each side


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _bounds(values):
    lo = min(values)
    hi = max(values)
    if lo == hi:
        lo -= 0.5
        hi += 0.5
    pad = (hi - lo) * PAD_FRAC
    return lo - pad, hi + pad


def render_curves(series, title: str = "", x_label: str = "",
                  y_label: str = "") -> str:
    """series: list of (label, xs, ys).  Returns SVG text.

    Single-point series render as a marker; multi-point series as a
    polyline plus small markers.
    """
    if not series:
        raise ContractError("no series to render")
    for label, xs, ys in series:
        if len(xs) == 0 or len(xs) != len(ys):
            raise ContractError(f"series {label!r} is empty or ragged")

    all_x = [float(x) for _, xs, _ in series for x in xs]
    all_y = [float(y) for _, _, ys in series for y in ys]
    x_lo, x_hi = _bounds(all_x)
    y_lo, y_hi = _bounds(all_y)
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (float(x) - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return HEIGHT - MARGIN_B - (float(y) - y_lo) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" '
        f'font-family="monospace" font-size="13">{title}</text>',
        # axes
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        f'<line x1="{MARGIN_L}" y1="{HEIGHT - MARGIN_B}" x2="{WIDTH - MARGIN_R}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        # bounds labels
        f'<text x="{MARGIN_L}" y="{HEIGHT - MARGIN_B + 16}" '
        f'font-family="monospace" font-size="10">{_fmt(x_lo)}</text>',
        f'<text x="{WIDTH - MARGIN_R}" y="{HEIGHT - MARGIN_B + 16}" '
        f'text-anchor="end" font-family="monospace" font-size="10">{_fmt(x_hi)}</text>',
        f'<text x="{MARGIN_L - 6}" y="{HEIGHT - MARGIN_B}" text-anchor="end" '
        f'font-family="monospace" font-size="10">{_fmt(y_lo)}</text>',
        f'<text x="{MARGIN_L - 6}" y="{MARGIN_T + 8}" text-anchor="end" '
        f'font-family="monospace" font-size="10">{_fmt(y_hi)}</text>',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 8}" text-anchor="middle" '
        f'font-family="monospace" font-size="11">{x_label}</text>',
        f'<text x="14" y="{HEIGHT // 2}" text-anchor="middle" '
        f'font-family="monospace" font-size="11" '
        f'transform="rotate(-90 14 {HEIGHT // 2})">{y_label}</text>',
    ]

    for idx, (label, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        if len(xs) > 1:
            pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys))
            out.append(f'<polyline points="{pts}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" '
                       f'r="2.5" fill="{color}"/>')
        ly = MARGIN_T + 14 * (idx + 1)
        out.append(f'<rect x="{WIDTH - MARGIN_R - 150}" y="{ly - 8}" width="10" '
                   f'height="10" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - MARGIN_R - 136}" y="{ly}" '
                   f'font-family="monospace" font-size="10">{label}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"


def axis_bounds(values):
    """Exposed so tests can recompute what the chart used."""
    return _bounds([float(v) for v in values])


def save_svg(path, text: str):
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
