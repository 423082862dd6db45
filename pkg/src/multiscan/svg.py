"""Minimal static SVG line plots.

Output depends only on the input values: coordinates are printed with a fixed
number of digits and series keep their insertion order.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=60, right=150, top=20, bottom=45)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _range(vals: np.ndarray) -> tuple[float, float]:
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def render_svg(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """SVG document with one polyline per named ``(x, y)`` series."""
    if not series:
        raise ValueError("empty series: need at least one (x, y) sequence")
    data = {}
    for name, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape or x.ndim != 1 or len(x) == 0:
            raise ValueError(f"series {name!r}: x and y must be nonempty 1-d sequences of equal length")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError(f"series {name!r} has non-finite values")
        data[str(name)] = (x, y)

    x0, x1 = _range(np.concatenate([x for x, _ in data.values()]))
    y0, y1 = _range(np.concatenate([y for _, y in data.values()]))
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="14" text-anchor="middle" font-size="13">{escape(title)}</text>')
    bottom = MARGIN["top"] + ph
    out.append(
        f'<path d="M{MARGIN["left"]},{MARGIN["top"]} V{bottom} H{MARGIN["left"] + pw}" '
        'fill="none" stroke="black" stroke-width="1" class="axes"/>'
    )
    for v in _ticks(x0, x1):
        out.append(f'<text x="{px(v):.2f}" y="{bottom + 16}" text-anchor="middle" font-size="11">{v:.3g}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{py(v) + 4:.2f}" text-anchor="end" font-size="11">{v:.3g}</text>')
    if xlabel:
        out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="14" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>'
        )
    for i, (name, (x, y)) in enumerate(data.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN["top"] + 10 + 18 * i
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}" font-size="11" class="legend">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(series: Mapping[str, tuple[Sequence[float], Sequence[float]]], path: str | Path, **labels) -> None:
    Path(path).write_text(render_svg(series, **labels), encoding="utf-8")
