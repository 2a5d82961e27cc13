"""Minimal static SVG line charts with optional trade markers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .errors import EmptyInput

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass
class Overlay:
    label: str
    values: Sequence[float]
    dashed: bool = False


@dataclass
class TradeMarker:
    index: int
    price: float
    kind: str  # "entry" or "exit"


@dataclass
class ChartSpec:
    title: str
    overlays: list[Overlay]
    markers: list[TradeMarker] = field(default_factory=list)
    x_labels: Sequence[str] = ()
    width: int = 800
    height: int = 400


def _f(v: float) -> str:
    return f"{v:.2f}"


def emit_svg_chart(spec: ChartSpec) -> str:
    if not spec.overlays or all(len(o.values) == 0 for o in spec.overlays):
        raise EmptyInput("chart needs at least one non-empty series")
    W, H = spec.width, spec.height
    left, right, top, bottom = 60, 20, 30, 40
    n = max(len(o.values) for o in spec.overlays)
    allv = np.concatenate([np.asarray(o.values, dtype=float) for o in spec.overlays if len(o.values)]
                          + [np.array([m.price for m in spec.markers], dtype=float)])
    lo, hi = float(np.min(allv)), float(np.max(allv))
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def px(i: float) -> float:
        return left + (W - left - right) * (i / (n - 1) if n > 1 else 0.5)

    def py(v: float) -> float:
        return top + (H - top - bottom) * (hi - v) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.0f}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">'
        f"{escape(spec.title)}</text>",
        f'<line x1="{left}" y1="{H - bottom}" x2="{W - right}" y2="{H - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{H - bottom}" stroke="black"/>',
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        parts.append(f'<text x="{left - 5}" y="{_f(py(v) + 4)}" text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{v:.2f}</text>')
    if spec.x_labels:
        step = max(1, len(spec.x_labels) // 6)
        for i in range(0, len(spec.x_labels), step):
            parts.append(f'<text x="{_f(px(i))}" y="{H - bottom + 15}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="10">{escape(str(spec.x_labels[i]))}</text>')

    for k, o in enumerate(spec.overlays):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(px(i))},{_f(py(v))}" for i, v in enumerate(o.values))
        dash = ' stroke-dasharray="5,3"' if o.dashed else ""
        parts.append(f'<polyline class="series" data-label={quoteattr(o.label)} fill="none" stroke="{color}" '
                     f'stroke-width="1.5"{dash} points="{pts}"/>')
        parts.append(f'<text x="{W - right - 5}" y="{top + 14 * (k + 1)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11" fill="{color}">{escape(o.label)}</text>')

    for m in spec.markers:
        color = "#2ca02c" if m.kind == "entry" else "#d62728"
        parts.append(f'<circle class="trade-{m.kind}" cx="{_f(px(m.index))}" cy="{_f(py(m.price))}" r="5" '
                     f'fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
