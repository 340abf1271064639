"""Minimal static SVG line charts for x(t) and z(t)."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")

WIDTH = 800
PANEL_H = 260
MARGIN = dict(left=60, right=20, top=30, bottom=40)


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + step * 1e-9, step)]


def _panel(
    out: list[str],
    y0: float,
    label: str,
    series: Sequence[tuple[np.ndarray, np.ndarray, str]],
    t_range: tuple[float, float],
) -> None:
    left, right = MARGIN["left"], WIDTH - MARGIN["right"]
    top, bottom = y0 + MARGIN["top"], y0 + PANEL_H - MARGIN["bottom"]
    vmin = min(float(np.min(v)) for _, v, _ in series)
    vmax = max(float(np.max(v)) for _, v, _ in series)
    if vmax == vmin:
        vmin, vmax = vmin - 1.0, vmax + 1.0
    t0, t1 = t_range
    if t1 == t0:
        t1 = t0 + 1.0

    def sx(t):
        return left + (t - t0) / (t1 - t0) * (right - left)

    def sy(v):
        return bottom - (v - vmin) / (vmax - vmin) * (bottom - top)

    out.append(
        f'<rect x="{left}" y="{top:.1f}" width="{right - left}" '
        f'height="{bottom - top:.1f}" fill="none" stroke="#444"/>'
    )
    out.append(
        f'<text x="{left - 45}" y="{(top + bottom) / 2:.1f}" font-size="14">{escape(label)}</text>'
    )
    for tv in _nice_ticks(vmin, vmax):
        out.append(
            f'<text x="{left - 5}" y="{sy(tv) + 4:.1f}" font-size="10" '
            f'text-anchor="end">{tv:g}</text>'
        )
    for tt in _nice_ticks(t0, t1):
        out.append(
            f'<text x="{sx(tt):.1f}" y="{bottom + 14:.1f}" font-size="10" '
            f'text-anchor="middle">{tt:g}</text>'
        )
    for (t, v, colour) in series:
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t.tolist(), v.tolist()))
        # data-* attributes let readers map pixels back to values
        out.append(
            f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" '
            f'data-axis="{escape(label)}" data-value-range="{vmin!r},{vmax!r}" '
            f'data-pixel-range="{bottom!r},{top!r}" points="{pts}"/>'
        )


def render_xz_chart(
    traces: Sequence[tuple[str, np.ndarray, np.ndarray]],
    title: str = "",
) -> str:
    """SVG with an x(t) panel above a z(t) panel; one coloured line per trace.

    ``traces`` holds ``(label, times, states)`` with ``states`` of shape (n, 3).
    """
    if not traces:
        raise ValueError("nothing to plot")
    t_lo = min(float(t[0]) for _, t, _ in traces)
    t_hi = max(float(t[-1]) for _, t, _ in traces)
    height = 2 * PANEL_H + 40
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" font-size="14" text-anchor="middle">{escape(title)}</text>',
    ]
    colours = [PALETTE[i % len(PALETTE)] for i in range(len(traces))]
    for k, (axis, name) in enumerate(((0, "x"), (2, "z"))):
        series = [(t, s[:, axis], c) for (_, t, s), c in zip(traces, colours)]
        _panel(out, 20 + k * PANEL_H, name, series, (t_lo, t_hi))
    for i, ((label, _, _), c) in enumerate(zip(traces, colours)):
        y = height - 10
        x = MARGIN["left"] + 200 * i
        out.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 20}" y2="{y - 4}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{x + 25}" y="{y}" font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
