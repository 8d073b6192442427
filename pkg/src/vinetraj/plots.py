"""Minimal SVG line charts: command (dotted), quadrotor (dashed), end effector (solid)."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .io import atomic_write_text

WIDTH, HEIGHT = 640, 220
MARGIN = dict(left=60, right=110, top=28, bottom=36)
STYLES = {
    "command": 'stroke-dasharray="2,3"',
    "quadrotor": 'stroke-dasharray="8,4"',
    "end effector": "",
    "reference": 'stroke-dasharray="1,2" stroke-opacity="0.6"',
    "model": 'stroke-dasharray="6,2,1,2"',
}
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#555555", "#9467bd", "#ff7f0e"]


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    step = 10 ** np.floor(np.log10((hi - lo) / n))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= n:
            step *= mult
            break
    return np.arange(np.ceil(lo / step) * step, hi + 1e-12, step)


def chart(series, title: str, xlabel: str, ylabel: str, width: int = WIDTH,
          height: int = HEIGHT, equal_aspect: bool = False) -> str:
    """``series`` is a list of ``(label, x, y)``; style is picked from the label."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    x0, x1 = float(np.nanmin(xs)), float(np.nanmax(xs))
    y0, y1 = float(np.nanmin(ys)), float(np.nanmax(ys))
    pad = 0.05 * max(y1 - y0, 1e-3)
    y0, y1 = y0 - pad, y1 + pad
    if x1 <= x0:
        x1 = x0 + 1.0
    pw = width - MARGIN["left"] - MARGIN["right"]
    ph = height - MARGIN["top"] - MARGIN["bottom"]
    if equal_aspect:
        scale = min(pw / (x1 - x0), ph / (y1 - y0))
        pw, ph = scale * (x1 - x0), scale * (y1 - y0)

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw:.1f}" height="{ph:.1f}" '
        'fill="none" stroke="#999"/>',
        f'<text x="{width / 2:.0f}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{MARGIN["left"] + pw / 2:.0f}" y="{height - 6}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{MARGIN["top"] + ph / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {MARGIN["top"] + ph / 2:.0f})">{escape(ylabel)}</text>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{sx(t):.1f}" y="{MARGIN["top"] + ph + 14:.1f}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{MARGIN["left"] - 4}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
        out.append(f'<line x1="{MARGIN["left"]}" x2="{MARGIN["left"] + pw:.1f}" y1="{sy(t):.1f}" '
                   f'y2="{sy(t):.1f}" stroke="#eee"/>')
    for i, (label, x, y) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y) if np.isfinite(b))
        style = STYLES.get(label.split(" (")[0], "")
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4" {style} points="{pts}"/>')
        ly = MARGIN["top"] + 12 + 14 * i
        lx = MARGIN["left"] + pw + 8
        out.append(f'<line x1="{lx}" x2="{lx + 18}" y1="{ly - 4}" y2="{ly - 4}" stroke="{color}" '
                   f'stroke-width="1.4" {style}/>')
        out.append(f'<text x="{lx + 22}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def overlay_plots(out_dir, t, u, x, ref_x=None, prefix: str = "") -> list[Path]:
    """One SVG per axis plus a top-down xy view. ``x`` is ``(N, 9)``, ``u`` ``(N, 3)``."""
    out_dir = Path(out_dir)
    paths = []
    for axis, name in enumerate("xyz"):
        series = [("command", t, u[:, axis]), ("quadrotor", t, x[:, axis]),
                  ("end effector", t, x[:, 6 + axis])]
        if ref_x is not None:
            series.append(("reference (EE)", t, ref_x[:, 6 + axis]))
        svg = chart(series, f"{prefix}{name}-position", "time [s]", f"{name} [m]")
        paths.append(atomic_write_text(out_dir / f"{prefix}{name}.svg", svg))
    series = [("quadrotor", x[:, 0], x[:, 1]), ("end effector", x[:, 6], x[:, 7])]
    if ref_x is not None:
        series.append(("reference (EE)", ref_x[:, 6], ref_x[:, 7]))
    svg = chart(series, f"{prefix}top view", "x [m]", "y [m]", height=360, equal_aspect=True)
    paths.append(atomic_write_text(out_dir / f"{prefix}xy.svg", svg))
    return paths
