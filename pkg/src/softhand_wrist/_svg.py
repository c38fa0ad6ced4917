"""Minimal hand-rolled SVG projections (no plotting dependency)."""

from __future__ import annotations

import numpy as np

PANEL = 320.0
PAD = 24.0


def _fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def projections(panels, title: str = "", mode: str = "line") -> str:
    """Render ``panels`` = [(label, (n, 2) array), ...] side by side.

    ``mode`` is "line" (polyline) or "points" (small circles). Each panel is
    scaled independently with equal aspect ratio.
    """
    width = PAD + len(panels) * (PANEL + PAD)
    height = PANEL + 2 * PAD + 16
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<text x="{_fmt(PAD)}" y="16" font-family="monospace" font-size="12">{title}</text>',
    ]
    for k, (label, pts) in enumerate(panels):
        x0 = PAD + k * (PANEL + PAD)
        y0 = PAD + 8
        out.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(PANEL)}" height="{_fmt(PANEL)}" '
            'fill="none" stroke="#999"/>'
        )
        out.append(
            f'<text x="{_fmt(x0 + 4)}" y="{_fmt(y0 + 14)}" font-family="monospace" font-size="11">{label}</text>'
        )
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            continue
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
        scale = (PANEL - 2 * PAD) / span
        centre = (lo + hi) / 2.0
        # screen y grows downwards
        sx = x0 + PANEL / 2 + (pts[:, 0] - centre[0]) * scale
        sy = y0 + PANEL / 2 - (pts[:, 1] - centre[1]) * scale
        if mode == "points":
            for a, b in zip(sx, sy):
                out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="1.5" fill="#1f77b4"/>')
        else:
            coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx, sy))
            out.append(f'<polyline points="{coords}" fill="none" stroke="#1f77b4" stroke-width="1"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
