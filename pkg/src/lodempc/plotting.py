"""Dependency-free SVG line plots of closed-loop trajectories."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

COLOURS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")
WIDTH, HEIGHT = 720, 420
MARGIN = 50


def _polyline(xs, ys, colour, dashed=False, width=1.6) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    dash = ' stroke-dasharray="6 4"' if dashed else ""
    return f'<polyline fill="none" stroke="{colour}" stroke-width="{width}"{dash} points="{pts}"/>'


def trajectory_svg(times, channels, labels, lower=None, upper=None, title: str = "") -> str:
    """One panel with a line per channel and dashed lines for finite bounds.

    ``channels``, ``lower`` and ``upper`` are ``(n_channels, n_times)`` arrays.
    """
    times = np.asarray(times, float)
    channels = np.atleast_2d(np.asarray(channels, float))
    pieces = [channels]
    for b in (lower, upper):
        if b is not None:
            b = np.asarray(b, float)
            pieces.append(b[np.isfinite(b)])
    finite = np.concatenate([p.ravel() for p in pieces])
    finite = finite[np.isfinite(finite)]
    ymin, ymax = (float(finite.min()), float(finite.max())) if finite.size else (-1.0, 1.0)
    if ymax - ymin < 1e-12:
        ymin, ymax = ymin - 1, ymax + 1
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad
    t0, t1 = float(times[0]), float(times[-1])

    def sx(t):
        return MARGIN + (np.asarray(t) - t0) / (t1 - t0) * (WIDTH - 2 * MARGIN)

    def sy(y):
        return HEIGHT - MARGIN - (np.asarray(y) - ymin) / (ymax - ymin) * (HEIGHT - 2 * MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    for frac in np.linspace(0, 1, 5):
        t = t0 + frac * (t1 - t0)
        y = ymin + frac * (ymax - ymin)
        out.append(f'<text x="{sx(t):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{t:.3g}</text>')
        out.append(f'<text x="{MARGIN - 6}" y="{sy(y) + 4:.1f}" text-anchor="end">{y:.3g}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>')

    for c, (row, label) in enumerate(zip(channels, labels)):
        colour = COLOURS[c % len(COLOURS)]
        out.append(_polyline(sx(times), sy(row), colour))
        for b in (lower, upper):
            if b is None:
                continue
            bc = np.asarray(b, float)[c]
            ok = np.isfinite(bc)
            if ok.any():
                out.append(_polyline(sx(times[ok]), sy(bc[ok]), colour, dashed=True, width=1.0))
        ly = MARGIN + 16 * c
        out.append(f'<line x1="{WIDTH - MARGIN - 60}" y1="{ly}" x2="{WIDTH - MARGIN - 40}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 34}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
