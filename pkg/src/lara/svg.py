"""Small dependency-free SVG line plots.

Output depends only on the data, so plots are reproducible byte for byte.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from ._io import atomic_write_text

W, H = 900, 300
PAD = 45
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _scale(v, lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return a + (np.asarray(v, dtype=np.float64) - lo) / span * (b - a)


def _frame(title, xlabel, ylabel, xr, yr):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{PAD}" y="{PAD // 2}" width="{W - 1.5 * PAD:g}" height="{H - 1.5 * PAD:g}" fill="none" stroke="#888"/>',
        f'<text x="{W / 2:g}" y="15" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{W / 2:g}" y="{H - 5}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
        f'<text x="12" y="{H / 2:g}" font-size="11" transform="rotate(-90 12 {H / 2:g})" text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for v, y in ((yr[0], H - PAD), (yr[1], PAD // 2)):
        out.append(f'<text x="{PAD - 4}" y="{y + 4}" text-anchor="end" font-size="10">{v:g}</text>')
    for v, x in ((xr[0], PAD), (xr[1], W - PAD // 2)):
        out.append(f'<text x="{x}" y="{H - PAD + 14}" text-anchor="middle" font-size="10">{v:g}</text>')
    return out


def _xy(x, y, xr, yr):
    px = _scale(x, xr[0], xr[1], PAD, W - PAD // 2)
    py = _scale(y, yr[0], yr[1], H - PAD, PAD // 2)
    return px, py


def line_plot(series, title="", xlabel="", ylabel="", yrange=None):
    """``series`` is a list of ``(label, x, y)``; returns SVG text."""
    xs = np.concatenate([np.asarray(s[1], dtype=np.float64) for s in series])
    ys = np.concatenate([np.asarray(s[2], dtype=np.float64) for s in series])
    xr = (float(xs.min()), float(xs.max()))
    yr = yrange or (float(ys.min()), float(ys.max()))
    out = _frame(title, xlabel, ylabel, xr, yr)
    for i, (label, x, y) in enumerate(series):
        px, py = _xy(x, y, xr, yr)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        c = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - PAD}" y="{PAD // 2 + 14 * (i + 1)}" text-anchor="end" font-size="11" fill="{c}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cam_trace_plot(bpm, cam, title="Grad-CAM"):
    """FHR trace drawn segment by segment, red intensity proportional to cam."""
    bpm = np.asarray(bpm, dtype=np.float64)
    cam = np.asarray(cam, dtype=np.float64)
    x = np.arange(bpm.size) / 240.0
    xr = (0.0, float(x[-1]))
    yr = (min(50.0, float(bpm.min())), max(210.0, float(bpm.max())))
    out = _frame(title, "minute", "bpm", xr, yr)
    px, py = _xy(x, bpm, xr, yr)
    for i in range(bpm.size - 1):
        c = 0.5 * (cam[i] + cam[i + 1])
        r = int(round(255 * c))
        g = int(round(80 * (1 - c)))
        out.append(
            f'<line x1="{px[i]:.2f}" y1="{py[i]:.2f}" x2="{px[i + 1]:.2f}" y2="{py[i + 1]:.2f}" '
            f'stroke="rgb({r},{g},{g})" stroke-width="1.2"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text):
    atomic_write_text(path, text)
