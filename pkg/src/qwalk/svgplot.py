"""Minimal log-log line plot written as standalone SVG."""

from __future__ import annotations

import math
from collections.abc import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 440
MARGIN = 60


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def loglog_svg(
    series: Sequence[tuple[str, Sequence[float], Sequence[float], str]],
    xlabel: str,
    ylabel: str,
    title: str = "",
) -> str:
    """Render ``(label, xs, ys, dash)`` series on log-log axes.

    Non-positive points are dropped. ``dash`` is an SVG stroke-dasharray
    value ("" for a solid line).
    """
    pts = [
        (label, [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0], dash)
        for label, xs, ys, dash in series
    ]
    allx = [x for _, xy, _ in pts for x, _ in xy]
    ally = [y for _, xy, _ in pts for _, y in xy]
    if not allx:
        raise ValueError("nothing to plot")
    xdec = _decades(min(allx), max(allx))
    ydec = _decades(min(ally), max(ally))
    if len(xdec) < 2:
        xdec.append(xdec[0] + 1)
    if len(ydec) < 2:
        ydec.insert(0, ydec[0] - 1)
    x0, x1 = xdec[0], xdec[-1]
    y0, y1 = ydec[0], ydec[-1]

    def px(x: float) -> float:
        return MARGIN + (math.log10(x) - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def py(y: float) -> float:
        return HEIGHT - MARGIN - (math.log10(y) - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>',
    ]
    for d in xdec:
        x = px(10.0**d)
        out.append(f'<line x1="{x:.2f}" y1="{HEIGHT - MARGIN}" x2="{x:.2f}" y2="{HEIGHT - MARGIN + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle">1e{d}</text>')
    for d in ydec:
        y = py(10.0**d)
        out.append(f'<line x1="{MARGIN - 5}" y1="{y:.2f}" x2="{MARGIN}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN - 8}" y="{y + 4:.2f}" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="{MARGIN - 20}" text-anchor="middle">{escape(title)}</text>')

    colors = ["#1f77b4", "#555555", "#d62728", "#2ca02c"]
    for i, (label, xy, dash) in enumerate(pts):
        if not xy:
            continue
        color = colors[i % len(colors)]
        path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in xy)
        style = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{style}/>')
        ly = MARGIN + 16 + 16 * i
        out.append(f'<line x1="{WIDTH - MARGIN - 110}" y1="{ly - 4}" x2="{WIDTH - MARGIN - 90}" y2="{ly - 4}" stroke="{color}"{style}/>')
        out.append(f'<text x="{WIDTH - MARGIN - 85}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
