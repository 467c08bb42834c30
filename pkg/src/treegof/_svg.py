"""Tiny static SVG writer for size-versus-level scatter plots.

Only what the simulation command needs: axes with ticks, one point per
nominal level, and the 45-degree reference line.  Output is a plain
string with fixed number formatting so identical inputs give identical
bytes.
"""

from __future__ import annotations

import math

_WIDTH = 420
_HEIGHT = 340
_LEFT = 56
_RIGHT = 16
_TOP = 18
_BOTTOM = 46


def _fmt(x: float) -> str:
    return format(x, ".2f")


def _axis_limit(values) -> float:
    top = max(0.05, max(values, default=0.0))
    return math.ceil(top / 0.05 - 1e-9) * 0.05


def size_plot(alphas, sizes, reps: int) -> str:
    """SVG scatter of empirical size against nominal level.

    Both axes run from 0 to a shared limit (a multiple of 0.05 covering
    the data) so the dashed reference diagonal is at 45 degrees.
    """
    alphas = [float(a) for a in alphas]
    sizes = [float(s) for s in sizes]
    if len(alphas) != len(sizes):
        raise ValueError("one size per nominal level required")
    limit = _axis_limit(alphas + sizes)
    x0, x1 = _LEFT, _WIDTH - _RIGHT
    y0, y1 = _HEIGHT - _BOTTOM, _TOP

    def sx(v):
        return x0 + (x1 - x0) * v / limit

    def sy(v):
        return y0 + (y1 - y0) * v / limit

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    ticks = 5
    for k in range(ticks + 1):
        v = limit * k / ticks
        px, py = _fmt(sx(v)), _fmt(sy(v))
        label = _fmt(v)
        parts.append(
            f'<line x1="{px}" y1="{y0}" x2="{px}" y2="{y0 + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px}" y="{y0 + 17}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">{label}</text>'
        )
        parts.append(
            f'<line x1="{x0 - 4}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x0 - 7}" y="{py}" font-size="10" text-anchor="end" '
            f'dominant-baseline="middle" font-family="sans-serif">{label}</text>'
        )
    parts.append(
        f'<line x1="{_fmt(sx(0.0))}" y1="{_fmt(sy(0.0))}" '
        f'x2="{_fmt(sx(limit))}" y2="{_fmt(sy(limit))}" '
        f'stroke="#888888" stroke-dasharray="4 3"/>'
    )
    for a, s in zip(alphas, sizes):
        parts.append(
            f'<circle cx="{_fmt(sx(a))}" cy="{_fmt(sy(s))}" r="3" '
            f'fill="#1f6fb4"/>'
        )
    parts.append(
        f'<text x="{(x0 + x1) // 2}" y="{_HEIGHT - 8}" font-size="11" '
        f'text-anchor="middle" font-family="sans-serif">nominal level</text>'
    )
    parts.append(
        f'<text x="14" y="{(y0 + y1) // 2}" font-size="11" '
        f'text-anchor="middle" font-family="sans-serif" '
        f'transform="rotate(-90 14 {(y0 + y1) // 2})">'
        f"empirical size ({reps} runs)</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
