"""Minimal log-log line charts written as standalone SVG."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_W, _H = 420, 300
_LEFT, _RIGHT, _TOP, _BOTTOM = 64, 12, 28, 44


def _decades(lo: float, hi: float) -> list[float]:
    return [10.0**e for e in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)]


def _panel(series: Mapping[str, Sequence[tuple[float, float]]], title: str, ylabel: str, dx: int) -> list[str]:
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts if y > 0]
    if not xs or not ys:
        return [f'<text x="{dx + _W / 2}" y="{_H / 2}" text-anchor="middle">no data</text>']
    x0, x1 = math.log2(min(xs)), math.log2(max(xs))
    y0, y1 = math.log10(min(ys)), math.log10(max(ys))
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def px(x):
        return dx + _LEFT + (math.log2(x) - x0) / (x1 - x0) * pw

    def py(y):
        return _TOP + ph - (math.log10(y) - y0) / (y1 - y0) * ph

    out = [
        f'<text x="{dx + _W / 2:.1f}" y="16" text-anchor="middle" font-weight="bold">{escape(title)}</text>',
        f'<rect x="{dx + _LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for x in sorted(set(xs)):
        out.append(f'<text x="{px(x):.1f}" y="{_TOP + ph + 14}" text-anchor="middle">{int(x)}</text>')
    for y in _decades(10**y0, 10**y1):
        if 10**y0 <= y <= 10**y1:
            out.append(f'<line x1="{dx + _LEFT}" x2="{dx + _LEFT + pw}" y1="{py(y):.1f}" y2="{py(y):.1f}" stroke="#ddd"/>')
            out.append(f'<text x="{dx + _LEFT - 4}" y="{py(y) + 4:.1f}" text-anchor="end">{y:.0e}</text>')
    out.append(f'<text x="{dx + _LEFT + pw / 2:.1f}" y="{_H - 8}" text-anchor="middle">sequence length</text>')
    out.append(
        f'<text x="{dx + 14}" y="{_TOP + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 {dx + 14} {_TOP + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for i, (name, pts) in enumerate(sorted(series.items())):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts if y > 0)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _TOP + 12 + 13 * i
        out.append(f'<text x="{dx + _LEFT + 6}" y="{ly}" fill="{color}">{escape(name)}</text>')
    return out


def bench_svg(time_series, memory_series) -> str:
    """Two side-by-side panels: length vs time and length vs peak bytes."""
    body = _panel(time_series, "running time", "seconds", 0) + _panel(memory_series, "peak memory", "bytes", _W)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * _W}" height="{_H}" '
        f'font-family="sans-serif" font-size="11">\n'
        '<rect width="100%" height="100%" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n"
    )


def write_bench_svg(records, path: "str | Path") -> None:
    from .bench import series

    Path(path).write_text(bench_svg(series(records, "time"), series(records, "memory")))
