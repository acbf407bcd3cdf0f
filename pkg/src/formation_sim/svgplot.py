"""Minimal native SVG line charts.

Just enough for the run artifacts: multi-curve line charts with axes,
ticks, a legend, optional vertical event lines and point markers, and an
equal-aspect mode for plan-view (x, y) plots. Output is a standalone SVG
string; no plotting dependency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Curve", "Marker", "line_chart", "PALETTE"]

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    "#17becf", "#e377c2", "#7f7f7f", "#bcbd22",
)

_MAX_POINTS = 1500


@dataclass
class Curve:
    label: str
    x: np.ndarray
    y: np.ndarray
    color: str | None = None
    width: float = 1.3
    dash: str | None = None
    closed: bool = False


@dataclass
class Marker:
    x: float
    y: float
    color: str = "#000000"
    radius: float = 3.0
    label: str = ""


def _ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _decimate(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.size <= _MAX_POINTS:
        return x, y
    stride = int(math.ceil(x.size / _MAX_POINTS))
    idx = np.arange(0, x.size, stride)
    if idx[-1] != x.size - 1:
        idx = np.append(idx, x.size - 1)
    return x[idx], y[idx]


def line_chart(
    curves: list[Curve],
    *,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    size: tuple[int, int] = (880, 460),
    equal_aspect: bool = False,
    vlines: tuple[float, ...] = (),
    markers: tuple[Marker, ...] = (),
) -> str:
    """Render curves into a standalone SVG document string."""
    w, h = size
    ml, mr, mt, mb = 64, 150, 34, 46
    pw, ph = w - ml - mr, h - mt - mb

    xs = [np.asarray(c.x, dtype=float) for c in curves]
    ys = [np.asarray(c.y, dtype=float) for c in curves]
    finite_x = np.concatenate([x[np.isfinite(x)] for x in xs]) if xs else np.array([0.0])
    finite_y = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.array([0.0])
    if markers:
        finite_x = np.append(finite_x, [m.x for m in markers])
        finite_y = np.append(finite_y, [m.y for m in markers])
    if vlines:
        finite_x = np.append(finite_x, vlines)
    x_lo, x_hi = float(finite_x.min()), float(finite_x.max())
    y_lo, y_hi = float(finite_y.min()), float(finite_y.max())
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi <= y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad_x = 0.03 * (x_hi - x_lo)
    pad_y = 0.06 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - pad_x, x_hi + pad_x
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    if equal_aspect:
        # widen the shorter data range so one unit spans the same pixels both ways
        sx, sy = pw / (x_hi - x_lo), ph / (y_hi - y_lo)
        if sx < sy:
            grow = (y_hi - y_lo) * (sy / sx - 1.0) / 2.0
            y_lo, y_hi = y_lo - grow, y_hi + grow
        else:
            grow = (x_hi - x_lo) * (sx / sy - 1.0) / 2.0
            x_lo, x_hi = x_lo - grow, x_hi + grow

    def px(v: float) -> float:
        return ml + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v: float) -> float:
        return mt + ph - (v - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}" font-family="Helvetica, Arial, sans-serif">',
        f'<rect width="{w}" height="{h}" fill="#ffffff"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        f'stroke="#333333" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{ml + pw / 2:.1f}" y="{mt - 12}" text-anchor="middle" '
            f'font-size="15" fill="#111111">{escape(title)}</text>'
        )

    for tx in _ticks(x_lo, x_hi):
        X = px(tx)
        parts.append(
            f'<line x1="{X:.2f}" y1="{mt + ph}" x2="{X:.2f}" y2="{mt + ph + 5}" '
            f'stroke="#333333"/>'
        )
        parts.append(
            f'<line x1="{X:.2f}" y1="{mt}" x2="{X:.2f}" y2="{mt + ph}" '
            f'stroke="#dddddd" stroke-width="0.6"/>'
        )
        parts.append(
            f'<text x="{X:.2f}" y="{mt + ph + 18}" text-anchor="middle" '
            f'font-size="11" fill="#333333">{_fmt(tx)}</text>'
        )
    for ty in _ticks(y_lo, y_hi):
        Y = py(ty)
        parts.append(
            f'<line x1="{ml - 5}" y1="{Y:.2f}" x2="{ml}" y2="{Y:.2f}" stroke="#333333"/>'
        )
        parts.append(
            f'<line x1="{ml}" y1="{Y:.2f}" x2="{ml + pw}" y2="{Y:.2f}" '
            f'stroke="#dddddd" stroke-width="0.6"/>'
        )
        parts.append(
            f'<text x="{ml - 8}" y="{Y + 4:.2f}" text-anchor="end" '
            f'font-size="11" fill="#333333">{_fmt(ty)}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{ml + pw / 2:.1f}" y="{h - 10}" text-anchor="middle" '
            f'font-size="12" fill="#111111">{escape(xlabel)}</text>'
        )
    if ylabel:
        parts.append(
            f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="12" '
            f'fill="#111111" transform="rotate(-90 16 {mt + ph / 2:.1f})">'
            f"{escape(ylabel)}</text>"
        )

    for tv in vlines:
        X = px(tv)
        parts.append(
            f'<line x1="{X:.2f}" y1="{mt}" x2="{X:.2f}" y2="{mt + ph}" '
            f'stroke="#888888" stroke-width="1" stroke-dasharray="5,4"/>'
        )

    for k, c in enumerate(curves):
        color = c.color or PALETTE[k % len(PALETTE)]
        cx, cy = _decimate(np.asarray(c.x, float), np.asarray(c.y, float))
        if c.closed and cx.size:
            cx = np.append(cx, cx[0])
            cy = np.append(cy, cy[0])
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(cx, cy))
        dash = f' stroke-dasharray="{c.dash}"' if c.dash else ""
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{c.width}"{dash}/>'
        )

    for m in markers:
        parts.append(
            f'<circle cx="{px(m.x):.2f}" cy="{py(m.y):.2f}" r="{m.radius}" '
            f'fill="{m.color}" stroke="#ffffff" stroke-width="0.8"/>'
        )
        if m.label:
            parts.append(
                f'<text x="{px(m.x) + 6:.2f}" y="{py(m.y) - 5:.2f}" font-size="10" '
                f'fill="#111111">{escape(m.label)}</text>'
            )

    ly = mt + 8
    for k, c in enumerate(curves):
        if not c.label:
            continue
        color = c.color or PALETTE[k % len(PALETTE)]
        parts.append(
            f'<line x1="{ml + pw + 12}" y1="{ly:.1f}" x2="{ml + pw + 34}" '
            f'y2="{ly:.1f}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{ml + pw + 40}" y="{ly + 4:.1f}" font-size="11" '
            f'fill="#111111">{escape(c.label)}</text>'
        )
        ly += 17

    parts.append("</svg>")
    return "\n".join(parts)
