"""Standalone SVG line charts with optional uncertainty bands."""

import math
import sys
from dataclasses import dataclass
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .fileio import atomic_write

__all__ = ["Series", "render_chart", "emit_chart"]

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
DASHES = ("", "6,3", "2,2", "8,3,2,3", "1,3", "10,4")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    band: Optional[np.ndarray] = None  # half-width; drawn as y +/- band

    @classmethod
    def from_reps(cls, label, x, samples, z=1.96):
        """Mean across replications (rows) with a z * sd / sqrt(reps) band."""
        s = np.asarray(samples, dtype=float)
        reps = s.shape[0]
        half = z * s.std(axis=0, ddof=1) / np.sqrt(reps) if reps > 1 else np.zeros(s.shape[1])
        return cls(label, np.asarray(x, dtype=float), s.mean(axis=0), half)


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt(v):
    return f"{v:.2f}"


def _tick_label(v):
    return f"{v:.6g}"


def _clean(series):
    out = []
    for s in series:
        x = np.asarray(s.x, dtype=float)
        y = np.asarray(s.y, dtype=float)
        band = None if s.band is None else np.asarray(s.band, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if band is not None:
            ok &= np.isfinite(band)
        dropped = int((~ok).sum())
        if dropped:
            print(f"warning: series {s.label!r}: skipped {dropped} non-finite point(s)", file=sys.stderr)
        out.append(Series(s.label, x[ok], y[ok], None if band is None else band[ok]))
    return out


def render_chart(series, title="", xlabel="", ylabel="", width=720, height=440, hline=None):
    """SVG text for ``series``; ``hline`` draws a dashed reference level."""
    series = _clean(list(series))
    if not series or all(s.x.size == 0 for s in series):
        raise ValueError("nothing to plot")
    xs = np.concatenate([s.x for s in series])
    lows = [s.y - (0 if s.band is None else s.band) for s in series]
    highs = [s.y + (0 if s.band is None else s.band) for s in series]
    ys = np.concatenate(lows + highs + ([np.array([hline])] if hline is not None else []))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = max(abs(y0) * 0.1, 0.5)
        y0, y1 = y0 - pad, y1 + pad
    else:
        pad = 0.05 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad
    ml, mr, mt, mb = 70, 170, 40, 55
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')
    for t in _nice_ticks(y0, y1):
        out.append(f'<line x1="{ml}" y1="{_fmt(py(t))}" x2="{ml + pw}" y2="{_fmt(py(t))}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{ml - 6}" y="{_fmt(py(t) + 4)}" text-anchor="end">{_tick_label(t)}</text>')
    for t in _nice_ticks(x0, x1):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{mt + ph}" x2="{_fmt(px(t))}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{mt + ph + 18}" text-anchor="middle">{_tick_label(t)}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    if hline is not None:
        out.append(f'<line x1="{ml}" y1="{_fmt(py(hline))}" x2="{ml + pw}" y2="{_fmt(py(hline))}" '
                   f'stroke="#555" stroke-dasharray="5,4"/>')
    for i, s in enumerate(series):
        color = COLORS[i % len(COLORS)]
        dash = DASHES[i % len(DASHES)]
        if s.band is not None and s.x.size:
            upper = [f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(s.x, s.y + s.band)]
            lower = [f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(s.x[::-1], (s.y - s.band)[::-1])]
            out.append(f'<polygon class="band" points="{" ".join(upper + lower)}" fill="{color}" '
                       f'fill-opacity="0.18" stroke="none"/>')
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(s.x, s.y))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        if s.x.size == 1:
            out.append(f'<circle cx="{_fmt(px(s.x[0]))}" cy="{_fmt(py(s.y[0]))}" r="3" fill="{color}"/>')
        out.append(f'<polyline class="series" points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="2"{dash_attr}/>')
        ly = mt + 14 + 20 * i
        lx = ml + pw + 14
        out.append(f'<g class="legend"><line x1="{lx}" y1="{ly}" x2="{lx + 26}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"{dash_attr}/><text x="{lx + 32}" y="{ly + 4}">{escape(s.label)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_chart(series, path, **kw):
    """Write :func:`render_chart` output to ``path`` atomically."""
    atomic_write(path, render_chart(series, **kw))
