"""Minimal SVG output: line plots and heat maps with axes and ticks."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

_W, _H = 640, 420
_M = {"l": 70, "r": 20, "t": 30, "b": 50}
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = mag * min((1, 2, 5, 10), key=lambda m: abs(m * mag - raw))
    return np.arange(np.ceil(lo / step) * step, hi + 0.5 * step, step)


def _fmt(v: float) -> str:
    return f"{v:.3g}"


class _Frame:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle">{escape(xlabel)}</text>',
            f'<text x="16" y="{_H / 2}" text-anchor="middle" transform="rotate(-90 16 {_H / 2})">{escape(ylabel)}</text>',
        ]

    def px(self, x):
        span = (self.x1 - self.x0) or 1.0
        return _M["l"] + (np.asarray(x) - self.x0) / span * (_W - _M["l"] - _M["r"])

    def py(self, y):
        span = (self.y1 - self.y0) or 1.0
        return _H - _M["b"] - (np.asarray(y) - self.y0) / span * (_H - _M["t"] - _M["b"])

    def axes(self, ylog=False):
        l, b = _M["l"], _H - _M["b"]
        r, t = _W - _M["r"], _M["t"]
        self.parts.append(f'<rect x="{l}" y="{t}" width="{r - l}" height="{b - t}" fill="none" stroke="black"/>')
        for v in _ticks(self.x0, self.x1):
            x = float(self.px(v))
            self.parts.append(f'<line x1="{x:.1f}" y1="{b}" x2="{x:.1f}" y2="{b + 5}" stroke="black"/>')
            self.parts.append(f'<text x="{x:.1f}" y="{b + 18}" text-anchor="middle">{_fmt(v)}</text>')
        for v in _ticks(self.y0, self.y1):
            y = float(self.py(v))
            label = f"1e{v:.0f}" if ylog else _fmt(v)
            self.parts.append(f'<line x1="{l - 5}" y1="{y:.1f}" x2="{l}" y2="{y:.1f}" stroke="black"/>')
            self.parts.append(f'<text x="{l - 8}" y="{y + 4:.1f}" text-anchor="end">{label}</text>')

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text("\n".join(self.parts + ["</svg>"]))
        return path


def line_plot(path, series, *, title="", xlabel="", ylabel="", ylog=False, markers=False) -> Path:
    """Write an SVG with one polyline per (x, y, label) entry of ``series``."""
    xs = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys_all = []
    for s in series:
        y = np.asarray(s[1], dtype=float)
        ys_all.append(np.log10(np.maximum(y, 1e-300)) if ylog else y)
    yc = np.concatenate(ys_all)
    yc = yc[np.isfinite(yc)]
    ylo, yhi = float(yc.min()), float(yc.max())
    pad = 0.05 * ((yhi - ylo) or 1.0)
    fr = _Frame((float(xs.min()), float(xs.max())), (ylo - pad, yhi + pad), title, xlabel, ylabel)
    fr.axes(ylog)
    for k, (s, y) in enumerate(zip(series, ys_all)):
        color = _COLORS[k % len(_COLORS)]
        px, py = fr.px(s[0]), fr.py(y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py) if np.isfinite(b))
        if markers:
            fr.parts += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2" fill="{color}"/>'
                         for a, b in zip(px, py) if np.isfinite(b)]
        else:
            fr.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        label = s[2] if len(s) > 2 else ""
        if label:
            yl = _M["t"] + 16 * (k + 1)
            fr.parts.append(f'<text x="{_W - _M["r"] - 8}" y="{yl}" text-anchor="end" fill="{color}">{escape(label)}</text>')
    return fr.save(path)


def heatmap(path, x, y, z, *, title="", xlabel="", ylabel="") -> Path:
    """Write an SVG heat map of z[i, j] over y[i] (rows) and x[j] (columns), z in [0, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
    fr = _Frame((float(x.min()), float(x.max())), (float(y.min()), float(y.max())), title, xlabel, ylabel)

    def edges(v):
        mid = 0.5 * (v[1:] + v[:-1])
        first = v[0] - (mid[0] - v[0]) if v.size > 1 else v[0] - 0.5
        last = v[-1] + (v[-1] - mid[-1]) if v.size > 1 else v[-1] + 0.5
        return np.concatenate(([first], mid, [last]))

    xe, ye = fr.px(edges(x)), fr.py(edges(y))
    for i in range(y.size):
        for j in range(x.size):
            g = int(round(255 * (1.0 - z[i, j])))
            w = abs(xe[j + 1] - xe[j]) + 0.5
            h = abs(ye[i + 1] - ye[i]) + 0.5
            fr.parts.append(f'<rect x="{min(xe[j], xe[j + 1]):.2f}" y="{min(ye[i], ye[i + 1]):.2f}" '
                            f'width="{w:.2f}" height="{h:.2f}" fill="rgb({g},{g},255)"/>')
    fr.axes()
    return fr.save(path)
