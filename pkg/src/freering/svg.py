"""
Self-contained SVG figures with inlined data (no plotting library).
"""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

__all__ = ['scatter_svg', 'line_svg']

_W, _H, _PAD = 480, 480, 48


def _fmt(v):
    return f"{v:.2f}"


def _header(w, h, title, meta):
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
             f'height="{h}" viewBox="0 0 {w} {h}">']
    if meta:
        parts.append(f'<metadata>{escape(meta)}</metadata>')
    parts.append(f'<rect width="{w}" height="{h}" fill="white"/>')
    parts.append(f'<text x="{w / 2}" y="20" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13">'
                 f'{escape(title)}</text>')
    return parts


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def scatter_svg(points, circles: Sequence[float] = (), title: str = '',
                meta: str = '', extent: float | None = None) -> str:
    """Complex points in the plane with centred reference circles."""
    z = np.asarray(points, dtype=complex).ravel()
    if extent is None:
        extent = 1.1 * max([float(np.max(np.abs(z))) if z.size else 1.0]
                           + [float(c) for c in circles])
    span = _W - 2 * _PAD
    sx = lambda x: _PAD + (x + extent) / (2 * extent) * span
    sy = lambda y: _PAD + (extent - y) / (2 * extent) * span
    parts = _header(_W, _H, title, meta)
    parts.append(f'<rect x="{_PAD}" y="{_PAD}" width="{span}" '
                 f'height="{span}" fill="none" stroke="black"/>')
    for t in _ticks(-extent, extent):
        parts.append(f'<text x="{_fmt(sx(t))}" y="{_H - _PAD + 16}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="10">{t:.2g}</text>')
        parts.append(f'<text x="{_PAD - 6}" y="{_fmt(sy(t) + 3)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{t:.2g}</text>')
    parts.append('<g fill="steelblue" fill-opacity="0.7">')
    for v in z:
        parts.append(f'<circle cx="{_fmt(sx(v.real))}" '
                     f'cy="{_fmt(sy(v.imag))}" r="1.6"/>')
    parts.append('</g>')
    for c in circles:
        parts.append(f'<circle cx="{_fmt(sx(0))}" cy="{_fmt(sy(0))}" '
                     f'r="{_fmt(c / (2 * extent) * span)}" fill="none" '
                     f'stroke="crimson" stroke-width="1.2">'
                     f'<title>r = {c:.4f}</title></circle>')
    parts.append('</svg>')
    return '\n'.join(parts) + '\n'


def line_svg(x, ys, labels: Sequence[str] = (), title: str = '',
             xlabel: str = '', ylabel: str = '', logx: bool = False,
             logy: bool = False, meta: str = '', markers: bool = False
             ) -> str:
    """One or more curves ``ys[k]`` against ``x``; optional log axes."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(y, dtype=float) for y in
          (ys if isinstance(ys, (list, tuple)) else [ys])]
    tx = np.log10(x) if logx else x
    tys = [np.log10(np.where(y > 0, y, np.nan)) if logy else y for y in ys]
    allv = np.concatenate([t[np.isfinite(t)] for t in tys]) if tys else \
        np.array([0.0, 1.0])
    x0, x1 = float(np.min(tx)), float(np.max(tx))
    y0, y1 = float(np.min(allv)), float(np.max(allv))
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad_y = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad_y, y1 + pad_y
    wspan, hspan = _W - 2 * _PAD, _H - 2 * _PAD
    sx = lambda v: _PAD + (v - x0) / (x1 - x0) * wspan
    sy = lambda v: _PAD + (y1 - v) / (y1 - y0) * hspan
    parts = _header(_W, _H, title, meta)
    parts.append(f'<rect x="{_PAD}" y="{_PAD}" width="{wspan}" '
                 f'height="{hspan}" fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        lab = f"{10**t:.3g}" if logx else f"{t:.3g}"
        parts.append(f'<text x="{_fmt(sx(t))}" y="{_H - _PAD + 16}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="10">{lab}</text>')
    for t in _ticks(y0, y1):
        lab = f"{10**t:.3g}" if logy else f"{t:.3g}"
        parts.append(f'<text x="{_PAD - 6}" y="{_fmt(sy(t) + 3)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{lab}</text>')
    parts.append(f'<text x="{_W / 2}" y="{_H - 8}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11">'
                 f'{escape(xlabel)}</text>')
    parts.append(f'<text x="12" y="{_H / 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11" '
                 f'transform="rotate(-90 12 {_H / 2})">'
                 f'{escape(ylabel)}</text>')
    colours = ('steelblue', 'crimson', 'darkgreen', 'darkorange', 'purple')
    for k, ty in enumerate(tys):
        col = colours[k % len(colours)]
        ok = np.isfinite(ty)
        pts = ' '.join(f"{_fmt(sx(a))},{_fmt(sy(b))}"
                       for a, b in zip(tx[ok], ty[ok]))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" '
                     f'stroke-width="1.5"/>')
        if markers:
            for a, b in zip(tx[ok], ty[ok]):
                parts.append(f'<circle cx="{_fmt(sx(a))}" cy="{_fmt(sy(b))}"'
                             f' r="3" fill="{col}"/>')
        if k < len(labels):
            parts.append(f'<text x="{_W - _PAD - 4}" y="{_PAD + 14 * (k + 1)}"'
                         f' text-anchor="end" font-family="sans-serif" '
                         f'font-size="11" fill="{col}">'
                         f'{escape(labels[k])}</text>')
    parts.append('</svg>')
    return '\n'.join(parts) + '\n'
