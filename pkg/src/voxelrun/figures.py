"""Deterministic figure output: binary PGM images and SVG line plots.

Neither format embeds timestamps, so identical inputs produce
byte-identical files.
"""

import math
from xml.sax.saxutils import escape

import numpy as np

from ._fileio import atomic_write

SVG_WIDTH = 800
SVG_HEIGHT = 600
_MARGIN = 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def slice_mosaic(vol, cols):
    """Tile the axial slices of a 3D volume into a 2D grid.

    Slice ``k`` goes to cell ``(k // cols, k % cols)``; each cell is the
    slice transposed so rows run along j and columns along i. Empty
    trailing cells are zero.
    """
    if cols < 1:
        raise ValueError("cols must be at least 1")
    vol = np.asarray(vol, dtype=np.float64)
    if vol.ndim == 4:
        vol = vol[..., 0]
    ni, nj, nk = vol.shape
    rows = int(math.ceil(nk / cols))
    out = np.zeros((rows * nj, cols * ni))
    for k in range(nk):
        r, c = divmod(k, cols)
        out[r * nj:(r + 1) * nj, c * ni:(c + 1) * ni] = vol[:, :, k].T
    return out


def pgm_bytes(matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("PGM needs a 2D matrix")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("PGM values must be finite")
    lo, hi = matrix.min(), matrix.max()
    if hi > lo:
        pixels = np.rint((matrix - lo) / (hi - lo) * 255.0)
    else:
        pixels = np.zeros_like(matrix)
    height, width = matrix.shape
    head = f"P5\n{width} {height}\n255\n".encode("ascii")
    return head + pixels.astype(np.uint8).tobytes()


def write_pgm(matrix, path):
    """Write a min-max scaled 8-bit binary PGM."""
    atomic_write(path, pgm_bytes(matrix))


def _fmt(v):
    return f"{v:.2f}".rstrip("0").rstrip(".")


def svg_lines(series, markers=(), hlines=(), title=""):
    """Render line series, circle markers and dashed horizontal lines as SVG text.

    ``series`` is a list of y-vectors plotted against their index.
    ``markers`` is a list of ``(x, y)`` points; ``hlines`` a list of y values.
    """
    series = [np.asarray(s, dtype=np.float64) for s in series]
    ys = [v for s in series for v in s] + [y for _, y in markers] + list(hlines)
    xs_max = max([len(s) - 1 for s in series] + [x for x, _ in markers] + [1])
    y_lo = min(ys) if ys else 0.0
    y_hi = max(ys) if ys else 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    plot_w = SVG_WIDTH - 2 * _MARGIN
    plot_h = SVG_HEIGHT - 2 * _MARGIN

    def px(x):
        return _MARGIN + plot_w * x / xs_max

    def py(y):
        return SVG_HEIGHT - _MARGIN - plot_h * (y - y_lo) / (y_hi - y_lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{SVG_WIDTH // 2}" y="{_MARGIN // 2}" '
                   f'text-anchor="middle" font-family="sans-serif">{escape(title)}</text>')
    out.append(f'<text x="{_MARGIN - 5}" y="{_fmt(py(y_hi))}" text-anchor="end" '
               f'font-size="10">{y_hi:.4g}</text>')
    out.append(f'<text x="{_MARGIN - 5}" y="{_fmt(py(y_lo))}" text-anchor="end" '
               f'font-size="10">{y_lo:.4g}</text>')
    for n, s in enumerate(series):
        pts = " ".join(f"{_fmt(px(i))},{_fmt(py(v))}" for i, v in enumerate(s))
        out.append(f'<polyline fill="none" stroke="{_COLORS[n % len(_COLORS)]}" '
                   f'stroke-width="1.5" points="{pts}"/>')
    for y in hlines:
        out.append(f'<line x1="{_MARGIN}" y1="{_fmt(py(y))}" x2="{SVG_WIDTH - _MARGIN}" '
                   f'y2="{_fmt(py(y))}" stroke="gray" stroke-dasharray="6,4"/>')
    for x, y in markers:
        out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="5" '
                   'fill="none" stroke="red" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg_lines(series, markers, hlines, path, title=""):
    atomic_write(path, svg_lines(series, markers, hlines, title).encode("utf-8"))
