"""Raster annotation helpers: circle outlines, corner markers, digit labels.

Everything draws in place on an (h, w, 3) uint8 canvas so the CLI can
stack overlays on a grayscale frame and write a single PPM.
"""

from __future__ import annotations

import numpy as np

GREEN = (0, 220, 0)
RED = (255, 60, 60)
YELLOW = (255, 220, 0)

# 3x5 digit bitmaps, one string per row. Enough for corner labels 0-11.
_FONT = {
    "0": ("111", "101", "101", "101", "111"),
    "1": ("010", "110", "010", "010", "111"),
    "2": ("111", "001", "111", "100", "111"),
    "3": ("111", "001", "111", "001", "111"),
    "4": ("101", "101", "111", "001", "001"),
    "5": ("111", "100", "111", "001", "111"),
    "6": ("111", "100", "111", "101", "111"),
    "7": ("111", "001", "010", "010", "010"),
    "8": ("111", "101", "111", "101", "111"),
    "9": ("111", "101", "111", "001", "111"),
}


def to_canvas(img) -> np.ndarray:
    """Copy a grayscale or RGB image into an RGB drawing canvas."""
    arr = np.asarray(img, dtype=np.uint8)
    if arr.ndim == 3:
        return arr.copy()
    return np.repeat(arr[:, :, None], 3, axis=2)


def _put(canvas: np.ndarray, xs, ys, color) -> None:
    # all primitives funnel through here so clipping happens exactly once
    xs = np.asarray(xs, dtype=np.int64).ravel()
    ys = np.asarray(ys, dtype=np.int64).ravel()
    h, w = canvas.shape[:2]
    keep = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    canvas[ys[keep], xs[keep]] = color


def draw_circle(canvas, cx: float, cy: float, r: float, color=GREEN,
                thickness: int = 1) -> None:
    """Rasterize a circle outline by dense parametric sampling."""
    if r <= 0:
        return
    n = max(32, int(8.0 * r))
    ang = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    for t in range(thickness):
        rr = r + t - 0.5 * (thickness - 1)
        xs = np.floor(cx + rr * np.cos(ang) + 0.5)
        ys = np.floor(cy + rr * np.sin(ang) + 0.5)
        _put(canvas, xs, ys, color)


def draw_cross(canvas, x: float, y: float, color=RED, size: int = 3) -> None:
    xi, yi = int(round(x)), int(round(y))
    span = np.arange(-size, size + 1)
    _put(canvas, xi + span, np.full_like(span, yi), color)
    _put(canvas, np.full_like(span, xi), yi + span, color)


def draw_box(canvas, x0: float, y0: float, x1: float, y1: float,
             color=GREEN) -> None:
    xa, xb = int(round(min(x0, x1))), int(round(max(x0, x1)))
    ya, yb = int(round(min(y0, y1))), int(round(max(y0, y1)))
    xs = np.arange(xa, xb + 1)
    ys = np.arange(ya, yb + 1)
    _put(canvas, xs, np.full_like(xs, ya), color)
    _put(canvas, xs, np.full_like(xs, yb), color)
    _put(canvas, np.full_like(ys, xa), ys, color)
    _put(canvas, np.full_like(ys, xb), ys, color)


def draw_text(canvas, x: float, y: float, text, color=YELLOW,
              scale: int = 1) -> None:
    """Render decimal digits; (x, y) is the first glyph's top-left corner."""
    ox, oy = int(round(x)), int(round(y))
    for ch in str(text):
        glyph = _FONT.get(ch)
        if glyph is not None:
            bits = np.array([[b == "1" for b in row] for row in glyph])
            rows, cols = np.nonzero(bits)
            for dy in range(scale):
                for dx in range(scale):
                    _put(canvas, ox + cols * scale + dx,
                         oy + rows * scale + dy, color)
        ox += 4 * scale


def annotate_detection(img, det) -> np.ndarray:
    """Overlay the verified circle and the 12 labeled corners on a frame."""
    canvas = to_canvas(img)
    c = det.circle
    draw_circle(canvas, c.cx, c.cy, c.r, GREEN, thickness=2)
    for k, (px, py) in enumerate(det.corners_full):
        draw_cross(canvas, px, py, RED)
        draw_text(canvas, px + 5, py + 3, k, YELLOW)
    return canvas
