"""Raster primitives: grayscale, thresholding, blur, components, contours,
polygon tools, resize, and PGM I/O.

Conventions used across the package: a gray image is a uint8 array of
shape (H, W); a binary mask is a uint8 array of the same shape with
values in {0, 1}. Points and polygon vertices are (x, y) pairs, x along
columns, y along rows, sub-pixel allowed.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import InvalidInputError, SetupError


def _as_gray(img) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 2 or a.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-D gray image, got shape {a.shape}")
    if a.dtype != np.uint8:
        raise InvalidInputError(f"gray image must be uint8, got {a.dtype}")
    return a


def _as_mask(mask) -> np.ndarray:
    a = np.asarray(mask)
    if a.ndim != 2 or a.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-D mask, got shape {a.shape}")
    return (a != 0).astype(np.uint8)


def to_grayscale(rgb) -> np.ndarray:
    """Luma conversion, round(0.299 R + 0.587 G + 0.114 B).

    A 2-D uint8 input is already gray and is returned unchanged.
    """
    a = np.asarray(rgb)
    if a.size == 0:
        raise InvalidInputError("empty raster")
    if a.ndim == 2:
        return _as_gray(a)
    if a.ndim != 3 or a.shape[2] != 3:
        raise InvalidInputError(f"expected (H, W) or (H, W, 3) raster, got shape {a.shape}")
    f = a.astype(np.float64)
    luma = 0.299 * f[:, :, 0] + 0.587 * f[:, :, 1] + 0.114 * f[:, :, 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def adaptive_threshold(img, block: int, c: int, polarity: str = "bright") -> np.ndarray:
    """Local-mean threshold over a clamped block window (integral image).

    Bright polarity keeps pixels above localMean + c, dark keeps pixels
    below localMean - c. Exact integer comparisons, so the result is
    bit-identical to the naive window-mean definition.
    """
    gray = _as_gray(img)
    if block < 3 or block % 2 == 0:
        raise InvalidInputError(f"block must be odd and >= 3, got {block}")
    if polarity not in ("bright", "dark"):
        raise InvalidInputError(f"polarity must be 'bright' or 'dark', got {polarity!r}")
    return kernels.adaptive_threshold(np.ascontiguousarray(gray), int(block), int(c),
                                      polarity == "bright")


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps, radius ceil(3*sigma), normalized to sum 1."""
    if sigma <= 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def blur_f64(img, sigma: float) -> np.ndarray:
    """Separable Gaussian on float64 data, clamp-to-edge borders."""
    a = np.ascontiguousarray(np.asarray(img, dtype=np.float64))
    k = gaussian_kernel(sigma)
    return kernels.sep_filter(a, k, k)


def gaussian_blur(img, sigma: float) -> np.ndarray:
    """Gaussian blur of a uint8 image, rounded back to uint8."""
    gray = _as_gray(img)
    out = blur_f64(gray, sigma)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def sobel_gradients(img_f64) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed central-difference gradients (Sobel / 8).

    Scaled so a unit-slope ramp yields gradient 1; callers relying on
    direction only are unaffected by the scale.
    """
    a = np.ascontiguousarray(np.asarray(img_f64, dtype=np.float64))
    smooth = np.array([0.25, 0.5, 0.25], np.float64)
    deriv = np.array([-0.5, 0.0, 0.5], np.float64)
    gx = kernels.sep_filter(a, deriv, smooth)
    gy = kernels.sep_filter(a, smooth, deriv)
    return gx, gy


def label_components(mask, connectivity: int = 8) -> np.ndarray:
    """int32 label image; ids 1..n in raster order of first pixel."""
    m = _as_mask(mask)
    if connectivity not in (4, 8):
        raise InvalidInputError(f"connectivity must be 4 or 8, got {connectivity}")
    return kernels.label_components(np.ascontiguousarray(m), int(connectivity))


def largest_component(mask, connectivity: int = 8) -> np.ndarray:
    """Keep only the maximal-pixel-count component; empty mask if no
    foreground (callers treat that as failure). Ties go to the smaller
    label, i.e. the component seen first in raster order."""
    labels = label_components(mask, connectivity)
    n = int(labels.max())
    if n == 0:
        return np.zeros(labels.shape, np.uint8)
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    counts[0] = -1
    best = int(np.argmax(counts))  # argmax returns the first (smallest) label on ties
    return (labels == best).astype(np.uint8)


def resize(img, w: int, h: int, *, binary: bool = False) -> np.ndarray:
    """Bilinear resize. Gray images round back to uint8; binary masks go
    through the gray path and re-threshold at 0.5. Identity at equal size."""
    if w < 1 or h < 1:
        raise InvalidInputError(f"target size must be >= 1, got {w}x{h}")
    if binary:
        m = _as_mask(img)
        out = kernels.bilinear_resize(np.ascontiguousarray(m.astype(np.float64)), int(h), int(w))
        return (out >= 0.5).astype(np.uint8)
    gray = _as_gray(img)
    out = kernels.bilinear_resize(np.ascontiguousarray(gray.astype(np.float64)), int(h), int(w))
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def _polygon_area2(pts: np.ndarray) -> float:
    # twice the signed shoelace area
    x = pts[:, 0]
    y = pts[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def trace_contours(mask) -> list[np.ndarray]:
    """Outer boundary of every component as an (N, 2) array of (x, y)
    pixel coordinates, counter-clockwise (positive shoelace area), one
    polygon per component in raster order."""
    m = np.ascontiguousarray(_as_mask(mask))
    labels = kernels.label_components(m, 8)
    n = int(labels.max())
    out = []
    for lab in range(1, n + 1):
        comp = (labels == lab).astype(np.uint8)
        flat = int(np.argmax(comp))  # first raster pixel = topmost-leftmost
        sy, sx = divmod(flat, comp.shape[1])
        ys, xs, cnt = kernels.trace_contour(comp, sy, sx)
        poly = np.stack([xs[:cnt], ys[:cnt]], axis=1).astype(np.float64)
        if len(poly) >= 3 and _polygon_area2(poly) < 0:
            poly = np.concatenate([poly[:1], poly[1:][::-1]], axis=0)
        out.append(poly)
    return out


def _seg_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-24:
        d = pts - a
        return np.sqrt((d * d).sum(axis=1))
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = pts - proj
    return np.sqrt((d * d).sum(axis=1))


def _dp_keep(pts: np.ndarray, eps: float, keep: np.ndarray, lo: int, hi: int) -> None:
    # iterative Douglas-Peucker over pts[lo..hi]; endpoints always kept
    stack = [(lo, hi)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        seg = pts[i + 1:j]
        d = _seg_distance(seg, pts[i], pts[j])
        k = int(np.argmax(d))
        # split at >= eps so eps=0 keeps exactly collinear vertices too
        if d[k] >= eps:
            mid = i + 1 + k
            keep[mid] = True
            stack.append((i, mid))
            stack.append((mid, j))


def approx_polygon(contour, eps: float) -> np.ndarray:
    """Douglas-Peucker simplification of a closed polygon.

    The polygon is split at vertex 0 and the vertex farthest from it,
    then each half is simplified; removed vertices all lie within eps of
    the result. eps=0 returns the input unchanged.
    """
    pts = np.asarray(contour, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise InvalidInputError("contour must be an (N, 2) array with N >= 3")
    if eps < 0:
        raise InvalidInputError(f"eps must be >= 0, got {eps}")
    d0 = pts - pts[0]
    far = int(np.argmax((d0 * d0).sum(axis=1)))
    if far == 0:
        return pts.copy()  # all vertices coincide
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[far] = True
    _dp_keep(pts, eps, keep, 0, far)
    closed = np.concatenate([pts[far:], pts[:1]], axis=0)
    keep2 = np.zeros(len(closed), dtype=bool)
    _dp_keep(closed, eps, keep2, 0, len(closed) - 1)
    keep[far:] |= keep2[:-1]
    return pts[keep]


def fill_polygon(poly, h: int, w: int) -> np.ndarray:
    """Even-odd scanline rasterization; a pixel is set when its center
    lies inside the polygon. Half-open edge ranges keep shared vertices
    from double-counting."""
    pts = np.asarray(poly, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise InvalidInputError("polygon must be an (N, 2) array with N >= 3")
    mask = np.zeros((h, w), np.uint8)
    x1 = pts[:, 0]
    y1 = pts[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    ymin = max(0, int(math.ceil(float(y1.min()))))
    ymax = min(h - 1, int(math.floor(float(y1.max()))))
    for yr in range(ymin, ymax + 1):
        lo = np.minimum(y1, y2)
        hi = np.maximum(y1, y2)
        hit = (lo <= yr) & (yr < hi)
        if not hit.any():
            continue
        t = (yr - y1[hit]) / (y2[hit] - y1[hit])
        xs = np.sort(x1[hit] + t * (x2[hit] - x1[hit]))
        for i in range(0, len(xs) - 1, 2):
            a = int(math.ceil(xs[i]))
            b = int(math.ceil(xs[i + 1])) - 1
            if b < a:
                continue
            mask[yr, max(0, a):min(w - 1, b) + 1] = 1
    return mask


def otsu_threshold(img) -> int:
    """Otsu's global threshold on a uint8 image. Returns t; foreground is
    conventionally img > t. Ties resolve to the smallest t."""
    gray = _as_gray(img)
    hist = np.bincount(gray.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    levels = np.arange(256, dtype=np.float64)
    cum_n = np.cumsum(hist)
    cum_s = np.cumsum(hist * levels)
    w0 = cum_n[:-1]
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        return 0
    mu0 = np.where(w0 > 0, cum_s[:-1] / np.maximum(w0, 1), 0.0)
    mu1 = np.where(w1 > 0, (cum_s[-1] - cum_s[:-1]) / np.maximum(w1, 1), 0.0)
    between = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    return int(np.argmax(between))


# ---------------------------------------------------------------------------
# image file I/O

def write_pgm(path, img) -> None:
    """Binary PGM (P5), maxval 255, bit-exact round trip."""
    gray = _as_gray(img)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def write_ppm(path, rgb) -> None:
    """Binary PPM (P6), maxval 255, for color annotation overlays."""
    arr = np.asarray(rgb, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"expected an (h, w, 3) array, got shape {arr.shape}")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise InvalidInputError(f"{path}: not a binary PGM (P5) file")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InvalidInputError(f"{path}: truncated PGM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: bad PGM header") from exc
    if maxval != 255 or w < 1 or h < 1:
        raise InvalidInputError(f"{path}: unsupported PGM (need maxval 255, positive size)")
    raw = data[pos:pos + w * h]
    if len(raw) != w * h:
        raise InvalidInputError(f"{path}: PGM pixel data truncated")
    return np.frombuffer(raw, np.uint8).reshape(h, w).copy()


def read_image(path) -> np.ndarray:
    """Read a PGM or (when Pillow is installed) PNG image as uint8 gray."""
    p = str(path)
    if p.lower().endswith(".png"):
        try:
            from PIL import Image
        except ImportError as exc:
            raise SetupError("PNG support requires Pillow (pip install padland[png])") from exc
        with Image.open(p) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        return to_grayscale(arr)
    return read_pgm(p)
