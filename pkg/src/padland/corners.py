"""Twelve-point corner model of the letter-H landing mark.

The mark's outline has exactly 12 corners: 4 outer corners of the
bounding shape, 4 inner corners where the side bars end, and 4 corners
of the central crossbar rectangle. Labels follow a fixed convention so a
corner's index identifies the same physical point in every view:

  0-3   outer group
  4-7   inner group
  8-11  center-rectangle group

Within each group the corners run clockwise in image coordinates
(y down) starting from a deterministic edge-length rule, making labels
stable across in-plane rotation up to the mark's 180-degree symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels
from .errors import AmbiguousGroupingError, AmbiguousOrderError, CornerShortageError

# label permutation equivalent to rotating the mark by 180 degrees
ROT180_RELABEL = np.array([2, 3, 0, 1, 6, 7, 4, 5, 10, 11, 8, 9])

_SMOOTH = np.array([0.25, 0.5, 0.25], np.float64)
_DERIV = np.array([-0.5, 0.0, 0.5], np.float64)
_BOX3 = np.ones(3, np.float64)


@dataclass(frozen=True)
class CornerSet:
    """Labeled corner positions, shape (12, 2), (x, y) order."""

    pts: np.ndarray
    centroid: np.ndarray

    @property
    def outer(self) -> np.ndarray:
        return self.pts[0:4]

    @property
    def inner(self) -> np.ndarray:
        return self.pts[4:8]

    @property
    def center_rect(self) -> np.ndarray:
        return self.pts[8:12]

    def rot180(self) -> "CornerSet":
        return CornerSet(self.pts[ROT180_RELABEL], self.centroid)


def shi_tomasi(img, n: int = 12, quality: float = 0.05, min_dist: float = 10.0) -> np.ndarray:
    """Strongest-n corner points by minimum structure-tensor eigenvalue.

    Gradients are smoothed central differences, the tensor is summed over
    a 3x3 window, and candidates above quality * max response are kept
    greedily with Euclidean spacing >= min_dist, ranked by response with
    (y, x) raster order breaking exact ties. Positions get a final
    per-axis quadratic sub-pixel refinement clamped to half a pixel.
    Raises CornerShortageError when fewer than n corners survive.
    """
    a = np.ascontiguousarray(np.asarray(img, dtype=np.float64))
    gx = kernels.sep_filter(a, _DERIV, _SMOOTH)
    gy = kernels.sep_filter(a, _SMOOTH, _DERIV)
    sxx = kernels.sep_filter(gx * gx, _BOX3, _BOX3)
    sxy = kernels.sep_filter(gx * gy, _BOX3, _BOX3)
    syy = kernels.sep_filter(gy * gy, _BOX3, _BOX3)
    half_tr = 0.5 * (sxx + syy)
    resp = half_tr - np.sqrt((0.5 * (sxx - syy)) ** 2 + sxy * sxy)
    rmax = float(resp.max())
    if rmax <= 0.0:
        raise CornerShortageError(f"no corner response in image, needed {n}")
    ys, xs = np.nonzero(resp >= quality * rmax)
    vals = resp[ys, xs]
    order = np.lexsort((xs, ys, -vals))
    ys, xs, vals = ys[order], xs[order], vals[order]

    keep_x: list[float] = []
    keep_y: list[float] = []
    kx = np.empty(0)
    ky = np.empty(0)
    for i in range(len(vals)):
        if len(keep_x) == n:
            break
        x, y = float(xs[i]), float(ys[i])
        if len(keep_x):
            if float(np.min((kx - x) ** 2 + (ky - y) ** 2)) < min_dist * min_dist:
                continue
        keep_x.append(x)
        keep_y.append(y)
        kx = np.asarray(keep_x)
        ky = np.asarray(keep_y)
    if len(keep_x) < n:
        raise CornerShortageError(f"found {len(keep_x)} corners, needed {n}")

    out = np.stack([kx, ky], axis=1)
    h, w = resp.shape
    for i, (x, y) in enumerate(out):
        xi, yi = int(x), int(y)
        if 0 < xi < w - 1:
            d2 = resp[yi, xi - 1] - 2.0 * resp[yi, xi] + resp[yi, xi + 1]
            if d2 < -1e-12:
                out[i, 0] += min(0.5, max(-0.5, 0.5 * (resp[yi, xi - 1] - resp[yi, xi + 1]) / d2))
        if 0 < yi < h - 1:
            d2 = resp[yi - 1, xi] - 2.0 * resp[yi, xi] + resp[yi + 1, xi]
            if d2 < -1e-12:
                out[i, 1] += min(0.5, max(-0.5, 0.5 * (resp[yi - 1, xi] - resp[yi + 1, xi]) / d2))
    return out


def hull_area4(pts: np.ndarray) -> np.ndarray:
    """Convex hull area for each quadruple in pts, shape (..., 4, 2).

    The hull area of four points is half the sum of the four triangle
    areas they span: a convex quadrilateral is covered twice, and with
    one point inside the others' triangle the inner triangles retile it.
    """
    a, b, c, d = (pts[..., i, :] for i in range(4))

    def tri(p, q, r):
        return np.abs((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                      - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    return 0.25 * (tri(a, b, c) + tri(a, b, d) + tri(a, c, d) + tri(b, c, d))


_REL_TIE = 1e-9


def _argmax_unique(areas: np.ndarray, what: str) -> int:
    order = np.argsort(-areas, kind="stable")
    best = int(order[0])
    if len(order) > 1:
        a0, a1 = float(areas[order[0]]), float(areas[order[1]])
        if a0 - a1 <= _REL_TIE * max(a0, 1e-12):
            raise AmbiguousGroupingError(
                f"{what} group is ambiguous: hull areas {a0:.12g} and {a1:.12g} tie")
    return best


def classify_groups(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split 12 corners into (outer, inner, center) index arrays.

    The outer group is the 4-subset with the largest convex hull; the
    inner group is the largest hull among the remaining 8; the center
    rectangle is whatever is left. A relative tie below 1e-9 between the
    best and second-best hull areas raises AmbiguousGroupingError.
    """
    p = np.asarray(pts, dtype=np.float64)
    if p.shape != (12, 2):
        raise AmbiguousGroupingError(f"expected 12 corner points, got shape {p.shape}")
    quads = np.array(list(combinations(range(12), 4)))
    outer_idx = quads[_argmax_unique(hull_area4(p[quads]), "outer")]
    rest = np.setdiff1d(np.arange(12), outer_idx)
    quads8 = rest[np.array(list(combinations(range(8), 4)))]
    inner_idx = quads8[_argmax_unique(hull_area4(p[quads8]), "inner")]
    center_idx = np.setdiff1d(rest, inner_idx)
    return outer_idx, inner_idx, center_idx


def order_group(pts4: np.ndarray, centroid: np.ndarray, invert: bool = False) -> np.ndarray:
    """Canonical cyclic order for one 4-corner group.

    Points are sorted by descending atan2 angle about the centroid
    (clockwise for y-down images), then the start is normalized: when the
    first edge p0-p1 is longer than the closing edge p0-p3 the cycle is
    shifted right by one so the short edge leads. invert=True flips the
    comparison, used for the center rectangle whose long side is rotated
    90 degrees relative to the other groups. Angle ties within 1e-9 rad
    raise AmbiguousOrderError.
    """
    p = np.asarray(pts4, dtype=np.float64)
    ang = np.arctan2(p[:, 1] - centroid[1], p[:, 0] - centroid[0])
    order = np.argsort(-ang, kind="stable")
    sa = ang[order]
    if np.any(-np.diff(sa) <= 1e-9):
        raise AmbiguousOrderError("corner angles about the centroid are not distinct")
    p = p[order]
    d01 = float(np.hypot(*(p[0] - p[1])))
    d03 = float(np.hypot(*(p[0] - p[3])))
    shift = (d01 < d03) if invert else (d01 > d03)
    if shift:
        p = p[[3, 0, 1, 2]]
    return p


def label_corners(pts: np.ndarray) -> CornerSet:
    """Full labeling: classify into groups, order each, stack 0..11."""
    p = np.asarray(pts, dtype=np.float64)
    centroid = p.mean(axis=0)
    outer_idx, inner_idx, center_idx = classify_groups(p)
    ordered = np.concatenate([
        order_group(p[outer_idx], centroid),
        order_group(p[inner_idx], centroid),
        order_group(p[center_idx], centroid, invert=True),
    ])
    return CornerSet(pts=ordered, centroid=centroid)
