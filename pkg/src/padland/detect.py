"""Circular landing-mark detection and H-mask extraction.

Pipeline: adaptive threshold -> edge normals of the blurred mask ->
gradient-direction circle voting over a coarse accumulator -> least
squares refinement -> duplicate suppression. Each surviving circle is
cropped, rescaled to a fixed 228 x 228 frame, and reduced to a clean
binary letter mask whose 12 labeled corners feed the geometric checks
and, downstream, the servo loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import corners as corners_mod
from . import imgproc, kernels
from .config import RunConfig
from .errors import (AmbiguousGroupingError, AmbiguousOrderError,
                     CornerShortageError, ExtractionError)

MASK_SIDE = 228
MASK_CENTER = (MASK_SIDE - 1) / 2.0  # 113.5
MASK_RADIUS = MASK_SIDE / 2.0        # 114.0

_DS = 2           # coarse accumulator cell size, pixels
_GRAD_EPS = 0.02  # min gradient magnitude of the blurred mask to cast votes
_MAX_PEAKS = 64   # refinement budget before duplicate suppression

_yy, _xx = np.mgrid[0:MASK_SIDE, 0:MASK_SIDE]
_INCIRCLE = (((_xx - MASK_CENTER) ** 2 + (_yy - MASK_CENTER) ** 2)
             <= MASK_RADIUS ** 2).astype(np.uint8)
del _yy, _xx


@dataclass(frozen=True)
class CircleCandidate:
    cx: float
    cy: float
    r: float
    votes: float   # 3x3-summed accumulator mass at the peak
    score: float   # votes normalized by the circumference at the bin radius


@dataclass(frozen=True)
class BBox:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def w(self) -> float:
        return self.x1 - self.x0

    @property
    def h(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def inscribed_circle(self) -> tuple[float, float, float]:
        cx, cy = self.center
        return cx, cy, 0.5 * min(self.w, self.h)

    def scaled(self, s: float) -> "BBox":
        cx, cy = self.center
        hw, hh = 0.5 * self.w * s, 0.5 * self.h * s
        return BBox(cx - hw, cy - hh, cx + hw, cy + hh)

    def shifted(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)


@dataclass(frozen=True)
class ExtractInfo:
    """Geometry linking the 228-frame mask back to full-image pixels."""

    origin_x: int
    origin_y: int
    scale: float  # full-image pixels per mask pixel

    def to_full(self, pts: np.ndarray) -> np.ndarray:
        p = np.asarray(pts, dtype=np.float64)
        out = np.empty_like(p)
        out[..., 0] = self.origin_x + (p[..., 0] + 0.5) * self.scale - 0.5
        out[..., 1] = self.origin_y + (p[..., 1] + 0.5) * self.scale - 0.5
        return out


@dataclass(frozen=True)
class CheckReport:
    center_ratio: float    # outer-diagonal midpoint offset / mask radius
    centroid_ratio: float  # mask centroid offset / mask radius
    area_ratio: float      # mask pixels / incircle area
    diagonals_ok: bool
    centroid_ok: bool
    area_ok: bool

    @property
    def ok(self) -> bool:
        return self.diagonals_ok and self.centroid_ok and self.area_ok


@dataclass(frozen=True)
class HelipadDetection:
    circle: CircleCandidate
    corners: corners_mod.CornerSet  # mask-frame coordinates
    corners_full: np.ndarray        # (12, 2) full-image coordinates
    mask: np.ndarray
    info: ExtractInfo
    checks: CheckReport

    @property
    def bbox(self) -> BBox:
        c = self.circle
        return BBox(c.cx - c.r, c.cy - c.r, c.cx + c.r, c.cy + c.r)


def _box3_sum(acc: np.ndarray) -> np.ndarray:
    p = np.pad(acc, 1)
    out = np.zeros_like(acc)
    for dy in range(3):
        for dx in range(3):
            out += p[dy:dy + acc.shape[0], dx:dx + acc.shape[1]]
    return out


def hough_circles(gray, cfg: RunConfig) -> list[CircleCandidate]:
    """Circle candidates ordered by normalized vote score, best first."""
    img = imgproc.to_grayscale(gray)
    h, w = img.shape
    mask = imgproc.adaptive_threshold(img, cfg["thresh.block"], cfg["thresh.c"],
                                      cfg["thresh.polarity"])
    soft = imgproc.blur_f64(mask.astype(np.float64), cfg["hough.blur_sigma"])
    gx, gy = imgproc.sobel_gradients(soft)
    mag = np.hypot(gx, gy)
    ys, xs = np.nonzero(mag > _GRAD_EPS)
    if ys.size == 0:
        return []
    m = mag[ys, xs]
    nx = gx[ys, xs] / m
    ny = gy[ys, xs] / m

    r_min = float(cfg["hough.r_min"])
    r_max = float(cfg["hough.r_max"])
    r_step = float(cfg["hough.r_step"])
    radii = np.arange(r_min, r_max + 0.5 * r_step, r_step, dtype=np.float64)
    acc = kernels.hough_vote(ys.astype(np.int64), xs.astype(np.int64),
                             nx, ny, radii, h, w, _DS)

    vote_frac = float(cfg["hough.vote_frac"])
    peaks: list[tuple[float, int, int, int]] = []
    for ri, r in enumerate(radii):
        sm = _box3_sum(acc[ri])
        need = vote_frac * 2.0 * math.pi * r
        p = np.pad(sm, 1)
        is_max = np.ones_like(sm, dtype=bool)
        for dy in range(3):
            for dx in range(3):
                if dy == 1 and dx == 1:
                    continue
                is_max &= sm >= p[dy:dy + sm.shape[0], dx:dx + sm.shape[1]]
        cy_idx, cx_idx = np.nonzero(is_max & (sm >= need))
        for cy, cx in zip(cy_idx, cx_idx):
            peaks.append((float(sm[cy, cx]), ri, int(cy), int(cx)))
    if not peaks:
        return []
    peaks.sort(key=lambda t: (-t[0], t[1], t[2], t[3]))
    peaks = peaks[:_MAX_PEAKS]

    cands = []
    for mass, ri, cyc, cxc in peaks:
        r = float(radii[ri])
        cx = cxc * _DS + (_DS - 1) / 2.0
        cy = cyc * _DS + (_DS - 1) / 2.0
        cx, cy, rr = _kasa_refine(xs, ys, cx, cy, r, tol=max(2.0, r_step))
        cands.append(CircleCandidate(cx, cy, rr, votes=mass,
                                     score=mass / (2.0 * math.pi * r)))

    # duplicate suppression in (center, radius) space: concentric rings of
    # clearly different radius are distinct candidates and both survive
    cands.sort(key=lambda c: (-c.score, c.r, c.cy, c.cx))
    kept: list[CircleCandidate] = []
    for c in cands:
        dup = any(math.hypot(c.cx - k.cx, c.cy - k.cy) < r_min / 2.0
                  and abs(c.r - k.r) < r_min / 4.0 for k in kept)
        if not dup:
            kept.append(c)
        if len(kept) >= int(cfg["hough.max_candidates"]):
            break
    return kept


def _kasa_refine(xs, ys, cx, cy, r, tol):
    """Algebraic circle fit on edge pixels within tol of the estimate."""
    d = np.hypot(xs - cx, ys - cy)
    sel = np.abs(d - r) <= tol
    if int(sel.sum()) < 6:
        return cx, cy, r
    x = xs[sel].astype(np.float64)
    y = ys[sel].astype(np.float64)
    a = np.stack([2.0 * x, 2.0 * y, np.ones_like(x)], axis=1)
    b = x * x + y * y
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    fx, fy, c0 = (float(v) for v in sol)
    rr2 = c0 + fx * fx + fy * fy
    if not np.isfinite(rr2) or rr2 <= 1.0:
        return cx, cy, r
    return fx, fy, math.sqrt(rr2)


def extract_h(gray, circle: CircleCandidate, cfg: RunConfig) -> tuple[np.ndarray, ExtractInfo]:
    """Clean binary letter mask in the fixed 228 x 228 frame.

    Crop a square of side 2r about the circle center (edge padding when
    the square leaves the image), rescale, Otsu-threshold for the bright
    class, keep the inscribed circle's interior, take the largest
    component, and re-render it through outline simplification plus a
    soft re-threshold to drop ragged edges.
    """
    img = imgproc.to_grayscale(gray)
    h, w = img.shape
    r = float(circle.r)
    side = int(round(2.0 * r))
    if side < 4:
        raise ExtractionError(f"circle radius {r:.2f} too small to extract")
    ix0 = int(round(circle.cx - r))
    iy0 = int(round(circle.cy - r))
    if ix0 + side <= 0 or iy0 + side <= 0 or ix0 >= w or iy0 >= h:
        raise ExtractionError("circle lies outside the image")
    pad_l = max(0, -ix0)
    pad_t = max(0, -iy0)
    pad_r = max(0, ix0 + side - w)
    pad_b = max(0, iy0 + side - h)
    crop = img[max(0, iy0):min(h, iy0 + side), max(0, ix0):min(w, ix0 + side)]
    if pad_l or pad_t or pad_r or pad_b:
        crop = np.pad(crop, ((pad_t, pad_b), (pad_l, pad_r)), mode="edge")

    patch = imgproc.resize(crop, MASK_SIDE, MASK_SIDE)
    t = imgproc.otsu_threshold(patch)
    bright = ((patch > t).astype(np.uint8)) & _INCIRCLE
    comp = imgproc.largest_component(bright, 8)
    if comp.sum() == 0:
        raise ExtractionError("no bright region inside the circle")
    outline = imgproc.trace_contours(comp)[0]
    if len(outline) < 3:
        raise ExtractionError("degenerate region outline")
    simplified = imgproc.approx_polygon(outline, float(cfg["extract.approx_eps"]))
    if len(simplified) < 3:
        raise ExtractionError("outline collapsed during simplification")
    filled = imgproc.fill_polygon(simplified, MASK_SIDE, MASK_SIDE)
    soft = imgproc.blur_f64(filled.astype(np.float64) * 255.0, float(cfg["extract.blur_sigma"]))
    final = (soft >= 128.0).astype(np.uint8)
    if final.sum() == 0:
        raise ExtractionError("mask vanished after smoothing")
    return final, ExtractInfo(origin_x=ix0, origin_y=iy0, scale=side / float(MASK_SIDE))


def check_diagonals(cs: corners_mod.CornerSet, max_ratio: float) -> tuple[bool, float]:
    """Mean of the outer corners must sit near the frame center: the two
    outer diagonals cross there for the genuine mark."""
    mid = cs.outer.mean(axis=0)
    ratio = float(np.hypot(mid[0] - MASK_CENTER, mid[1] - MASK_CENTER)) / MASK_RADIUS
    return ratio <= max_ratio, ratio


def check_centroid(mask: np.ndarray, max_ratio: float) -> tuple[bool, float]:
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        return False, float("inf")
    ratio = float(np.hypot(xs.mean() - MASK_CENTER, ys.mean() - MASK_CENTER)) / MASK_RADIUS
    return ratio <= max_ratio, ratio


def check_area(mask: np.ndarray, area_min: float, area_max: float) -> tuple[bool, float]:
    ratio = float(mask.sum()) / (math.pi * MASK_RADIUS * MASK_RADIUS)
    return area_min <= ratio <= area_max, ratio


def run_checks(mask: np.ndarray, cs: corners_mod.CornerSet, cfg: RunConfig) -> CheckReport:
    diag_ok, diag_ratio = check_diagonals(cs, float(cfg["checks.max_center_ratio"]))
    cent_ok, cent_ratio = check_centroid(mask, float(cfg["checks.max_center_ratio"]))
    area_ok, area_ratio = check_area(mask, float(cfg["checks.area_min"]),
                                     float(cfg["checks.area_max"]))
    return CheckReport(center_ratio=diag_ratio, centroid_ratio=cent_ratio,
                       area_ratio=area_ratio, diagonals_ok=diag_ok,
                       centroid_ok=cent_ok, area_ok=area_ok)


def _extract_and_verify(img, circle: CircleCandidate, cfg: RunConfig) -> HelipadDetection:
    """Shared tail of the pipeline: mask, corners, checks. Raises
    ExtractionError (or a corner error) on stage failures; returns a
    detection whose checks may still be failing."""
    mask, info = extract_h(img, circle, cfg)
    pts = corners_mod.shi_tomasi(mask.astype(np.float64) * 255.0, n=12,
                                 quality=float(cfg["corners.quality"]),
                                 min_dist=float(cfg["corners.min_dist"]))
    cs = corners_mod.label_corners(pts)
    report = run_checks(mask, cs, cfg)
    return HelipadDetection(circle=circle, corners=cs,
                            corners_full=info.to_full(cs.pts),
                            mask=mask, info=info, checks=report)


def detect_helipad_verbose(gray, cfg: RunConfig) -> tuple[HelipadDetection | None, str]:
    """Best verified detection plus a failure stage for diagnostics:
    'ok', 'checks_failed', 'extraction_failed', or 'no_circles'."""
    img = imgproc.to_grayscale(gray)
    candidates = hough_circles(img, cfg)
    if not candidates:
        return None, "no_circles"
    reached_checks = False
    for cand in candidates:
        try:
            det = _extract_and_verify(img, cand, cfg)
        except (ExtractionError, CornerShortageError,
                AmbiguousGroupingError, AmbiguousOrderError):
            continue
        reached_checks = True
        if det.checks.ok:
            return det, "ok"
    return None, "checks_failed" if reached_checks else "extraction_failed"


def detect_helipad(gray, cfg: RunConfig) -> HelipadDetection | None:
    det, _ = detect_helipad_verbose(gray, cfg)
    return det
