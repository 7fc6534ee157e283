"""Median-Flow point tracking and the detect/track supervisor.

The tracker follows a box of grid points between frames with pyramidal
Lucas-Kanade flow, validates each point by forward-backward consistency
and patch correlation, and moves/rescales the box by the median motion.
The supervisor wraps detection and tracking into a two-state loop that
always either emits a verified set of labeled corners or reports that it
is searching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import corners as corners_mod
from . import detect as detect_mod
from . import imgproc, kernels
from .config import RunConfig
from .detect import BBox
from .errors import (AmbiguousGroupingError, AmbiguousOrderError,
                     CornerShortageError, ExtractionError, InvalidInputError)

_PYR_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def build_pyramid(img, levels: int) -> list[np.ndarray]:
    """Gaussian pyramid: blur with the 5-tap binomial kernel, keep every
    second pixel. Level 0 is the input as float64."""
    if levels < 1:
        raise InvalidInputError(f"levels must be >= 1, got {levels}")
    base = np.ascontiguousarray(np.asarray(img, dtype=np.float64))
    pyr = [base]
    for _ in range(levels - 1):
        prev = pyr[-1]
        if min(prev.shape) < 8:
            break
        soft = kernels.sep_filter(prev, _PYR_KERNEL, _PYR_KERNEL)
        pyr.append(np.ascontiguousarray(soft[::2, ::2]))
    return pyr


_GRAD = np.array([-0.5, 0.0, 0.5])
_GRAD_SMOOTH = np.array([0.25, 0.5, 0.25])


class FramePyramid:
    """Pyramid of one frame plus per-level gradients of it.

    The forward and backward flow passes, and consecutive tracker
    updates, all need the same pyramids; building them once per frame
    is the single biggest saving in the tracking loop.
    """

    __slots__ = ("levels", "gx", "gy")

    def __init__(self, img, levels: int):
        self.levels = build_pyramid(img, levels)
        self.gx = [kernels.sep_filter(p, _GRAD, _GRAD_SMOOTH) for p in self.levels]
        self.gy = [kernels.sep_filter(p, _GRAD_SMOOTH, _GRAD) for p in self.levels]


def lk_flow(prev, curr, pts, *, levels: int = 3, win: int = 15,
            iters: int = 8, min_eig: float = 1e-4,
            prev_pyr: FramePyramid | None = None,
            curr_pyr: FramePyramid | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sparse optical flow prev -> curr for (N, 2) points.

    Coarse-to-fine refinement with a fixed iteration count per level.
    Returns (moved points, status) where status 0 marks points that left
    the image or sat on textureless patches. Callers holding prebuilt
    FramePyramids can pass them to skip the per-call rebuild.
    """
    a = np.asarray(prev)
    b = np.asarray(curr)
    if a.shape != b.shape:
        raise InvalidInputError(f"frame shapes differ: {a.shape} vs {b.shape}")
    p = np.ascontiguousarray(np.asarray(pts, dtype=np.float64))
    if p.ndim != 2 or p.shape[1] != 2:
        raise InvalidInputError("pts must be an (N, 2) array")
    if len(p) == 0:
        return p.copy(), np.zeros(0, np.uint8)
    pyr_a = prev_pyr if prev_pyr is not None else FramePyramid(a, levels)
    pyr_b = curr_pyr if curr_pyr is not None else FramePyramid(b, levels)
    top = len(pyr_a.levels) - 1
    guess = p / float(2 ** top)
    status = np.ones(len(p), np.uint8)
    for lev in range(top, -1, -1):
        img_i = pyr_a.levels[lev]
        img_j = pyr_b.levels[lev]
        p_lev = p / float(2 ** lev)
        guess, st = kernels.lk_level(img_i, img_j, pyr_a.gx[lev], pyr_a.gy[lev],
                                     p_lev, np.ascontiguousarray(guess),
                                     win, iters, min_eig)
        status &= st
        if lev > 0:
            guess = guess * 2.0
    return guess, status


@dataclass(frozen=True)
class FlowQuality:
    """Per-update diagnostics of the median-flow estimate."""

    survivors: int
    fb_median: float
    dx: float
    dy: float
    scale: float


def _grid_points(bbox: BBox, n: int) -> np.ndarray:
    fr = (np.arange(n) + 0.5) / n
    gx = bbox.x0 + fr * bbox.w
    gy = bbox.y0 + fr * bbox.h
    xx, yy = np.meshgrid(gx, gy)
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def median_flow_update(prev, curr, bbox: BBox, cfg: RunConfig, *,
                       prev_pyr: FramePyramid | None = None,
                       curr_pyr: FramePyramid | None = None
                       ) -> tuple[BBox, FlowQuality] | None:
    """One Median-Flow step. None signals tracking failure.

    Grid points inside the box are flowed forward and backward; a point
    joins the pool when both flows succeed and its correlation clears the
    floor, and survives when its forward-backward error is at or below
    the pool median. Failure: median error above track.fb_max, or fewer
    than track.min_survivors survivors. The box translates by the median
    displacement and rescales about its center by the median pairwise
    distance ratio.
    """
    a = imgproc.to_grayscale(prev).astype(np.float64)
    b = imgproc.to_grayscale(curr).astype(np.float64)
    if not (np.isfinite(bbox.w) and np.isfinite(bbox.h)) or min(bbox.w, bbox.h) < 4.0:
        return None
    pts = _grid_points(bbox, int(cfg["track.grid"]))
    levels = int(cfg["track.levels"])
    win = int(cfg["track.win"])
    if prev_pyr is None:
        prev_pyr = FramePyramid(a, levels)
    if curr_pyr is None:
        curr_pyr = FramePyramid(b, levels)
    fwd, st_f = lk_flow(a, b, pts, levels=levels, win=win,
                        prev_pyr=prev_pyr, curr_pyr=curr_pyr)
    bwd, st_b = lk_flow(b, a, fwd, levels=levels, win=win,
                        prev_pyr=curr_pyr, curr_pyr=prev_pyr)
    ncc = kernels.ncc_patches(a, b, pts, fwd, int(cfg["track.ncc_patch"]))
    fb = np.hypot(*(pts - bwd).T)
    pool = (st_f == 1) & (st_b == 1) & (ncc >= float(cfg["track.ncc_min"]))
    if not pool.any():
        return None
    fb_med = float(np.median(fb[pool]))
    if fb_med > float(cfg["track.fb_max"]):
        return None
    keep = pool & (fb <= fb_med)
    n_keep = int(keep.sum())
    if n_keep < int(cfg["track.min_survivors"]):
        return None

    p1 = pts[keep]
    p2 = fwd[keep]
    d = p2 - p1
    dx = float(np.median(d[:, 0]))
    dy = float(np.median(d[:, 1]))
    scale = 1.0
    if n_keep >= 2:
        ii, jj = np.triu_indices(n_keep, 1)
        d1 = np.hypot(*(p1[ii] - p1[jj]).T)
        d2 = np.hypot(*(p2[ii] - p2[jj]).T)
        ok = d1 > 1e-9
        if ok.any():
            scale = float(np.median(d2[ok] / d1[ok]))
    if not np.isfinite(scale) or scale <= 0.0:
        return None
    cx, cy = bbox.center
    hw = 0.5 * bbox.w * scale
    hh = 0.5 * bbox.h * scale
    out = BBox(cx + dx - hw, cy + dy - hh, cx + dx + hw, cy + dy + hh)
    if min(out.w, out.h) < 4.0:
        return None
    return out, FlowQuality(survivors=n_keep, fb_median=fb_med, dx=dx, dy=dy, scale=scale)


class MedianFlowTracker:
    """Stateful wrapper: holds the previous frame, its pyramid, and the
    current box, so each frame's pyramid is built exactly once."""

    def __init__(self, frame, bbox: BBox, cfg: RunConfig):
        self._cfg = cfg
        self._prev = imgproc.to_grayscale(frame).copy()
        self._prev_pyr: FramePyramid | None = None
        self.bbox = bbox
        self.quality: FlowQuality | None = None

    def update(self, frame) -> BBox | None:
        cur = imgproc.to_grayscale(frame).copy()
        levels = int(self._cfg["track.levels"])
        if self._prev_pyr is None:
            self._prev_pyr = FramePyramid(self._prev.astype(np.float64), levels)
        cur_pyr = FramePyramid(cur.astype(np.float64), levels)
        res = median_flow_update(self._prev, cur, self.bbox, self._cfg,
                                 prev_pyr=self._prev_pyr, curr_pyr=cur_pyr)
        self._prev = cur
        self._prev_pyr = cur_pyr
        if res is None:
            self.quality = None
            return None
        self.bbox, self.quality = res
        return self.bbox


@dataclass(frozen=True)
class SupervisorStep:
    """Per-frame supervisor outcome. corners_full is None whenever the
    frame produced no verified mark (mode then reports the state the
    supervisor fell back to)."""

    mode: str                        # "detecting" or "tracking" after this frame
    corners_full: np.ndarray | None  # (12, 2) labeled corners, image pixels
    bbox: BBox | None
    mask: np.ndarray | None
    detection: detect_mod.HelipadDetection | None
    reason: str

    @property
    def ok(self) -> bool:
        return self.corners_full is not None


@dataclass
class LandingSupervisor:
    """Two-state detect/track loop.

    Detecting runs the full verified detection each frame. A hit starts
    the tracker on the circle's bounding box. While tracking, the mark is
    re-extracted from the tracked box's inscribed circle each frame and
    only the area check is enforced; tracker failure or an area-check
    failure reverts to detecting immediately, producing no output for
    that frame.
    """

    cfg: RunConfig
    mode: str = "detecting"
    tracker: MedianFlowTracker | None = field(default=None, repr=False)
    frames_tracked: int = 0

    def _revert(self, reason: str) -> SupervisorStep:
        self.mode = "detecting"
        self.tracker = None
        self.frames_tracked = 0
        return SupervisorStep(mode="detecting", corners_full=None, bbox=None,
                              mask=None, detection=None, reason=reason)

    def step(self, frame) -> SupervisorStep:
        gray = imgproc.to_grayscale(frame)
        if self.mode == "tracking":
            assert self.tracker is not None
            redetect = int(self.cfg["track.redetect_every"])
            if redetect > 0 and self.frames_tracked >= redetect:
                return self._detect_step(gray, reason_prefix="redetect")
            bb = self.tracker.update(gray)
            if bb is None:
                return self._revert("lost:flow")
            cx, cy, r = bb.inscribed_circle()
            circle = detect_mod.CircleCandidate(cx, cy, r, 0.0, 0.0)
            try:
                mask, info = detect_mod.extract_h(gray, circle, self.cfg)
                area_ok, _ = detect_mod.check_area(mask, float(self.cfg["checks.area_min"]),
                                                   float(self.cfg["checks.area_max"]))
                if not area_ok:
                    return self._revert("lost:area")
                pts = corners_mod.shi_tomasi(mask.astype(np.float64) * 255.0, n=12,
                                             quality=float(self.cfg["corners.quality"]),
                                             min_dist=float(self.cfg["corners.min_dist"]))
                cs = corners_mod.label_corners(pts)
            except (ExtractionError, CornerShortageError,
                    AmbiguousGroupingError, AmbiguousOrderError):
                return self._revert("lost:extract")
            # Re-anchor the box on the mark's measured center (the mask
            # centroid, exact by the letter's symmetry). Flow updates are
            # relative, so without this their per-frame bias accumulates
            # until the crop walks off the mark. Oversized corrections
            # mean the extraction itself is suspect; skip those.
            mys, mxs = np.nonzero(mask)
            mark_c = info.to_full(np.array([[mxs.mean(), mys.mean()]]))[0]
            dx, dy = mark_c[0] - cx, mark_c[1] - cy
            if np.hypot(dx, dy) <= 0.5 * r:
                bb = bb.shifted(dx, dy)
                self.tracker.bbox = bb
            self.frames_tracked += 1
            return SupervisorStep(mode="tracking", corners_full=info.to_full(cs.pts),
                                  bbox=bb, mask=mask, detection=None, reason="tracked")
        return self._detect_step(gray, reason_prefix="detect")

    def _detect_step(self, gray, reason_prefix: str) -> SupervisorStep:
        det, why = detect_mod.detect_helipad_verbose(gray, self.cfg)
        if det is None:
            self.mode = "detecting"
            self.tracker = None
            self.frames_tracked = 0
            return SupervisorStep(mode="detecting", corners_full=None, bbox=None,
                                  mask=None, detection=None,
                                  reason=f"searching:{why}")
        self.mode = "tracking"
        self.tracker = MedianFlowTracker(gray, det.bbox, self.cfg)
        self.frames_tracked = 0
        return SupervisorStep(mode="tracking", corners_full=det.corners_full,
                              bbox=det.bbox, mask=det.mask, detection=det,
                              reason=f"{reason_prefix}:ok")
