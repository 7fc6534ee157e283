"""Shared fixtures: an analytic landing-pad image builder independent of
the production renderer, plus the hand-derived corner-label table.

All template ratios below are expressed in units of the pad's inner
circle radius. The production geometry (meters) reduces to the same
ratios, so these constants double as an oracle for both the detector and
the simulator's renderer.
"""

import math

import numpy as np
import pytest

from padland.config import RunConfig

# template ratios, inner radius = 1
OUTER = 0.5 / 0.36
HALF_W = 0.475   # outer half-width of the H
HALF_H = 0.55    # half-height of the bars
INNER_X = 0.255  # inner edge of the bars
HALF_C = 0.20    # half-height of the crossbar

# corner-label table for the upright mark, image coordinates (x right,
# y down), units of inner radius; worked out from the ordering rule
GOLDEN_UNIT = np.array([
    [-HALF_W, +HALF_H], [+HALF_W, +HALF_H], [+HALF_W, -HALF_H], [-HALF_W, -HALF_H],
    [-INNER_X, +HALF_H], [+INNER_X, +HALF_H], [+INNER_X, -HALF_H], [-INNER_X, -HALF_H],
    [-INNER_X, +HALF_C], [+INNER_X, +HALF_C], [+INNER_X, -HALF_C], [-INNER_X, -HALF_C],
], dtype=np.float64)

# outline of the letter as a 12-gon (upright, same units)
H_OUTLINE_UNIT = np.array([
    [-HALF_W, -HALF_H], [-INNER_X, -HALF_H], [-INNER_X, -HALF_C],
    [+INNER_X, -HALF_C], [+INNER_X, -HALF_H], [+HALF_W, -HALF_H],
    [+HALF_W, +HALF_H], [+INNER_X, +HALF_H], [+INNER_X, +HALF_C],
    [-INNER_X, +HALF_C], [-INNER_X, +HALF_H], [-HALF_W, +HALF_H],
], dtype=np.float64)


def rot2(theta_deg: float) -> np.ndarray:
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def golden_corners(cx: float, cy: float, r_px: float, theta_deg: float = 0.0) -> np.ndarray:
    """Label-ordered corner positions of a pad drawn by pad_image."""
    return np.array([cx, cy]) + (GOLDEN_UNIT * r_px) @ rot2(theta_deg).T


def pad_image(h: int, w: int, cx: float, cy: float, r_px: float,
              theta_deg: float = 0.0, levels=(90, 40, 230),
              noise_sigma: float = 0.0, seed: int = 0,
              supersample: int = 4) -> np.ndarray:
    """Supersampled analytic render of the circular pad with the letter.

    Pure-numpy point classification, deliberately a different code path
    from the package renderer so it can serve as an oracle for it.
    """
    bg, face, ink = (float(v) for v in levels)
    off = (np.arange(supersample) + 0.5) / supersample - 0.5
    acc = np.zeros((h, w), np.float64)
    rinv = rot2(-theta_deg)
    for oy in off:
        for ox in off:
            xs = (np.arange(w)[None, :] + ox - cx) / r_px
            ys = (np.arange(h)[:, None] + oy - cy) / r_px
            gx = rinv[0, 0] * xs + rinv[0, 1] * ys
            gy = rinv[1, 0] * xs + rinv[1, 1] * ys
            rr = np.hypot(gx, gy)
            ax, ay = np.abs(gx), np.abs(gy)
            in_bar = (ax >= INNER_X) & (ax <= HALF_W) & (ay <= HALF_H)
            in_cross = (ax <= INNER_X) & (ay <= HALF_C)
            val = np.where(rr > OUTER, bg,
                           np.where(rr >= 1.0, ink,
                                    np.where(in_bar | in_cross, ink, face)))
            acc += val
    img = acc / supersample ** 2
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def h_mask(side: int = 228, r_px: float = 114.0, theta_deg: float = 0.0) -> np.ndarray:
    """Binary letter mask in the fixed extraction frame, built by direct
    point classification (no polygon fill, no blur)."""
    c = (side - 1) / 2.0
    xs = (np.arange(side)[None, :] - c) / r_px
    ys = (np.arange(side)[:, None] - c) / r_px
    rinv = rot2(-theta_deg)
    gx = rinv[0, 0] * xs + rinv[0, 1] * ys
    gy = rinv[1, 0] * xs + rinv[1, 1] * ys
    ax, ay = np.abs(gx), np.abs(gy)
    in_bar = (ax >= INNER_X) & (ax <= HALF_W) & (ay <= HALF_H)
    in_cross = (ax <= INNER_X) & (ay <= HALF_C)
    return (in_bar | in_cross).astype(np.uint8)


@pytest.fixture()
def cfg() -> RunConfig:
    return RunConfig()
