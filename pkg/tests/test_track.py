"""Optical flow, Median-Flow box tracking, and the supervisor loop."""

import numpy as np
import pytest

from conftest import golden_corners, pad_image
from padland import track
from padland.config import RunConfig
from padland.detect import BBox
from padland.errors import InvalidInputError


def _texture(h, w, x0=0.0, y0=0.0, zoom=1.0, cx=0.0, cy=0.0):
    """Smooth analytic texture; x0/y0 translate, zoom magnifies about
    (cx, cy). Evaluating the function directly avoids interpolation error
    in the expected flow."""
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    x = cx + (xs - cx) / zoom - x0
    y = cy + (ys - cy) / zoom - y0
    return (110.0 + 35.0 * np.sin(0.21 * x + 0.30 * y)
            + 35.0 * np.sin(-0.17 * x + 0.27 * y + 1.0)
            + 25.0 * np.sin(0.33 * x - 0.11 * y + 2.0))


def test_build_pyramid_shapes_and_constant():
    img = np.full((64, 96), 55.0)
    pyr = track.build_pyramid(img, 3)
    assert [p.shape for p in pyr] == [(64, 96), (32, 48), (16, 24)]
    for p in pyr:
        assert np.allclose(p, 55.0)
    with pytest.raises(InvalidInputError):
        track.build_pyramid(img, 0)
    # tiny images stop subdividing instead of degenerating
    assert len(track.build_pyramid(np.zeros((10, 10)), 5)) == 2


def test_lk_flow_integer_translation():
    a = _texture(120, 140)
    b = _texture(120, 140, x0=3.0, y0=-2.0)
    # 3 pyramid levels with win 15 need a 32 px margin at full resolution
    pts = np.stack(np.meshgrid(np.arange(36.0, 105.0, 17.0),
                               np.arange(36.0, 85.0, 12.0)), -1).reshape(-1, 2)
    moved, st = track.lk_flow(a, b, pts)
    assert st.all()
    d = moved - pts
    assert np.allclose(d[:, 0], 3.0, atol=0.05)
    assert np.allclose(d[:, 1], -2.0, atol=0.05)


def test_lk_flow_subpixel_translation():
    a = _texture(100, 100)
    b = _texture(100, 100, x0=0.6, y0=0.4)
    pts = np.array([[50.0, 50.0], [35.0, 60.0], [64.0, 42.0]])
    moved, st = track.lk_flow(a, b, pts)
    assert st.all()
    assert np.allclose(moved - pts, [0.6, 0.4], atol=0.05)


def test_lk_flow_status_and_validation():
    a = _texture(90, 90)
    b = _texture(90, 90, x0=1.0)
    flat_a = np.full((90, 90), 100.0)
    pts = np.array([[2.0, 45.0], [45.0, 45.0]])
    _, st = track.lk_flow(a, b, pts)
    assert st[0] == 0  # window leaves the image
    _, st = track.lk_flow(flat_a, flat_a, np.array([[45.0, 45.0]]))
    assert st[0] == 0  # textureless
    with pytest.raises(InvalidInputError):
        track.lk_flow(a, b[:50], pts)
    moved, st = track.lk_flow(a, b, np.zeros((0, 2)))
    assert moved.shape == (0, 2) and st.shape == (0,)


def _u8(img):
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def test_median_flow_translation(cfg):
    a = _u8(_texture(180, 220))
    b = _u8(_texture(180, 220, x0=4.0, y0=-3.0))
    bb = BBox(60.0, 50.0, 160.0, 130.0)
    res = track.median_flow_update(a, b, bb, cfg)
    assert res is not None
    out, q = res
    assert q.survivors >= int(cfg["track.min_survivors"])
    assert abs(q.dx - 4.0) < 0.2 and abs(q.dy + 3.0) < 0.2
    assert abs(q.scale - 1.0) < 0.01
    assert out.center[0] == pytest.approx(bb.center[0] + q.dx)
    assert out.center[1] == pytest.approx(bb.center[1] + q.dy)


def test_median_flow_scale(cfg):
    bb = BBox(70.0, 50.0, 150.0, 130.0)
    cx, cy = bb.center
    a = _u8(_texture(180, 220))
    b = _u8(_texture(180, 220, zoom=1.06, cx=cx, cy=cy))
    res = track.median_flow_update(a, b, bb, cfg)
    assert res is not None
    out, q = res
    assert abs(q.scale - 1.06) < 0.02
    assert out.w == pytest.approx(bb.w * q.scale) and out.h == pytest.approx(bb.h * q.scale)
    c2 = out.center
    assert abs(c2[0] - cx) < 0.5 and abs(c2[1] - cy) < 0.5


def test_median_flow_failure_modes(cfg):
    rng = np.random.default_rng(31)
    a = _u8(_texture(140, 140))
    noise = rng.integers(0, 256, (140, 140)).astype(np.uint8)
    bb = BBox(40.0, 40.0, 110.0, 110.0)
    assert track.median_flow_update(a, noise, bb, cfg) is None
    # a box too small to populate with points
    assert track.median_flow_update(a, a, BBox(10, 10, 12, 12), cfg) is None
    # mostly flat scene: too few valid points
    flat = np.full((140, 140), 90, np.uint8)
    flat[68:73, 68:73] = 200
    assert track.median_flow_update(flat, flat, bb, cfg) is None


def test_tracker_follows_cumulative_motion(cfg):
    frames = [_u8(_texture(170, 210, x0=2.5 * k, y0=1.5 * k)) for k in range(5)]
    tr = track.MedianFlowTracker(frames[0], BBox(50, 40, 150, 120), cfg)
    for k in range(1, 5):
        assert tr.update(frames[k]) is not None
    cx, cy = tr.bbox.center
    assert abs(cx - (100.0 + 2.5 * 4)) < 1.0
    assert abs(cy - (80.0 + 1.5 * 4)) < 1.0


def test_supervisor_detect_track_lose_recover(cfg):
    frames = []
    for k in range(4):
        frames.append(pad_image(260, 320, 150.0 + 2.0 * k, 130.0 + 1.0 * k, 70.0,
                                noise_sigma=2.0, seed=40 + k))
    blank = np.full((260, 320), 128, np.uint8)
    sup = track.LandingSupervisor(cfg)

    s0 = sup.step(frames[0])
    assert s0.mode == "tracking" and s0.reason == "detect:ok" and s0.ok
    assert s0.detection is not None
    want0 = golden_corners(150.0, 130.0, 70.0)
    assert np.linalg.norm(s0.corners_full - want0, axis=1).max() <= 3.0

    for k in range(1, 4):
        sk = sup.step(frames[k])
        assert sk.mode == "tracking" and sk.reason == "tracked" and sk.ok
        want = golden_corners(150.0 + 2.0 * k, 130.0 + 1.0 * k, 70.0)
        assert np.linalg.norm(sk.corners_full - want, axis=1).max() <= 3.5

    lost = sup.step(blank)
    assert not lost.ok and lost.mode == "detecting"
    assert lost.reason.startswith("lost:")
    searching = sup.step(blank)
    assert not searching.ok and searching.reason.startswith("searching:")
    back = sup.step(frames[0])
    assert back.ok and back.mode == "tracking" and back.reason == "detect:ok"


def test_supervisor_area_gate_reverts(cfg):
    rng = np.random.default_rng(41)
    img = (rng.normal(0, 6, (220, 220)) + 60.0)
    yy, xx = np.mgrid[0:220, 0:220]
    img = np.where((xx - 110) ** 2 + (yy - 110) ** 2 <= 10 ** 2, 230.0, img)
    img = _u8(img)
    sup = track.LandingSupervisor(cfg)
    sup.mode = "tracking"
    sup.tracker = track.MedianFlowTracker(img, BBox(40.0, 40.0, 180.0, 180.0), cfg)
    out = sup.step(img)  # static frame: flow holds, extraction finds a tiny dot
    assert not out.ok
    assert out.reason == "lost:area"
    assert sup.mode == "detecting" and sup.tracker is None


def test_supervisor_redetect_every(cfg):
    cfg.set("track.redetect_every", 2)
    frames = [pad_image(260, 320, 150.0, 130.0, 70.0, noise_sigma=2.0, seed=50 + k)
              for k in range(5)]
    sup = track.LandingSupervisor(cfg)
    reasons = [sup.step(f).reason for f in frames]
    assert reasons[0] == "detect:ok"
    assert reasons[1] == reasons[2] == "tracked"
    assert reasons[3] == "redetect:ok"
    assert reasons[4] == "tracked"
