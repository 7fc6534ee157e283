"""Release acceptance for the landing stack, one test per criterion.

Every test prints a single ``ACCEPTANCE n: PASS (...)`` line with its
measured numbers once all of its assertions hold, so a full run reads as
a per-criterion scoreboard. The checks are property-based and sized for
a desk machine:

  1  interaction-matrix rows match simulator finite differences
  2  closed-loop landings across seeded scenario sweeps
  3  detector TPR/FPR on a rendered corpus with distractors
  4  corner-label stability across a full rotation sweep
  5  elimination-check numerics on ideal fixtures
  6  tracker box accuracy and speed advantage over a descent
  7  per-frame latency budgets
  8  kernel-vs-oracle equivalences
"""

import math
import time
from itertools import combinations

import numpy as np

from conftest import GOLDEN_UNIT
from padland import corners, detect, imgproc, servo, sim, track
from padland.config import RunConfig
from padland.errors import SetupError


def _report(n: int, detail: str) -> None:
    print(f"ACCEPTANCE {n}: PASS ({detail})")


# ---------------------------------------------------------------- 1 ---

def test_criterion_1_interaction_matrix_gradient_check():
    """Finite-difference feature velocities from the simulator must match
    the stacked interaction rows within 2% for 100 random poses and
    commands with speed at most 0.2, all features at least 20 px inside
    the frame, one-millisecond step."""
    cfg = RunConfig()
    cam = sim.PinholeCamera.from_config(cfg)
    pad = sim.HelipadSpec.from_config(cfg)
    m = servo.mounting_matrix(str(cfg["servo.mounting"]))
    corners_w = pad.corners_world(np.zeros(2))
    rng = np.random.default_rng(7)
    dt = 1e-3
    t0 = time.perf_counter()
    worst = 0.0
    n_done = 0
    while n_done < 100:
        st = sim.QuadState(rng.uniform(-0.6, 0.6), rng.uniform(-0.4, 0.4),
                           rng.uniform(1.2, 3.5), rng.uniform(-math.pi, math.pi))
        uv = np.array([sim.project_point(st, cam, m, pw) for pw in corners_w])
        if not ((uv[:, 0] >= 20) & (uv[:, 0] <= cam.width - 21)
                & (uv[:, 1] >= 20) & (uv[:, 1] <= cam.height - 21)).all():
            continue
        v_cam = rng.normal(size=4)
        v_cam *= rng.uniform(0.02, 0.2) / np.linalg.norm(v_cam)
        v_body = np.empty(4)
        v_body[:3] = m @ v_cam[:3]
        v_body[3] = m[2, 2] * v_cam[3]
        s0 = servo.normalize_points(uv, cam.fx, cam.fy, cam.cx, cam.cy).ravel()
        st1 = sim.step_dynamics(st, v_body, dt)
        uv1 = np.array([sim.project_point(st1, cam, m, pw) for pw in corners_w])
        s1 = servo.normalize_points(uv1, cam.fx, cam.fy, cam.cx, cam.cy).ravel()
        fd = (s1 - s0) / dt
        pred = servo.stack_interaction(s0.reshape(12, 2), st.z) @ v_cam
        worst = max(worst, float(np.linalg.norm(fd - pred) / np.linalg.norm(pred)))
        n_done += 1
    elapsed = time.perf_counter() - t0
    assert worst <= 0.02, f"worst relative error {worst:.5f} exceeds 2%"
    assert elapsed < 10.0, f"gradient check took {elapsed:.1f}s"
    _report(1, f"100 poses, worst rel err {worst:.5f}, {elapsed:.2f}s")


# ---------------------------------------------------------------- 2 ---

def _max_rise(seq):
    """Largest increase of seq over its running minimum."""
    rise, lo = 0.0, seq[0]
    for e in seq[1:]:
        rise = max(rise, e - lo)
        lo = min(lo, e)
    return rise


def _median5(seq):
    return [sorted(seq[max(0, j - 2):j + 3])[len(seq[max(0, j - 2):j + 3]) // 2]
            for j in range(len(seq))]


def test_criterion_2_closed_loop_convergence():
    """20 seeded scenarios (offset up to 1 m, yaw up to 90 deg, altitude
    2..4 m) must produce at least 18 landings, each landing inside the
    2 cm / 2 deg terminal box with a non-increasing error tail."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    n_landed = n_ok = 0
    worst_tail = 0.0
    for i in range(20):
        cfg = RunConfig()
        z = rng.uniform(2.0, 4.0)
        # keep the whole mark in view at spawn: the vertical half-FOV
        # covers a ground radius of about 0.43*z minus the pad extent
        cap = min(1.0, 0.43 * z - 0.5)
        ang = rng.uniform(0, 2 * math.pi)
        rad = cap * math.sqrt(rng.uniform(0, 1.0))
        cfg.set("init.x", rad * math.cos(ang))
        cfg.set("init.y", rad * math.sin(ang))
        cfg.set("init.z", z)
        cfg.set("init.yaw", rng.uniform(-math.pi / 2, math.pi / 2))
        try:
            tr = sim.run_closed_loop(cfg)
        except SetupError:
            continue
        if tr.outcome != "landed":
            continue
        n_landed += 1
        fs = tr.final_state
        yaw_err = math.degrees(abs(math.remainder(fs.yaw, math.pi)))
        errs = [e for e in tr.err_norms if math.isfinite(e)]
        tail = _median5(errs[len(errs) // 2:])
        e0 = tr.e0 or 1.0
        viol = _max_rise(tail) / e0
        worst_tail = max(worst_tail, viol)
        ok = abs(fs.x) <= 0.02 and abs(fs.y) <= 0.02 and yaw_err <= 2.0 and viol <= 0.01
        assert ok, (f"scenario {i}: final ({fs.x:+.4f},{fs.y:+.4f}) "
                    f"yaw {yaw_err:.2f}d tail rise {viol:.4f}*e0")
        n_ok += 1
    elapsed = time.perf_counter() - t0
    assert n_landed >= 18, f"only {n_landed}/20 scenarios landed"
    assert elapsed < 120.0, f"sweep took {elapsed:.1f}s"
    _report(2, f"{n_landed}/20 landed, {n_ok} inside terminal box, "
               f"worst tail rise {worst_tail:.4f}*e0, {elapsed:.1f}s")


# ---------------------------------------------------------------- 3 ---

def _render_positive(rng, cfg_proto):
    """Nadir view of the mark at a random radius (40..150 px), rotation,
    brightness shift and noise level, fully inside the frame."""
    cfg = RunConfig()
    shift = int(rng.integers(-30, 31))
    for key, base in (("pad.bg", 90), ("pad.face", 40), ("pad.ink", 230)):
        cfg.set(key, int(np.clip(base + shift, 0, 255)))
    cam = sim.PinholeCamera.from_config(cfg)
    pad = sim.HelipadSpec.from_config(cfg)
    m = servo.mounting_matrix(str(cfg["servo.mounting"]))
    r_px = rng.uniform(40.0, 150.0)
    z = cam.fx * pad.inner_r / r_px
    cap_px = min(cam.width, cam.height) / 2 - r_px - 10
    lim = max(cap_px, 0.0) * z / cam.fx
    ang = rng.uniform(0, 2 * math.pi)
    off = lim * math.sqrt(rng.uniform(0, 1))
    st = sim.QuadState(off * math.cos(ang), off * math.sin(ang), z,
                       rng.uniform(0, 2 * math.pi))
    return sim.render_view(st, cam, pad, np.zeros(2), m,
                           noise_sigma=rng.uniform(0, 8), rng=rng)


def _render_distractor(rng, kind):
    """Hand-drawn lookalikes: plain circles, bare letters, and ringed
    letters whose ink fraction sits outside the accepted band."""
    h, w = 368, 640
    shift = int(rng.integers(-30, 31))
    bg, face, ink = (int(np.clip(v + shift, 0, 255)) for v in (90, 40, 230))
    r = rng.uniform(45, min(140.0, h / 2 - 20))
    cx = w / 2 + rng.uniform(-40, 40)
    cy = h / 2 + rng.uniform(-20, 20)
    yy, xx = np.mgrid[0:h, 0:w]
    dx, dy = xx - cx, yy - cy
    ang = rng.uniform(0, math.pi)
    u = dx * math.cos(ang) + dy * math.sin(ang)
    v = -dx * math.sin(ang) + dy * math.cos(ang)
    rr = np.hypot(dx, dy)
    img = np.full((h, w), bg, np.uint8)
    if kind != "letter":
        img[rr <= r / 0.72] = ink
        img[rr <= r] = face
    if kind != "circle":
        if kind == "thin_h":
            bw, bh, c_off, cb = 0.10 * r, 0.50 * r, 0.16 * r, 0.18 * r
        elif kind == "fat_h":
            bw, bh, c_off, cb = 0.50 * r, 1.35 * r, 0.42 * r, 1.00 * r
        else:
            bw, bh, c_off, cb = 0.22 * r, 1.10 * r, 0.36 * r, 0.40 * r
        bars = (np.abs(np.abs(u) - c_off) <= bw / 2) & (np.abs(v) <= bh / 2)
        cross = (np.abs(u) <= c_off) & (np.abs(v) <= cb / 2)
        ink_mask = bars | cross
        frac = float(np.mean(ink_mask[rr <= r])) if kind != "letter" else 0.0
        if kind == "fat_h":
            assert frac > 0.45, f"fat letter fixture too small: {frac:.3f}"
        if kind == "thin_h":
            assert frac < 0.15, f"thin letter fixture too big: {frac:.3f}"
        img[ink_mask & (rr <= r)] = ink
        if kind == "letter":
            img[ink_mask] = ink
    noise = rng.normal(0, rng.uniform(0, 8), img.shape)
    return np.clip(img.astype(np.float64) + noise + 0.5, 0, 255).astype(np.uint8)


def test_criterion_3_detection_corpus():
    """TPR at least 0.90 on 50 rendered positives, FPR at most 0.05 on
    50 distractors, and every returned detection has all checks green."""
    cfg = RunConfig()
    rng = np.random.default_rng(11)
    tp = 0
    for _ in range(50):
        det = detect.detect_helipad(_render_positive(rng, cfg), cfg)
        if det is not None:
            assert det.checks.ok
            tp += 1
    fp = 0
    kinds = ["circle"] * 17 + ["letter"] * 17 + ["thin_h"] * 8 + ["fat_h"] * 8
    for kind in kinds:
        det = detect.detect_helipad(_render_distractor(rng, kind), cfg)
        if det is not None:
            assert det.checks.ok
            fp += 1
    assert tp >= 45, f"TPR {tp}/50 below 0.90"
    assert fp <= 2, f"FPR {fp}/50 above 0.05"
    _report(3, f"TPR {tp}/50, FPR {fp}/50")


# ---------------------------------------------------------------- 4 ---

def _shoelace_hull_area(pts):
    """Convex hull area by monotone chain plus shoelace; an independent
    formulation from the production triangle-sum area."""
    pts = sorted(map(tuple, pts))

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and ((out[-1][0] - out[-2][0]) * (p[1] - out[-2][1])
                                     - (out[-1][1] - out[-2][1]) * (p[0] - out[-2][0])) <= 0:
                out.pop()
            out.append(p)
        return out[:-1]

    hull = half(pts) + half(pts[::-1])
    area = 0.0
    for i, (x0, y0) in enumerate(hull):
        x1, y1 = hull[(i + 1) % len(hull)]
        area += x0 * y1 - x1 * y0
    return abs(area) / 2.0


def _oracle_groups(p):
    quads = list(combinations(range(12), 4))
    outer = max(quads, key=lambda q: _shoelace_hull_area(p[list(q)]))
    rest = [i for i in range(12) if i not in outer]
    inner = max(combinations(rest, 4), key=lambda q: _shoelace_hull_area(p[list(q)]))
    center = [i for i in rest if i not in inner]
    return set(outer), set(inner), set(center)


# in-plane angle of each group's first corner off the horizontal; the
# within-group labels flip by two when a rotation pushes the leading
# corner across the atan2 branch cut
_WINDOW_DEG = {
    0: math.degrees(math.atan2(0.55, 0.475)),
    4: math.degrees(math.atan2(0.55, 0.255)),
    8: math.degrees(math.atan2(0.20, 0.255)),
}


def test_criterion_4_label_stability_over_rotation():
    """36 rotations in 10-degree steps: group membership must match the
    exhaustive-subset oracle, and the within-group labels must equal the
    predicted permutation (identity inside each group's angular window,
    the half-turn relabel outside)."""
    rng = np.random.default_rng(3)
    for theta in range(0, 360, 10):
        t = math.radians(theta)
        rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        pts = GOLDEN_UNIT @ rot.T * 100.0 + np.array([320.0, 184.0])
        shuffled = pts[rng.permutation(12)]
        oi, ii, ci = corners.classify_groups(shuffled)
        assert (set(oi), set(ii), set(ci)) == _oracle_groups(shuffled), theta
        labeled = corners.label_corners(shuffled)
        d = np.linalg.norm(labeled.pts[:, None, :] - pts[None, :, :], axis=2)
        perm = d.argmin(axis=1)
        assert d[np.arange(12), perm].max() < 1e-9
        for base in (0, 4, 8):
            grp = perm[base:base + 4]
            assert set(grp) == set(range(base, base + 4)), \
                f"theta={theta}: group at {base} mislabeled as {grp}"
            off = 0 if ((theta + _WINDOW_DEG[base]) % 360.0) < 180.0 else 2
            expect = base + (np.arange(4) + off) % 4
            assert np.array_equal(grp, expect), \
                f"theta={theta} base={base}: got {grp}, predicted {expect}"
    _report(4, "36 rotations, 0 mislabeled groups, permutations as predicted")


# ---------------------------------------------------------------- 5 ---

def _raster_mark(theta_deg=0.0, shift=(0.0, 0.0)):
    """Ideal binary mark raster in mask coordinates, unit inner circle."""
    s, c, r = detect.MASK_SIDE, detect.MASK_CENTER, detect.MASK_RADIUS
    yy, xx = np.mgrid[0:s, 0:s]
    u = (xx - c) / r - shift[0]
    v = (yy - c) / r - shift[1]
    t = math.radians(theta_deg)
    ur = u * math.cos(t) + v * math.sin(t)
    vr = -u * math.sin(t) + v * math.cos(t)
    bars = (np.abs(ur) >= 0.255) & (np.abs(ur) <= 0.475) & (np.abs(vr) <= 0.55)
    cross = (np.abs(ur) <= 0.255) & (np.abs(vr) <= 0.20)
    return (bars | cross).astype(np.uint8)


def _checks_on(mask, cfg):
    pts = corners.shi_tomasi(mask.astype(np.float64) * 255.0, n=12)
    return detect.run_checks(mask, corners.label_corners(pts), cfg)


def test_criterion_5_elimination_check_numerics():
    """Centered fixtures stay under the 0.0825 offset limit, fixtures
    shifted by 10% of the radius fail, and the ideal mark's pixel-count
    area ratio sits inside [0.2, 0.4]."""
    cfg = RunConfig()
    limit = float(cfg["checks.max_center_ratio"])
    assert limit == 0.0825
    for theta in (0.0, 25.0, 70.0, 130.0, 205.0):
        rep = _checks_on(_raster_mark(theta), cfg)
        assert rep.centroid_ratio < limit and rep.center_ratio < limit, theta
        assert rep.ok, theta
    for theta, shift in ((0.0, (0.10, 0.0)), (40.0, (0.0, -0.10)),
                         (115.0, (0.071, 0.071))):
        rep = _checks_on(_raster_mark(theta, shift), cfg)
        assert not rep.centroid_ok, (theta, shift, rep.centroid_ratio)
        assert not rep.diagonals_ok, (theta, shift, rep.center_ratio)
    r = detect.MASK_RADIUS
    ratio = float(_raster_mark().sum()) / (math.pi * r * r)
    assert 0.2 <= ratio <= 0.4, f"template area ratio {ratio:.4f}"
    _report(5, f"centered < {limit}, 10% shifts fail, template ratio {ratio:.4f}")


# ---------------------------------------------------------------- 6 ---

def _iou(box, gt):
    ix = max(0.0, min(box.x1, gt[2]) - max(box.x0, gt[0]))
    iy = max(0.0, min(box.y1, gt[3]) - max(box.y0, gt[1]))
    inter = ix * iy
    union = box.w * box.h + (gt[2] - gt[0]) * (gt[3] - gt[1]) - inter
    return inter / union


def test_criterion_6_tracking_descent_iou_and_speed():
    """200-frame descent with lateral translation and a 1.5x zoom: the
    tracked box overlaps the projected ground-truth box with IoU at
    least 0.5 on every tracked frame, and a tracker step runs at least
    3x faster than full detection on the same footage."""
    cfg = RunConfig()
    cam = sim.PinholeCamera.from_config(cfg)
    pad = sim.HelipadSpec.from_config(cfg)
    m = servo.mounting_matrix(str(cfg["servo.mounting"]))
    rng = np.random.default_rng(77)
    sup = track.LandingSupervisor(cfg)
    n = 200
    ious, t_track, t_det = [], [], []
    for i in range(n):
        f = i / (n - 1)
        st = sim.QuadState(-0.35 + 0.70 * f, 0.25 - 0.45 * f, 2.1 - 0.7 * f, 0.3)
        frame = sim.render_view(st, cam, pad, np.zeros(2), m,
                                noise_sigma=2.0, rng=rng)
        was_tracking = sup.mode == "tracking"
        t0 = time.perf_counter()
        step = sup.step(frame)
        dt = time.perf_counter() - t0
        if was_tracking and step.mode == "tracking":
            t_track.append(dt)
        if step.mode == "tracking" and step.bbox is not None:
            u, v = sim.project_point(st, cam, m, (0.0, 0.0, 0.0))
            r_px = cam.fx * pad.inner_r / st.z
            ious.append(_iou(step.bbox, (u - r_px, v - r_px, u + r_px, v + r_px)))
        if i % 10 == 0:
            t0 = time.perf_counter()
            detect.detect_helipad(frame, cfg)
            t_det.append(time.perf_counter() - t0)
    assert len(ious) >= 150, f"tracked only {len(ious)}/{n} frames"
    assert min(ious) >= 0.5, f"worst IoU {min(ious):.3f}"
    ratio = float(np.median(t_det) / np.median(t_track))
    assert ratio >= 3.0, f"tracker only {ratio:.2f}x faster than detection"
    _report(6, f"{len(ious)} tracked frames, min IoU {min(ious):.3f}, "
               f"tracker {ratio:.1f}x faster")


# ---------------------------------------------------------------- 7 ---

def test_criterion_7_latency_budgets():
    """Median full tracking-mode iteration (track + extract + corners +
    servo) within 33 ms and median detection frame within 100 ms at the
    default 640x368 resolution."""
    cfg = RunConfig()
    cam = sim.PinholeCamera.from_config(cfg)
    pad = sim.HelipadSpec.from_config(cfg)
    m = servo.mounting_matrix(str(cfg["servo.mounting"]))
    s_star = sim.capture_reference(cfg)
    frames = []
    for k in range(40):
        f = k / 39.0
        st = sim.QuadState(0.2 * (1 - f), -0.1 * (1 - f), 2.2 - 0.5 * f,
                           0.3 * (1 - f))
        frames.append((sim.render_view(st, cam, pad, np.zeros(2), m), st.z))
    sup = track.LandingSupervisor(cfg)
    sup.step(frames[0][0])  # initial detection warms caches and the jit
    t_track, t_det = [], []
    for img, z in frames[1:]:
        t0 = time.perf_counter()
        out = sup.step(img)
        if out.ok and out.mode == "tracking":
            servo.ibvs_step(out.corners_full, s_star, z, cfg,
                            cam.fx, cam.fy, cam.cx, cam.cy)
        t_track.append(time.perf_counter() - t0)
        assert out.ok, out.reason
    for img, _ in frames[1::4]:
        t0 = time.perf_counter()
        detect.detect_helipad(img, cfg)
        t_det.append(time.perf_counter() - t0)
    ms_track = 1e3 * float(np.median(t_track))
    ms_det = 1e3 * float(np.median(t_det))
    assert ms_track <= 33.0, f"tracking iteration median {ms_track:.1f} ms"
    assert ms_det <= 100.0, f"detection median {ms_det:.1f} ms"
    _report(7, f"tracking {ms_track:.1f} ms <= 33, detection {ms_det:.1f} ms <= 100")


# ---------------------------------------------------------------- 8 ---

def _naive_adaptive(gray, block, c, bright):
    """Window means by direct summation; the reference definition the
    integral-image kernel must reproduce bit for bit."""
    h, w = gray.shape
    half = block // 2
    g = gray.astype(np.int64)
    out = np.zeros((h, w), np.uint8)
    for y in range(h):
        y0, y1 = max(0, y - half), min(h - 1, y + half)
        for x in range(w):
            x0, x1 = max(0, x - half), min(w - 1, x + half)
            win = g[y0:y1 + 1, x0:x1 + 1]
            s, area, p = int(win.sum()), win.size, int(g[y, x])
            keep = (p - c) * area > s if bright else (p + c) * area < s
            out[y, x] = 1 if keep else 0
    return out


def test_criterion_8_oracle_equivalences():
    """Adaptive threshold bit-exact against naive window means, the
    control law against a dense normal-equation solve, and group
    classification against exhaustive enumeration."""
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (48, 64), dtype=np.uint8)
    for block in (3, 9, 31):
        for pol in ("bright", "dark"):
            got = imgproc.adaptive_threshold(img, block, 5, pol)
            want = _naive_adaptive(img, block, 5, pol == "bright")
            assert np.array_equal(got, want), (block, pol)

    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(4, 16))
        pts = rng.uniform(-0.5, 0.5, (n, 2))
        z = rng.uniform(0.5, 5.0)
        lmat = servo.stack_interaction(pts, z)
        err = rng.normal(0, 0.2, 2 * n)
        lam, mu = rng.uniform(0.2, 2.0), 10 ** rng.uniform(-8, -3)
        v = servo.control_law(lmat, err, lam, mu, 1e9, 1e9)
        ref = -lam * np.linalg.solve(lmat.T @ lmat + mu * np.eye(4), lmat.T @ err)
        worst = max(worst, float(np.max(np.abs(v - ref))))
    assert worst <= 1e-9, f"control-law residual {worst:.3e}"

    for trial in range(40):
        t = rng.uniform(0, 2 * math.pi)
        rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        p = GOLDEN_UNIT @ rot.T * rng.uniform(60, 140) + rng.uniform(100, 400, 2)
        p = p + rng.normal(0, 0.8, p.shape)
        p = p[rng.permutation(12)]
        oi, ii, ci = corners.classify_groups(p)
        assert (set(oi), set(ii), set(ci)) == _oracle_groups(p), trial
    _report(8, f"threshold bit-exact, control residual {worst:.2e}, "
               f"grouping matches enumeration on 40 trials")
