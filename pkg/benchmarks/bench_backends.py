"""Per-kernel timing of the numba backend against the numpy fallback.

Runs every hot kernel on a representative 640x368 workload with both
implementations and prints a table of medians plus the speedup. The
numba functions are called once before timing so compilation does not
pollute the numbers.

Usage: python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import math
import time

import numpy as np

from padland import imgproc, servo, sim
from padland.config import RunConfig
from padland.kernels import HAS_NUMBA, get_backend


def make_workloads():
    """One (name, args) pair per kernel, sized like production frames."""
    cfg = RunConfig()
    cam = sim.PinholeCamera.from_config(cfg)
    pad = sim.HelipadSpec.from_config(cfg)
    m = servo.mounting_matrix(str(cfg["servo.mounting"]))
    st = sim.QuadState(0.2, -0.1, 2.0, 0.3)
    frame = sim.render_view(st, cam, pad, np.zeros(2), m)
    frame_f = np.ascontiguousarray(frame.astype(np.float64))

    taps = imgproc.gaussian_kernel(2.0)

    mask = imgproc.adaptive_threshold(frame, 31, 5, "bright")

    # circle boundary points with outward normals, as the voter sees them
    n_pts = 4000
    ang = np.linspace(0, 2 * math.pi, n_pts, endpoint=False)
    r_true = 120.0
    xs = (320.0 + r_true * np.cos(ang)).astype(np.int64)
    ys = (184.0 + r_true * np.sin(ang)).astype(np.int64)
    nx = np.cos(ang)
    ny = np.sin(ang)
    radii = np.arange(16.0, 171.0, 2.0)

    yy, xx = np.mgrid[0:368, 0:640]
    disk = (np.hypot(xx - 320, yy - 184) <= 140).astype(np.uint8)
    sy, sx = map(int, np.argwhere(disk)[0])

    rng = np.random.default_rng(0)
    tex = imgproc.blur_f64(rng.normal(120, 40, (368, 640)), 3.0)
    tex2 = np.roll(tex, (2, 3), axis=(0, 1)) + rng.normal(0, 0.5, tex.shape)
    tex = np.ascontiguousarray(tex)
    tex2 = np.ascontiguousarray(tex2)
    gx = imgproc.sobel_gradients(tex)[0]
    gy = imgproc.sobel_gradients(tex)[1]
    pts = np.ascontiguousarray(rng.uniform(40, 300, (100, 2)))
    pts2 = pts + rng.normal(0, 1.0, pts.shape)

    b = sim.cam_to_world(st, m)[0:2, 0:2]
    a0 = st.z * b[0, 0] / cam.fx
    a1 = st.z * b[0, 1] / cam.fy
    a3 = st.z * b[1, 0] / cam.fx
    a4 = st.z * b[1, 1] / cam.fy
    aff = np.array([a0, a1, st.x - a0 * cam.cx - a1 * cam.cy,
                    a3, a4, st.y - a3 * cam.cx - a4 * cam.cy])

    return [
        ("adaptive_threshold", (frame, 31, 5, True)),
        ("sep_filter", (frame_f, taps, taps)),
        ("bilinear_resize", (frame_f, 184, 320)),
        ("label_components", (mask, 8)),
        ("hough_vote", (ys, xs, nx, ny, radii, 368, 640, 2)),
        ("trace_contour", (disk, sy, sx)),
        ("lk_level", (tex, tex2, gx, gy, pts, pts.copy(), 15, 8, 1e-4)),
        ("ncc_patches", (tex, tex2, pts, pts2, 7)),
        ("render_pad", (cam.height, cam.width, aff, pad.geom, pad.levels)),
    ]


def time_call(fn, args, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=7,
                    help="timing repetitions per kernel (best is kept)")
    args = ap.parse_args()

    np_backend = get_backend("numpy")
    nb_backend = get_backend("numba") if HAS_NUMBA else None
    if nb_backend is None:
        print("numba is not importable; timing the numpy fallback only")

    rows = []
    for name, work in make_workloads():
        t_np = time_call(getattr(np_backend, name), work, args.repeats)
        if nb_backend is not None:
            fn = getattr(nb_backend, name)
            fn(*work)  # compile outside the timed region
            t_nb = time_call(fn, work, args.repeats)
            rows.append((name, t_np, t_nb, t_np / t_nb))
        else:
            rows.append((name, t_np, None, None))

    print(f"\n{'kernel':<20} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, t_np, t_nb, s in rows:
        if t_nb is None:
            print(f"{name:<20} {1e3 * t_np:>8.2f}ms {'-':>10} {'-':>8}")
        else:
            print(f"{name:<20} {1e3 * t_np:>8.2f}ms {1e3 * t_nb:>8.2f}ms {s:>7.1f}x")


if __name__ == "__main__":
    main()
