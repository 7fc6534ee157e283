"""Pure-numpy kernel fallbacks.

Vectorized equivalents of the loop kernels. Integer kernels reproduce the
loop results bit for bit (same operations, order-independent integer
adds); float kernels reuse the identical per-element expression trees, so
only the reductions inside lk_level / ncc_patches can differ in the last
ulp (pairwise vs sequential summation).
"""

import numpy as np

from ._loops import trace_contour  # sequential by nature; boundary chains are short

__all__ = [
    "adaptive_threshold", "sep_filter", "bilinear_resize", "label_components",
    "hough_vote", "trace_contour", "lk_level", "ncc_patches", "render_pad",
]


def adaptive_threshold(gray, block, c, bright):
    h, w = gray.shape
    sat = np.zeros((h + 1, w + 1), np.int64)
    sat[1:, 1:] = gray.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    half = block // 2
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - half, 0, h - 1)
    y1 = np.clip(ys + half, 0, h - 1)
    x0 = np.clip(xs - half, 0, w - 1)
    x1 = np.clip(xs + half, 0, w - 1)
    area = (y1 - y0 + 1)[:, None] * (x1 - x0 + 1)[None, :]
    s = (sat[np.ix_(y1 + 1, x1 + 1)] - sat[np.ix_(y0, x1 + 1)]
         - sat[np.ix_(y1 + 1, x0)] + sat[np.ix_(y0, x0)])
    p = gray.astype(np.int64)
    if bright:
        m = (p - c) * area > s
    else:
        m = (p + c) * area < s
    return m.astype(np.uint8)


def sep_filter(img, kx, ky):
    h, w = img.shape
    rx = kx.shape[0] // 2
    ry = ky.shape[0] // 2
    padded = np.pad(img, ((0, 0), (rx, rx)), mode="edge")
    tmp = np.zeros((h, w), np.float64)
    for k in range(kx.shape[0]):
        tmp += kx[k] * padded[:, k:k + w]
    padded = np.pad(tmp, ((ry, ry), (0, 0)), mode="edge")
    out = np.zeros((h, w), np.float64)
    for k in range(ky.shape[0]):
        out += ky[k] * padded[k:k + h, :]
    return out


def bilinear_resize(img, oh, ow):
    h, w = img.shape
    ry = h / oh
    rx = w / ow
    sy = np.minimum(np.maximum((np.arange(oh) + 0.5) * ry - 0.5, 0.0), float(h - 1))
    sx = np.minimum(np.maximum((np.arange(ow) + 0.5) * rx - 0.5, 0.0), float(w - 1))
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    p00 = img[np.ix_(y0, x0)]
    p01 = img[np.ix_(y0, x1)]
    p10 = img[np.ix_(y1, x0)]
    p11 = img[np.ix_(y1, x1)]
    return (1.0 - fy) * ((1.0 - fx) * p00 + fx * p01) + fy * ((1.0 - fx) * p10 + fx * p11)


def label_components(mask, conn):
    # Row-run extraction + union-find; final ids are 1..n ordered by each
    # component's smallest linear pixel index, matching the BFS kernel.
    h, w = mask.shape
    labels = np.zeros((h, w), np.int32)
    parent = []

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    runs = []  # (y, lo, hi_exclusive, uf_id)
    prev_runs = []
    for y in range(h):
        m = mask[y] != 0
        if not m.any():
            prev_runs = []
            continue
        d = np.diff(m.astype(np.int8))
        starts = np.flatnonzero(d == 1) + 1
        ends = np.flatnonzero(d == -1) + 1
        if m[0]:
            starts = np.concatenate(([0], starts))
        if m[-1]:
            ends = np.concatenate((ends, [w]))
        cur_runs = []
        for lo, hi in zip(starts.tolist(), ends.tolist()):
            uid = len(parent)
            parent.append(uid)
            if conn == 8:
                reach_lo, reach_hi = lo - 1, hi + 1
            else:
                reach_lo, reach_hi = lo, hi
            for (plo, phi, pid) in prev_runs:
                if plo < reach_hi and phi > reach_lo:
                    ra = find(uid)
                    rb = find(pid)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
            runs.append((y, lo, hi, uid))
            cur_runs.append((lo, hi, uid))
        prev_runs = cur_runs
    if not runs:
        return labels
    first_px = {}
    for (y, lo, hi, uid) in runs:
        root = find(uid)
        idx = y * w + lo
        if root not in first_px or idx < first_px[root]:
            first_px[root] = idx
    order = sorted(first_px, key=lambda r: first_px[r])
    relabel = {root: i + 1 for i, root in enumerate(order)}
    for (y, lo, hi, uid) in runs:
        labels[y, lo:hi] = relabel[find(uid)]
    return labels


def hough_vote(ys, xs, nx, ny, radii, h, w, ds):
    nr = radii.shape[0]
    hc = (h + ds - 1) // ds
    wc = (w + ds - 1) // ds
    acc = np.zeros((nr, hc, wc), np.int32)
    n = ys.shape[0]
    if n == 0 or nr == 0:
        return acc
    px = xs.astype(np.float64)[:, None]
    py = ys.astype(np.float64)[:, None]
    gx = nx[:, None]
    gy = ny[:, None]
    r = radii[None, :]
    ri = np.broadcast_to(np.arange(nr)[None, :], (n, nr))
    for sign in (1.0, -1.0):
        cx = np.floor(px + sign * (r * gx) + 0.5)
        cy = np.floor(py + sign * (r * gy) + 0.5)
        ok = (cx >= 0.0) & (cx < w) & (cy >= 0.0) & (cy < h)
        icx = cx[ok].astype(np.int64) // ds
        icy = cy[ok].astype(np.int64) // ds
        np.add.at(acc, (ri[ok], icy, icx), 1)
    return acc


def _gather_bilinear(img, ux, uy, w, h):
    # weights/taps written exactly like the loop kernel
    x0 = np.clip(np.floor(ux).astype(np.int64), 0, w - 2)
    y0 = np.clip(np.floor(uy).astype(np.int64), 0, h - 2)
    fx = ux - x0
    fy = uy - y0
    w00 = (1.0 - fy) * (1.0 - fx)
    w01 = (1.0 - fy) * fx
    w10 = fy * (1.0 - fx)
    w11 = fy * fx
    return (w00 * img[y0, x0] + w01 * img[y0, x0 + 1]
            + w10 * img[y0 + 1, x0] + w11 * img[y0 + 1, x0 + 1])


def lk_level(img_i, img_j, gx, gy, pts, guess, win, iters, min_eig):
    h, w = img_i.shape
    n = pts.shape[0]
    r = win // 2
    out = guess.copy()
    status = np.ones(n, np.uint8)
    if n == 0:
        return out, status
    px = pts[:, 0]
    py = pts[:, 1]
    dead = (px < r) | (px >= w - r - 1) | (py < r) | (py >= h - r - 1)
    status[dead] = 0
    offs = (np.arange(win) - r).astype(np.float64)
    ux = px[:, None, None] + offs[None, None, :]
    uy = py[:, None, None] + offs[None, :, None]
    ipatch = _gather_bilinear(img_i, ux, uy, w, h)
    gxp = _gather_bilinear(gx, ux, uy, w, h)
    gyp = _gather_bilinear(gy, ux, uy, w, h)
    a11 = np.sum(gxp * gxp, axis=(1, 2))
    a12 = np.sum(gxp * gyp, axis=(1, 2))
    a22 = np.sum(gyp * gyp, axis=(1, 2))
    tr = 0.5 * (a11 + a22)
    dp = np.sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12)
    det = a11 * a22 - a12 * a12
    status[(tr - dp < min_eig) | (det <= 1e-12)] = 0
    det_safe = np.where(det > 1e-12, det, 1.0)
    qx = out[:, 0].copy()
    qy = out[:, 1].copy()
    alive = status == 1
    for _ in range(iters):
        inb = (qx >= r) & (qx < w - r - 1) & (qy >= r) & (qy < h - r - 1)
        status[alive & ~inb] = 0
        alive = alive & inb
        if not alive.any():
            break
        vx = qx[:, None, None] + offs[None, None, :]
        vy = qy[:, None, None] + offs[None, :, None]
        jpatch = _gather_bilinear(img_j, vx, vy, w, h)
        diff = ipatch - jpatch
        b1 = np.sum(gxp * diff, axis=(1, 2))
        b2 = np.sum(gyp * diff, axis=(1, 2))
        ddx = (a22 * b1 - a12 * b2) / det_safe
        ddy = (a11 * b2 - a12 * b1) / det_safe
        qx = np.where(alive, qx + ddx, qx)
        qy = np.where(alive, qy + ddy, qy)
    out[:, 0] = qx
    out[:, 1] = qy
    return out, status


def ncc_patches(img_a, img_b, pa, pb, patch):
    h, w = img_a.shape
    n = pa.shape[0]
    r = patch // 2
    out = np.zeros(n, np.float64)
    if n == 0:
        return out
    ax, ay = pa[:, 0], pa[:, 1]
    bx, by = pb[:, 0], pb[:, 1]
    ok = ~((ax < r) | (ax >= w - r - 1) | (ay < r) | (ay >= h - r - 1)
           | (bx < r) | (bx >= w - r - 1) | (by < r) | (by >= h - r - 1))
    offs = (np.arange(patch) - r).astype(np.float64)
    va = _gather_bilinear(img_a, ax[:, None, None] + offs[None, None, :],
                          ay[:, None, None] + offs[None, :, None], w, h)
    vb = _gather_bilinear(img_b, bx[:, None, None] + offs[None, None, :],
                          by[:, None, None] + offs[None, :, None], w, h)
    m = patch * patch
    ma = va.sum(axis=(1, 2)) / m
    mb = vb.sum(axis=(1, 2)) / m
    da_ = va - ma[:, None, None]
    db_ = vb - mb[:, None, None]
    num = np.sum(da_ * db_, axis=(1, 2))
    da = np.sum(da_ * da_, axis=(1, 2))
    db = np.sum(db_ * db_, axis=(1, 2))
    good = ok & (da >= 1e-9) & (db >= 1e-9)
    denom = np.sqrt(np.where(good, da * db, 1.0))
    out[good] = (num / denom)[good]
    return out


def render_pad(h, w, aff, geom, levels):
    outer_r = geom[0]
    inner_r = geom[1]
    bar_w = geom[2]
    half_h = 0.5 * geom[3]
    half_w = 0.5 * geom[4]
    half_c = 0.5 * geom[5]
    inner_x = half_w - bar_w
    bg, face, ink = levels[0], levels[1], levels[2]
    uu = np.arange(w, dtype=np.float64)[None, :]
    vv = np.arange(h, dtype=np.float64)[:, None]
    acc = np.zeros((h, w), np.float64)
    for dv, du in ((-0.25, -0.25), (-0.25, 0.25), (0.25, -0.25), (0.25, 0.25)):
        u = uu + du
        v = vv + dv
        gx = aff[0] * u + aff[1] * v + aff[2]
        gy = aff[3] * u + aff[4] * v + aff[5]
        rr = np.sqrt(gx * gx + gy * gy)
        ax = np.abs(gx)
        ay = np.abs(gy)
        bars = (ax <= half_w) & (ax >= inner_x) & (ay <= half_h)
        cross = (ax <= inner_x) & (ay <= half_c)
        val = np.where(rr > outer_r, bg,
                       np.where(rr >= inner_r, ink,
                                np.where(bars, ink,
                                         np.where(cross, ink, face))))
        acc += val
    return (acc * 0.25).astype(np.float32)
