"""Loop-style kernel implementations.

Everything here sticks to the numpy-plus-scalars subset that numba's
nopython mode accepts; `_numba.py` wraps these with @njit while
`_numpy.py` swaps the hot ones for vectorized equivalents. The arithmetic
order must stay in sync with `_numpy.py`: integer kernels are required to
be bit-identical across backends, float kernels match elementwise except
where a true reduction is unavoidable (optical flow, NCC).
"""

import numpy as np


def adaptive_threshold(gray, block, c, bright):
    """Local-mean threshold via an integral image.

    Window is block x block clamped at the borders. All comparisons are
    exact integer arithmetic: bright keeps pixels with
    (p - c) * area > window_sum, dark keeps (p + c) * area < window_sum.
    """
    h, w = gray.shape
    sat = np.zeros((h + 1, w + 1), np.int64)
    for y in range(h):
        row = 0
        for x in range(w):
            row += gray[y, x]
            sat[y + 1, x + 1] = sat[y, x + 1] + row
    half = block // 2
    out = np.zeros((h, w), np.uint8)
    for y in range(h):
        y0 = y - half
        y1 = y + half
        if y0 < 0:
            y0 = 0
        if y1 > h - 1:
            y1 = h - 1
        for x in range(w):
            x0 = x - half
            x1 = x + half
            if x0 < 0:
                x0 = 0
            if x1 > w - 1:
                x1 = w - 1
            area = (y1 - y0 + 1) * (x1 - x0 + 1)
            s = sat[y1 + 1, x1 + 1] - sat[y0, x1 + 1] - sat[y1 + 1, x0] + sat[y0, x0]
            p = int(gray[y, x])
            if bright:
                if (p - c) * area > s:
                    out[y, x] = 1
            else:
                if (p + c) * area < s:
                    out[y, x] = 1
    return out


def sep_filter(img, kx, ky):
    """Separable filter with clamp-to-edge borders.

    Horizontal pass with kx, then vertical with ky. Taps accumulate in
    ascending index order into a float64 accumulator; the vectorized
    backend repeats the exact same order so results match bit for bit.
    """
    h, w = img.shape
    nx = kx.shape[0]
    ny = ky.shape[0]
    rx = nx // 2
    ry = ny // 2
    tmp = np.empty((h, w), np.float64)
    out = np.empty((h, w), np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for k in range(nx):
                xx = x + k - rx
                if xx < 0:
                    xx = 0
                elif xx > w - 1:
                    xx = w - 1
                acc += kx[k] * img[y, xx]
            tmp[y, x] = acc
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for k in range(ny):
                yy = y + k - ry
                if yy < 0:
                    yy = 0
                elif yy > h - 1:
                    yy = h - 1
                acc += ky[k] * tmp[yy, x]
            out[y, x] = acc
    return out


def bilinear_resize(img, oh, ow):
    """Bilinear resample of a float64 image, pixel-center aligned.

    Identity at equal sizes by construction: src coord = dst coord and the
    fractional parts are exactly zero.
    """
    h, w = img.shape
    ry = h / oh
    rx = w / ow
    out = np.empty((oh, ow), np.float64)
    for y in range(oh):
        sy = (y + 0.5) * ry - 0.5
        if sy < 0.0:
            sy = 0.0
        elif sy > h - 1:
            sy = float(h - 1)
        y0 = int(np.floor(sy))
        fy = sy - y0
        y1 = y0 + 1
        if y1 > h - 1:
            y1 = h - 1
        for x in range(ow):
            sx = (x + 0.5) * rx - 0.5
            if sx < 0.0:
                sx = 0.0
            elif sx > w - 1:
                sx = float(w - 1)
            x0 = int(np.floor(sx))
            fx = sx - x0
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            p00 = img[y0, x0]
            p01 = img[y0, x1]
            p10 = img[y1, x0]
            p11 = img[y1, x1]
            out[y, x] = (1.0 - fy) * ((1.0 - fx) * p00 + fx * p01) + fy * ((1.0 - fx) * p10 + fx * p11)
    return out


def label_components(mask, conn):
    """Connected-component labels, 4- or 8-connectivity.

    Label ids are 1..n in raster order of each component's first pixel,
    which equals ordering by smallest linear index; the run-based
    implementation in `_numpy.py` reproduces the same ids.
    """
    h, w = mask.shape
    labels = np.zeros((h, w), np.int32)
    sy = np.empty(h * w, np.int64)
    sx = np.empty(h * w, np.int64)
    nxt = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x] != 0 and labels[y, x] == 0:
                nxt += 1
                labels[y, x] = nxt
                sy[0] = y
                sx[0] = x
                top = 1
                while top > 0:
                    top -= 1
                    cy = sy[top]
                    cx = sx[top]
                    for k in range(8):
                        if conn == 4 and k >= 4:
                            break
                        if k == 0:
                            ny_, nx_ = cy - 1, cx
                        elif k == 1:
                            ny_, nx_ = cy + 1, cx
                        elif k == 2:
                            ny_, nx_ = cy, cx - 1
                        elif k == 3:
                            ny_, nx_ = cy, cx + 1
                        elif k == 4:
                            ny_, nx_ = cy - 1, cx - 1
                        elif k == 5:
                            ny_, nx_ = cy - 1, cx + 1
                        elif k == 6:
                            ny_, nx_ = cy + 1, cx - 1
                        else:
                            ny_, nx_ = cy + 1, cx + 1
                        if 0 <= ny_ < h and 0 <= nx_ < w:
                            if mask[ny_, nx_] != 0 and labels[ny_, nx_] == 0:
                                labels[ny_, nx_] = nxt
                                sy[top] = ny_
                                sx[top] = nx_
                                top += 1
    return labels


def hough_vote(ys, xs, nx, ny, radii, h, w, ds):
    """Gradient-direction circle voting.

    Each boundary pixel casts one vote per radius bin at p + r*n and
    p - r*n (normal sign is unknown), into a spatially ds-downsampled
    accumulator. Integer increments, so backend order is irrelevant.
    """
    nr = radii.shape[0]
    hc = (h + ds - 1) // ds
    wc = (w + ds - 1) // ds
    acc = np.zeros((nr, hc, wc), np.int32)
    n = ys.shape[0]
    for i in range(n):
        py = float(ys[i])
        px = float(xs[i])
        gx = nx[i]
        gy = ny[i]
        for ri in range(nr):
            r = radii[ri]
            cx = np.floor(px + r * gx + 0.5)
            cy = np.floor(py + r * gy + 0.5)
            if cx >= 0.0 and cx < w and cy >= 0.0 and cy < h:
                acc[ri, int(cy) // ds, int(cx) // ds] += 1
            cx = np.floor(px - r * gx + 0.5)
            cy = np.floor(py - r * gy + 0.5)
            if cx >= 0.0 and cx < w and cy >= 0.0 and cy < h:
                acc[ri, int(cy) // ds, int(cx) // ds] += 1
    return acc


def trace_contour(mask, sy, sx):
    """Moore boundary trace of the component containing (sy, sx).

    (sy, sx) must be the component's topmost-leftmost pixel so the west
    neighbor is guaranteed background. Clockwise neighbor scan (image
    coordinates, y down), Jacob's stopping criterion. Returns the closed
    chain without repeating the start pixel, plus its length.
    """
    h, w = mask.shape
    cap = 4 * (h * w) + 8
    ys = np.empty(cap, np.int64)
    xs = np.empty(cap, np.int64)
    # clockwise ring starting at W: W, NW, N, NE, E, SE, S, SW
    dy8 = np.array([0, -1, -1, -1, 0, 1, 1, 1], np.int64)
    dx8 = np.array([-1, -1, 0, 1, 1, 1, 0, -1], np.int64)
    ys[0] = sy
    xs[0] = sx
    n = 1
    cy = sy
    cx = sx
    back = 0  # direction of the pixel we came from, initially W
    first_move = -1
    while n < cap:
        found = -1
        for j in range(1, 9):
            d = (back + j) % 8
            ty = cy + dy8[d]
            tx = cx + dx8[d]
            if 0 <= ty < h and 0 <= tx < w and mask[ty, tx] != 0:
                found = d
                break
        if found < 0:
            break  # isolated pixel
        if cy == sy and cx == sx:
            if first_move < 0:
                first_move = found
            elif found == first_move:
                break  # about to repeat the opening move: boundary closed
        ys[n] = cy + dy8[found]
        xs[n] = cx + dx8[found]
        cy = ys[n]
        cx = xs[n]
        n += 1
        back = (found + 4) % 8
    if n > 1 and ys[n - 1] == sy and xs[n - 1] == sx:
        n -= 1  # the stop test runs at the start pixel, drop its duplicate
    return ys, xs, n


def lk_level(img_i, img_j, gx, gy, pts, guess, win, iters, min_eig):
    """One pyramid level of iterative Lucas-Kanade flow.

    Template patch and gradients are sampled bilinearly around pts in
    img_i; the match location in img_j starts at guess and is refined a
    fixed number of iterations (fixed count keeps both backends on the
    same op sequence). Status drops to 0 on border exit or a structure
    tensor with min eigenvalue below min_eig.
    """
    h, w = img_i.shape
    n = pts.shape[0]
    r = win // 2
    out = guess.copy()
    status = np.ones(n, np.uint8)
    for i in range(n):
        px = pts[i, 0]
        py = pts[i, 1]
        if px < r or px >= w - r - 1 or py < r or py >= h - r - 1:
            status[i] = 0
            continue
        ipatch = np.empty((win, win), np.float64)
        gxp = np.empty((win, win), np.float64)
        gyp = np.empty((win, win), np.float64)
        a11 = 0.0
        a12 = 0.0
        a22 = 0.0
        for oy in range(win):
            for ox in range(win):
                ux = px + (ox - r)
                uy = py + (oy - r)
                x0 = int(np.floor(ux))
                y0 = int(np.floor(uy))
                fx = ux - x0
                fy = uy - y0
                w00 = (1.0 - fy) * (1.0 - fx)
                w01 = (1.0 - fy) * fx
                w10 = fy * (1.0 - fx)
                w11 = fy * fx
                ipatch[oy, ox] = (w00 * img_i[y0, x0] + w01 * img_i[y0, x0 + 1]
                                  + w10 * img_i[y0 + 1, x0] + w11 * img_i[y0 + 1, x0 + 1])
                gxv = (w00 * gx[y0, x0] + w01 * gx[y0, x0 + 1]
                       + w10 * gx[y0 + 1, x0] + w11 * gx[y0 + 1, x0 + 1])
                gyv = (w00 * gy[y0, x0] + w01 * gy[y0, x0 + 1]
                       + w10 * gy[y0 + 1, x0] + w11 * gy[y0 + 1, x0 + 1])
                gxp[oy, ox] = gxv
                gyp[oy, ox] = gyv
                a11 += gxv * gxv
                a12 += gxv * gyv
                a22 += gyv * gyv
        tr = 0.5 * (a11 + a22)
        det_part = np.sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12)
        if tr - det_part < min_eig:
            status[i] = 0
            continue
        det = a11 * a22 - a12 * a12
        if det <= 1e-12:
            status[i] = 0
            continue
        qx = out[i, 0]
        qy = out[i, 1]
        for it in range(iters):
            if qx < r or qx >= w - r - 1 or qy < r or qy >= h - r - 1:
                status[i] = 0
                break
            b1 = 0.0
            b2 = 0.0
            for oy in range(win):
                for ox in range(win):
                    ux = qx + (ox - r)
                    uy = qy + (oy - r)
                    x0 = int(np.floor(ux))
                    y0 = int(np.floor(uy))
                    fx = ux - x0
                    fy = uy - y0
                    w00 = (1.0 - fy) * (1.0 - fx)
                    w01 = (1.0 - fy) * fx
                    w10 = fy * (1.0 - fx)
                    w11 = fy * fx
                    jv = (w00 * img_j[y0, x0] + w01 * img_j[y0, x0 + 1]
                          + w10 * img_j[y0 + 1, x0] + w11 * img_j[y0 + 1, x0 + 1])
                    diff = ipatch[oy, ox] - jv
                    b1 += gxp[oy, ox] * diff
                    b2 += gyp[oy, ox] * diff
            dx = (a22 * b1 - a12 * b2) / det
            dy = (a11 * b2 - a12 * b1) / det
            qx += dx
            qy += dy
        out[i, 0] = qx
        out[i, 1] = qy
    return out, status


def ncc_patches(img_a, img_b, pa, pb, patch):
    """Normalized cross-correlation of bilinear patches around point pairs.

    Returns one score per pair in [-1, 1]; 0 when either patch is flat or
    a window leaves the image.
    """
    h, w = img_a.shape
    n = pa.shape[0]
    r = patch // 2
    m = patch * patch
    out = np.zeros(n, np.float64)
    for i in range(n):
        ax = pa[i, 0]
        ay = pa[i, 1]
        bx = pb[i, 0]
        by = pb[i, 1]
        if (ax < r or ax >= w - r - 1 or ay < r or ay >= h - r - 1
                or bx < r or bx >= w - r - 1 or by < r or by >= h - r - 1):
            continue
        sa = 0.0
        sb = 0.0
        va = np.empty(m, np.float64)
        vb = np.empty(m, np.float64)
        idx = 0
        for oy in range(patch):
            for ox in range(patch):
                ux = ax + (ox - r)
                uy = ay + (oy - r)
                x0 = int(np.floor(ux))
                y0 = int(np.floor(uy))
                fx = ux - x0
                fy = uy - y0
                av = ((1.0 - fy) * ((1.0 - fx) * img_a[y0, x0] + fx * img_a[y0, x0 + 1])
                      + fy * ((1.0 - fx) * img_a[y0 + 1, x0] + fx * img_a[y0 + 1, x0 + 1]))
                ux = bx + (ox - r)
                uy = by + (oy - r)
                x0 = int(np.floor(ux))
                y0 = int(np.floor(uy))
                fx = ux - x0
                fy = uy - y0
                bv = ((1.0 - fy) * ((1.0 - fx) * img_b[y0, x0] + fx * img_b[y0, x0 + 1])
                      + fy * ((1.0 - fx) * img_b[y0 + 1, x0] + fx * img_b[y0 + 1, x0 + 1]))
                va[idx] = av
                vb[idx] = bv
                sa += av
                sb += bv
                idx += 1
        ma = sa / m
        mb = sb / m
        num = 0.0
        da = 0.0
        db = 0.0
        for k in range(m):
            xa = va[k] - ma
            xb = vb[k] - mb
            num += xa * xb
            da += xa * xa
            db += xb * xb
        if da < 1e-9 or db < 1e-9:
            continue
        out[i] = num / np.sqrt(da * db)
    return out


def render_pad(h, w, aff, geom, levels):
    """Analytic helipad render with 2x2 supersampling.

    aff maps pixel coords to pad-plane meters: gx = a0*u + a1*v + a2,
    gy = a3*u + a4*v + a5. geom = (outer_r, inner_r, bar_w, bar_h, h_w,
    crossbar); levels = (background, pad face, ink). Returns float32
    intensities; quantization is the caller's concern.
    """
    outer_r = geom[0]
    inner_r = geom[1]
    bar_w = geom[2]
    half_h = 0.5 * geom[3]
    half_w = 0.5 * geom[4]
    half_c = 0.5 * geom[5]
    inner_x = half_w - bar_w  # inner edge of the vertical bars
    bg = levels[0]
    face = levels[1]
    ink = levels[2]
    out = np.empty((h, w), np.float32)
    for y in range(h):
        for x in range(w):
            s = 0.0
            for q in range(4):
                if q == 0:
                    u = x - 0.25
                    v = y - 0.25
                elif q == 1:
                    u = x + 0.25
                    v = y - 0.25
                elif q == 2:
                    u = x - 0.25
                    v = y + 0.25
                else:
                    u = x + 0.25
                    v = y + 0.25
                gx = aff[0] * u + aff[1] * v + aff[2]
                gy = aff[3] * u + aff[4] * v + aff[5]
                rr = np.sqrt(gx * gx + gy * gy)
                if rr > outer_r:
                    s += bg
                elif rr >= inner_r:
                    s += ink
                else:
                    ax = abs(gx)
                    ay = abs(gy)
                    if ax <= half_w and ax >= inner_x and ay <= half_h:
                        s += ink
                    elif ax <= inner_x and ay <= half_c:
                        s += ink
                    else:
                        s += face
            out[y, x] = np.float32(s * 0.25)
    return out
