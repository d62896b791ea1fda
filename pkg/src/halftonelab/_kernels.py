"""Numba-compiled inner loops.

Three operations in this package are inherently sequential or per-pixel
dense and too slow in pure Python: error diffusion scans, direct binary
search sweeps, and per-pixel counterfactual reward deltas.  They share one
piece of machinery: the exact effect of flipping a single pixel on a
mirror-boundary filtered image.

With whole-sample mirror extension (scipy's ``mirror`` mode), flipping
image pixel a also flips every mirrored copy of a in the virtual padded
plane.  The filtered image changes by a "stamp": for each copy j of a with
|j - q| <= r, position q gains kernel[q - j].  Because the fold map is
1-Lipschitz, all affected positions q satisfy |q - a| <= r, so a stamp
always fits in a (2r+1)^2 buffer centered on a.  Copies per axis are
precomputed once per (length, reach) pair.

All kernels run single-threaded with plain IEEE double arithmetic (no
fastmath) so that incremental results match full recomputation to within
accumulation roundoff.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numba import njit


@lru_cache(maxsize=64)
def mirror_copies(n: int, reach: int) -> tuple[np.ndarray, np.ndarray]:
    """Mirrored copies of each index i of an axis of length n.

    Returns (copies, counts): copies[i, :counts[i]] lists every j in
    [-reach, n-1+reach] with fold(j) == i under whole-sample mirror
    symmetry (period 2n-2; n == 1 maps everything to 0).
    """
    js = np.arange(-reach, n + reach)
    if n == 1:
        folded = np.zeros_like(js)
    else:
        period = 2 * n - 2
        m = np.mod(js, period)
        folded = np.where(m >= n, period - m, m)
    counts = np.bincount(folded, minlength=n)
    copies = np.zeros((n, counts.max()), dtype=np.int64)
    fill = np.zeros(n, dtype=np.int64)
    for j, i in zip(js, folded):
        copies[i, fill[i]] = j
        fill[i] += 1
    counts = counts.astype(np.int64)
    copies.flags.writeable = False
    counts.flags.writeable = False
    return copies, counts


@njit(cache=True)
def _build_stamp(buf, k, r, ay, ax, cy, cyn, cx, cxn, height, width):
    """Fill buf (size (2r+1)^2, centered on (ay, ax)) with the filtered
    response to a unit change at image pixel (ay, ax)."""
    size = 2 * r + 1
    for i in range(size):
        for j in range(size):
            buf[i, j] = 0.0
    for ci in range(cyn[ay]):
        jy = cy[ay, ci]
        for cj in range(cxn[ax]):
            jx = cx[ax, cj]
            for dy in range(-r, r + 1):
                qy = jy + dy
                if qy < 0 or qy >= height:
                    continue
                by = qy - ay + r
                if by < 0 or by >= size:
                    continue
                for dx in range(-r, r + 1):
                    qx = jx + dx
                    if qx < 0 or qx >= width:
                        continue
                    bx = qx - ax + r
                    if bx < 0 or bx >= size:
                        continue
                    buf[by, bx] += k[dy + r, dx + r]


@njit(cache=True)
def _delta_sse(e, buf, d, ay, ax, r):
    """Change of sum(e^2) when e gains d * stamp centered at (ay, ax)."""
    height, width = e.shape
    size = 2 * r + 1
    s = 0.0
    for by in range(size):
        qy = ay + by - r
        if qy < 0 or qy >= height:
            continue
        for bx in range(size):
            qx = ax + bx - r
            if qx < 0 or qx >= width:
                continue
            delta = d * buf[by, bx]
            if delta != 0.0:
                s += delta * (2.0 * e[qy, qx] + delta)
    return s


@njit(cache=True)
def _delta_sse_pair(e, buf_p, dp, py, px, buf_q, dq, qy, qx, r):
    """Change of sum(e^2) for simultaneous stamps at p and q (swap move)."""
    height, width = e.shape
    size = 2 * r + 1
    y0 = min(py, qy) - r
    y1 = max(py, qy) + r
    x0 = min(px, qx) - r
    x1 = max(px, qx) + r
    s = 0.0
    for uy in range(max(y0, 0), min(y1, height - 1) + 1):
        bpy = uy - py + r
        bqy = uy - qy + r
        for ux in range(max(x0, 0), min(x1, width - 1) + 1):
            delta = 0.0
            if 0 <= bpy < size:
                bpx = ux - px + r
                if 0 <= bpx < size:
                    delta += dp * buf_p[bpy, bpx]
            if 0 <= bqy < size:
                bqx = ux - qx + r
                if 0 <= bqx < size:
                    delta += dq * buf_q[bqy, bqx]
            if delta != 0.0:
                s += delta * (2.0 * e[uy, ux] + delta)
    return s


@njit(cache=True)
def _apply_stamp(e, buf, d, ay, ax, r):
    height, width = e.shape
    size = 2 * r + 1
    for by in range(size):
        qy = ay + by - r
        if qy < 0 or qy >= height:
            continue
        for bx in range(size):
            qx = ax + bx - r
            if qx < 0 or qx >= width:
                continue
            e[qy, qx] += d * buf[by, bx]


# ---------------------------------------------------------------------------
# Direct binary search
# ---------------------------------------------------------------------------

_NEIGHBORS = np.array(
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
    dtype=np.int64,
)


@njit(cache=True)
def dbs_sweep(h, e, k, r, cy, cyn, cx, cxn, improve_eps):
    """One raster-order sweep of toggle and 8-neighbor swap moves.

    h (uint8) and e (filtered error, float64) are updated in place.  A move
    is applied only if it lowers sum(e^2) by more than improve_eps.
    Returns the number of accepted moves.
    """
    height, width = h.shape
    size = 2 * r + 1
    buf_p = np.zeros((size, size))
    buf_n = np.zeros((size, size))
    moves = 0
    for py in range(height):
        for px in range(width):
            dp = 1.0 - 2.0 * h[py, px]
            _build_stamp(buf_p, k, r, py, px, cy, cyn, cx, cxn, height, width)
            best = _delta_sse(e, buf_p, dp, py, px, r)
            best_t = -1  # -1 toggle, 0..7 swap neighbor
            for t in range(8):
                qy = py + _NEIGHBORS[t, 0]
                qx = px + _NEIGHBORS[t, 1]
                if qy < 0 or qy >= height or qx < 0 or qx >= width:
                    continue
                if h[qy, qx] == h[py, px]:
                    continue
                _build_stamp(buf_n, k, r, qy, qx, cy, cyn, cx, cxn,
                             height, width)
                d = _delta_sse_pair(e, buf_p, dp, py, px,
                                    buf_n, -dp, qy, qx, r)
                if d < best:
                    best = d
                    best_t = t
            if best < -improve_eps:
                h[py, px] = 1 - h[py, px]
                _apply_stamp(e, buf_p, dp, py, px, r)
                if best_t >= 0:
                    qy = py + _NEIGHBORS[best_t, 0]
                    qx = px + _NEIGHBORS[best_t, 1]
                    _build_stamp(buf_n, k, r, qy, qx, cy, cyn, cx, cxn,
                                 height, width)
                    h[qy, qx] = 1 - h[qy, qx]
                    _apply_stamp(e, buf_n, -dp, qy, qx, r)
                moves += 1
    return moves


@njit(cache=True)
def toggle_delta(e, k, r, ay, ax, d, cy, cyn, cx, cxn):
    """Exact change of sum(e^2) for adding d at image pixel (ay, ax)."""
    height, width = e.shape
    size = 2 * r + 1
    buf = np.zeros((size, size))
    _build_stamp(buf, k, r, ay, ax, cy, cyn, cx, cxn, height, width)
    return _delta_sse(e, buf, d, ay, ax, r)


# ---------------------------------------------------------------------------
# Counterfactual per-pixel reward deltas
# ---------------------------------------------------------------------------

@njit(cache=True)
def flip_reward_deltas(h, c, e, k, rk, cyk, cynk, cxk, cxnk,
                       use_ssim, w, rw, cyw, cynw, cxw, cxnw,
                       mu_h, hh, hc, mu_c, var_c, s_map,
                       c1, c2, omega_s):
    """Reward change for flipping each pixel of h, all other pixels fixed.

    e is the HVS-filtered error C(h) - C(c).  For the SSIM term the window
    statistics (mu_h, hh = filtered h^2, hc = filtered h*c) admit exact
    rank-one updates because a flip changes one image pixel (and its
    mirror copies).  Output [y, x] is R(h with (y, x) flipped) - R(h).
    """
    height, width = h.shape
    n = height * width
    out = np.zeros((height, width))
    sizek = 2 * rk + 1
    bufk = np.zeros((sizek, sizek))
    sizew = 2 * rw + 1
    bufw = np.zeros((sizew, sizew))
    for ay in range(height):
        for ax in range(width):
            d = 1.0 - 2.0 * h[ay, ax]
            _build_stamp(bufk, k, rk, ay, ax, cyk, cynk, cxk, cxnk,
                         height, width)
            dsse = _delta_sse(e, bufk, d, ay, ax, rk)
            dr = -dsse / n
            if use_ssim:
                _build_stamp(bufw, w, rw, ay, ax, cyw, cynw, cxw, cxnw,
                             height, width)
                dssim = 0.0
                ca = c[ay, ax]
                hv = float(h[ay, ax])
                d2 = d * (2.0 * hv + d)  # change of h^2 (= d for binary h)
                for by in range(sizew):
                    wy = ay + by - rw
                    if wy < 0 or wy >= height:
                        continue
                    for bx in range(sizew):
                        wx = ax + bx - rw
                        if wx < 0 or wx >= width:
                            continue
                        wgt = bufw[by, bx]
                        if wgt == 0.0:
                            continue
                        mu2 = mu_h[wy, wx] + d * wgt
                        hh2 = hh[wy, wx] + d2 * wgt
                        hc2 = hc[wy, wx] + d * ca * wgt
                        mc = mu_c[wy, wx]
                        var2 = hh2 - mu2 * mu2
                        cov2 = hc2 - mu2 * mc
                        num = (2.0 * mu2 * mc + c1) * (2.0 * cov2 + c2)
                        den = ((mu2 * mu2 + mc * mc + c1)
                               * (var2 + var_c[wy, wx] + c2))
                        dssim += num / den - s_map[wy, wx]
                dr += omega_s * dssim / n
            out[ay, ax] = dr
    return out


# ---------------------------------------------------------------------------
# Error diffusion
# ---------------------------------------------------------------------------

@njit(cache=True)
def error_diffusion_scan(c, tap_dx, tap_dy, tap_w, serpentine):
    """Sequential error-diffusion scan with a fixed kernel.

    Threshold 0.5 with ties mapped to 1.  On serpentine (right-to-left)
    rows the tap x-offsets are reflected.  Taps falling outside the image
    are dropped with their weight discarded.
    """
    height, width = c.shape
    out = np.zeros((height, width), dtype=np.uint8)
    acc = c.copy()
    ntaps = len(tap_w)
    for y in range(height):
        if serpentine and y % 2 == 1:
            xs0, xs1, step, sgn = width - 1, -1, -1, -1
        else:
            xs0, xs1, step, sgn = 0, width, 1, 1
        for x in range(xs0, xs1, step):
            v = acc[y, x]
            o = 1.0 if v >= 0.5 else 0.0
            out[y, x] = np.uint8(o)
            err = v - o
            for t in range(ntaps):
                nx = x + sgn * tap_dx[t]
                ny = y + tap_dy[t]
                if 0 <= nx < width and 0 <= ny < height:
                    acc[ny, nx] += err * tap_w[t]
    return out


@njit(cache=True)
def error_diffusion_variable(c, levels, table, tap_dx, tap_dy, serpentine):
    """Error diffusion with per-level weights from a 256-row table.

    The row is selected by the pixel's *original* quantized level
    (levels[y, x] in 0..255), not the error-accumulated value.
    """
    height, width = c.shape
    out = np.zeros((height, width), dtype=np.uint8)
    acc = c.copy()
    ntaps = table.shape[1]
    for y in range(height):
        if serpentine and y % 2 == 1:
            xs0, xs1, step, sgn = width - 1, -1, -1, -1
        else:
            xs0, xs1, step, sgn = 0, width, 1, 1
        for x in range(xs0, xs1, step):
            v = acc[y, x]
            o = 1.0 if v >= 0.5 else 0.0
            out[y, x] = np.uint8(o)
            err = v - o
            row = levels[y, x]
            for t in range(ntaps):
                nx = x + sgn * tap_dx[t]
                ny = y + tap_dy[t]
                if 0 <= nx < width and 0 <= ny < height:
                    acc[ny, nx] += err * table[row, t]
    return out
