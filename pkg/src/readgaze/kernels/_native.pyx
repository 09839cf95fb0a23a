# cython: language_level=3
"""Compiled versions of the hot kernels.

Must stay bit-identical to ``fallback.py`` — the parity tests compare
both backends on random inputs. Keep the arithmetic order the same as
the fallback when editing either side.
"""

import numpy as np

cimport numpy as cnp
cimport cython

cnp.import_array()


def rasterize_scanpath(px, py, colors, int width, int height, int radius=2):
    """Gradient polyline plus vertex discs on black; see fallback docstring."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] img = np.zeros(
        (3, height, width), dtype=np.float64
    )
    cdef cnp.ndarray[cnp.int64_t, ndim=1] xs = np.clip(
        np.asarray(px, dtype=np.int64), 0, width - 1
    )
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ys = np.clip(
        np.asarray(py, dtype=np.int64), 0, height - 1
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cs = np.ascontiguousarray(
        colors, dtype=np.float64
    )
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i
    for i in range(n - 1):
        _segment(img, xs[i], ys[i], xs[i + 1], ys[i + 1],
                 cs[i, 0], cs[i, 1], cs[i, 2],
                 cs[i + 1, 0], cs[i + 1, 1], cs[i + 1, 2])
    for i in range(n):
        _disc(img, xs[i], ys[i], radius, cs[i, 0], cs[i, 1], cs[i, 2],
              width, height)
    return img


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _segment(cnp.float64_t[:, :, ::1] img,
                   long x0, long y0, long x1, long y1,
                   double r0, double g0, double b0,
                   double r1, double g1, double b1):
    cdef long dx = x1 - x0
    cdef long dy
    if dx < 0:
        dx = -dx
    dy = y1 - y0
    if dy > 0:
        dy = -dy
    cdef long sx = 1 if x0 < x1 else -1
    cdef long sy = 1 if y0 < y1 else -1
    cdef long err = dx + dy
    cdef long nsteps = dx if dx > -dy else -dy
    cdef long x = x0, y = y0, k = 0, e2
    cdef double f
    while True:
        f = (<double> k) / (<double> nsteps) if nsteps > 0 else 0.0
        img[0, y, x] = (1.0 - f) * r0 + f * r1
        img[1, y, x] = (1.0 - f) * g0 + f * g1
        img[2, y, x] = (1.0 - f) * b0 + f * b1
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
        k += 1


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _disc(cnp.float64_t[:, :, ::1] img, long cx, long cy, long radius,
                double r, double g, double b, long width, long height):
    cdef long r2 = radius * radius
    cdef long ox, oy, xx, yy
    for oy in range(-radius, radius + 1):
        yy = cy + oy
        if yy < 0 or yy >= height:
            continue
        for ox in range(-radius, radius + 1):
            if ox * ox + oy * oy > r2:
                continue
            xx = cx + ox
            if xx < 0 or xx >= width:
                continue
            img[0, yy, xx] = r
            img[1, yy, xx] = g
            img[2, yy, xx] = b


@cython.boundscheck(False)
@cython.wraparound(False)
def idt_spans(x, y, t, double dispersion_threshold, double min_duration_ms,
              double max_gap_ms):
    """Dispersion-window fixation grouping; see fallback docstring."""
    cdef cnp.float64_t[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.float64_t[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.float64_t[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t n = tv.shape[0]
    cdef list spans = []
    cdef Py_ssize_t i = 0, j
    cdef double minx, maxx, miny, maxy
    cdef double nminx, nmaxx, nminy, nmaxy, ddx, ddy
    cdef double thresh2 = dispersion_threshold * dispersion_threshold
    while i < n:
        minx = maxx = xv[i]
        miny = maxy = yv[i]
        j = i
        while j + 1 < n:
            if tv[j + 1] - tv[j] > max_gap_ms:
                break
            nminx = minx if minx < xv[j + 1] else xv[j + 1]
            nmaxx = maxx if maxx > xv[j + 1] else xv[j + 1]
            nminy = miny if miny < yv[j + 1] else yv[j + 1]
            nmaxy = maxy if maxy > yv[j + 1] else yv[j + 1]
            ddx = nmaxx - nminx
            ddy = nmaxy - nminy
            if ddx * ddx + ddy * ddy > thresh2:
                break
            minx = nminx
            maxx = nmaxx
            miny = nminy
            maxy = nmaxy
            j += 1
        if tv[j] - tv[i] >= min_duration_ms:
            spans.append((i, j))
            i = j + 1
        else:
            i += 1
    if not spans:
        return np.empty((0, 2), dtype=np.int64)
    return np.asarray(spans, dtype=np.int64)


@cython.boundscheck(False)
@cython.wraparound(False)
def im2col3x3(x):
    """3x3/stride-1/pad-1 neighborhood gather; see fallback docstring."""
    cdef cnp.float64_t[:, :, :, ::1] xv = np.ascontiguousarray(
        x, dtype=np.float64
    )
    cdef Py_ssize_t n = xv.shape[0], c = xv.shape[1]
    cdef Py_ssize_t h = xv.shape[2], w = xv.shape[3]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros(
        (c * 9, n * h * w), dtype=np.float64
    )
    cdef cnp.float64_t[:, ::1] ov = out
    cdef Py_ssize_t ci, k, ni, ii, jj, si, sj, row, col
    for ci in range(c):
        for k in range(9):
            row = ci * 9 + k
            for ni in range(n):
                for ii in range(h):
                    si = ii + k // 3 - 1
                    if si < 0 or si >= h:
                        continue
                    col = (ni * h + ii) * w
                    sj = k % 3 - 1
                    for jj in range(w):
                        if 0 <= jj + sj < w:
                            ov[row, col + jj] = xv[ni, ci, si, jj + sj]
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
def col2im3x3(cols, Py_ssize_t n, Py_ssize_t c, Py_ssize_t h, Py_ssize_t w):
    """Scatter-add inverse of im2col3x3; see fallback docstring."""
    cdef cnp.float64_t[:, ::1] cv = np.ascontiguousarray(cols, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out = np.zeros(
        (n, c, h, w), dtype=np.float64
    )
    cdef cnp.float64_t[:, :, :, ::1] ov = out
    cdef Py_ssize_t ci, k, ni, ii, jj, si, sj, row, col
    for ci in range(c):
        for k in range(9):
            row = ci * 9 + k
            for ni in range(n):
                for ii in range(h):
                    si = ii + k // 3 - 1
                    if si < 0 or si >= h:
                        continue
                    col = (ni * h + ii) * w
                    sj = k % 3 - 1
                    for jj in range(w):
                        if 0 <= jj + sj < w:
                            ov[ni, ci, si, jj + sj] += cv[row, col + jj]
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
def maxpool2x2(x):
    """2x2/stride-2 max pool with first-cell tie rule; see fallback."""
    cdef cnp.float64_t[:, :, :, ::1] xv = np.ascontiguousarray(
        x, dtype=np.float64
    )
    cdef Py_ssize_t n = xv.shape[0], c = xv.shape[1]
    cdef Py_ssize_t oh = xv.shape[2] // 2, ow = xv.shape[3] // 2
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out = np.empty(
        (n, c, oh, ow), dtype=np.float64
    )
    cdef cnp.ndarray[cnp.uint8_t, ndim=4] arg = np.empty(
        (n, c, oh, ow), dtype=np.uint8
    )
    cdef cnp.float64_t[:, :, :, ::1] ov = out
    cdef cnp.uint8_t[:, :, :, ::1] av = arg
    cdef Py_ssize_t ni, ci, ii, jj, dy, dx
    cdef double best, v
    cdef int besti
    for ni in range(n):
        for ci in range(c):
            for ii in range(oh):
                for jj in range(ow):
                    best = xv[ni, ci, 2 * ii, 2 * jj]
                    besti = 0
                    for dy in range(2):
                        for dx in range(2):
                            v = xv[ni, ci, 2 * ii + dy, 2 * jj + dx]
                            if v > best:
                                best = v
                                besti = <int> (dy * 2 + dx)
                    ov[ni, ci, ii, jj] = best
                    av[ni, ci, ii, jj] = <cnp.uint8_t> besti
    return out, arg


@cython.boundscheck(False)
@cython.wraparound(False)
def maxpool2x2_backward(grad, arg):
    """Route pooled gradients to the winners; see fallback docstring."""
    cdef cnp.float64_t[:, :, :, ::1] gv = np.ascontiguousarray(
        grad, dtype=np.float64
    )
    cdef cnp.uint8_t[:, :, :, ::1] av = np.ascontiguousarray(
        arg, dtype=np.uint8
    )
    cdef Py_ssize_t n = gv.shape[0], c = gv.shape[1]
    cdef Py_ssize_t oh = gv.shape[2], ow = gv.shape[3]
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out = np.zeros(
        (n, c, oh * 2, ow * 2), dtype=np.float64
    )
    cdef cnp.float64_t[:, :, :, ::1] ov = out
    cdef Py_ssize_t ni, ci, ii, jj
    cdef int a
    for ni in range(n):
        for ci in range(c):
            for ii in range(oh):
                for jj in range(ow):
                    a = av[ni, ci, ii, jj]
                    ov[ni, ci, 2 * ii + a // 2, 2 * jj + a % 2] = gv[ni, ci, ii, jj]
    return out
