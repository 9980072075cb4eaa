# Compiled twins of the kernels in _fallback.py.  The floating-point
# expressions are kept in the same order as the numpy versions (and the
# extension is built with -ffp-contract=off) so both backends return
# bit-identical results.

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

cdef int[8] _DX = [1, 1, 0, -1, -1, -1, 0, 1]
cdef int[8] _DY = [0, 1, 1, 1, 0, -1, -1, -1]


def warp_affine_bilinear(src, matrix):
    """Affine gather with bilinear weights; out-of-bounds reads are 0."""
    cdef const double[:, ::1] s = np.ascontiguousarray(src, dtype=np.float64)
    cdef Py_ssize_t h = s.shape[0]
    cdef Py_ssize_t w = s.shape[1]
    cdef double m00 = matrix[0], m01 = matrix[1], m02 = matrix[2]
    cdef double m10 = matrix[3], m11 = matrix[4], m12 = matrix[5]

    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t x, y, x0, y0
    cdef double sx, sy, fx, fy, v00, v01, v10, v11, xd, yd

    for y in range(h):
        yd = <double> y
        for x in range(w):
            xd = <double> x
            sx = (m00 * xd + m01 * yd) + m02
            sy = (m10 * xd + m11 * yd) + m12
            fx = floor(sx)
            fy = floor(sy)
            x0 = <Py_ssize_t> fx
            y0 = <Py_ssize_t> fy
            fx = sx - fx
            fy = sy - fy
            v00 = s[y0, x0] if 0 <= x0 < w and 0 <= y0 < h else 0.0
            v01 = s[y0, x0 + 1] if 0 <= x0 + 1 < w and 0 <= y0 < h else 0.0
            v10 = s[y0 + 1, x0] if 0 <= x0 < w and 0 <= y0 + 1 < h else 0.0
            v11 = s[y0 + 1, x0 + 1] if 0 <= x0 + 1 < w and 0 <= y0 + 1 < h else 0.0
            out[y, x] = (v00 * (1.0 - fx) + v01 * fx) * (1.0 - fy) \
                        + (v10 * (1.0 - fx) + v11 * fx) * fy
    return out_arr


def box_blur3(src, int passes=1):
    """Repeated 3x3 box blur with edge-clamped borders."""
    cur_arr = np.array(src, dtype=np.float64, order="C")
    cdef Py_ssize_t h = cur_arr.shape[0]
    cdef Py_ssize_t w = cur_arr.shape[1]
    nxt_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] cur = cur_arr
    cdef double[:, ::1] nxt = nxt_arr
    cdef Py_ssize_t x, y, p, xl, xr, yu, yd_
    cdef double acc

    for p in range(passes):
        for y in range(h):
            yu = y - 1 if y > 0 else 0
            yd_ = y + 1 if y + 1 < h else h - 1
            for x in range(w):
                xl = x - 1 if x > 0 else 0
                xr = x + 1 if x + 1 < w else w - 1
                acc = (cur[yu, xl] + cur[yu, x] + cur[yu, xr]
                       + cur[y, xl] + cur[y, x] + cur[y, xr]
                       + cur[yd_, xl] + cur[yd_, x] + cur[yd_, xr])
                nxt[y, x] = acc / 9.0
        cur, nxt = nxt, cur
        cur_arr, nxt_arr = nxt_arr, cur_arr
    return cur_arr


def trace_outer_borders(mask):
    """Outer borders of every 8-connected component, Moore walk per component."""
    cdef const cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0]
    cdef Py_ssize_t w = m.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef int[:, ::1] labels = labels_arr
    stack_arr = np.empty(h * w * 2, dtype=np.int64)
    cdef cnp.int64_t[::1] stack = stack_arr

    borders = []
    cdef int next_label = 0
    cdef Py_ssize_t x0, y0
    for y0 in range(h):
        for x0 in range(w):
            if m[y0, x0] == 0 or labels[y0, x0] != 0:
                continue
            next_label += 1
            _flood(m, labels, stack, x0, y0, next_label)
            borders.append(_trace(m, x0, y0))
    return borders


cdef void _flood(const cnp.uint8_t[:, ::1] m, int[:, ::1] labels,
                 cnp.int64_t[::1] stack, Py_ssize_t x0, Py_ssize_t y0,
                 int label) noexcept:
    cdef Py_ssize_t h = m.shape[0]
    cdef Py_ssize_t w = m.shape[1]
    cdef Py_ssize_t top = 0
    cdef Py_ssize_t x, y, nx, ny
    cdef int d
    labels[y0, x0] = label
    stack[0] = x0
    stack[1] = y0
    top = 2
    while top > 0:
        y = stack[top - 1]
        x = stack[top - 2]
        top -= 2
        for d in range(8):
            nx = x + _DX[d]
            ny = y + _DY[d]
            if 0 <= nx < w and 0 <= ny < h and m[ny, nx] != 0 and labels[ny, nx] == 0:
                labels[ny, nx] = label
                stack[top] = nx
                stack[top + 1] = ny
                top += 2


cdef inline int _dir_index(Py_ssize_t dx, Py_ssize_t dy) noexcept:
    cdef int d
    for d in range(8):
        if _DX[d] == dx and _DY[d] == dy:
            return d
    return -1


cdef _trace(const cnp.uint8_t[:, ::1] m, Py_ssize_t x0, Py_ssize_t y0):
    cdef Py_ssize_t h = m.shape[0]
    cdef Py_ssize_t w = m.shape[1]
    cdef Py_ssize_t cx = x0, cy = y0, bx = x0 - 1, by = y0
    cdef Py_ssize_t nx = 0, ny = 0, nbx = 0, nby = 0
    cdef Py_ssize_t sx = -1, sy = -1
    cdef long limit

    points = [(x0, y0)]
    if not _step(m, w, h, cx, cy, bx, by, &nx, &ny, &nbx, &nby):
        return np.array(points, dtype=np.int32)
    sx = nx
    sy = ny
    cx, cy, bx, by = nx, ny, nbx, nby
    limit = 4 * (h * w) + 8
    while limit > 0:
        if not _step(m, w, h, cx, cy, bx, by, &nx, &ny, &nbx, &nby):
            break
        if cx == x0 and cy == y0 and nx == sx and ny == sy:
            break
        points.append((cx, cy))
        cx, cy, bx, by = nx, ny, nbx, nby
        limit -= 1
    return np.array(points, dtype=np.int32)


cdef bint _step(const cnp.uint8_t[:, ::1] m, Py_ssize_t w, Py_ssize_t h,
                Py_ssize_t cx, Py_ssize_t cy, Py_ssize_t bx, Py_ssize_t by,
                Py_ssize_t *nx, Py_ssize_t *ny,
                Py_ssize_t *nbx, Py_ssize_t *nby) noexcept:
    cdef int bdir = _dir_index(bx - cx, by - cy)
    cdef Py_ssize_t lbx = bx, lby = by, px, py
    cdef int k, d
    for k in range(1, 9):
        d = (bdir + k) % 8
        px = cx + _DX[d]
        py = cy + _DY[d]
        if 0 <= px < w and 0 <= py < h and m[py, px] != 0:
            nx[0] = px
            ny[0] = py
            nbx[0] = lbx
            nby[0] = lby
            return True
        lbx = px
        lby = py
    return False
