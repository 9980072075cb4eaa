"""Numpy / pure-python implementations of the hot kernels.

These mirror the compiled versions in ``_native.pyx`` expression for
expression so that both backends produce bit-identical results; keep the
arithmetic order in sync when touching either file.
"""

from __future__ import annotations

import numpy as np

# neighbour order for border tracing: E, SE, S, SW, W, NW, N, NE (y grows down)
_DIRS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


def warp_affine_bilinear(src: np.ndarray, matrix) -> np.ndarray:
    """Sample ``src`` through an affine gather map with bilinear weights.

    ``matrix`` is ``(m00, m01, m02, m10, m11, m12)`` mapping an output pixel
    ``(x, y)`` to source coordinates ``sx = m00*x + m01*y + m02`` and
    ``sy = m10*x + m11*y + m12``.  Reads outside the source are 0.
    """
    src = np.ascontiguousarray(src, dtype=np.float64)
    h, w = src.shape
    m00, m01, m02, m10, m11, m12 = (float(matrix[i]) for i in range(6))

    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    sx = (m00 * xs + m01 * ys) + m02
    sy = (m10 * xs + m11 * ys) + m12

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    def gather(xi, yi):
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        vals = src[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
        return vals * valid

    v00 = gather(x0, y0)
    v01 = gather(x0 + 1, y0)
    v10 = gather(x0, y0 + 1)
    v11 = gather(x0 + 1, y0 + 1)

    return (v00 * (1.0 - fx) + v01 * fx) * (1.0 - fy) + (v10 * (1.0 - fx) + v11 * fx) * fy


def box_blur3(src: np.ndarray, passes: int = 1) -> np.ndarray:
    """Repeated 3x3 box blur with edge-clamped borders."""
    out = np.ascontiguousarray(src, dtype=np.float64)
    for _ in range(passes):
        p = np.pad(out, 1, mode="edge")
        s = (p[0:-2, 0:-2] + p[0:-2, 1:-1] + p[0:-2, 2:]
             + p[1:-1, 0:-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
             + p[2:, 0:-2] + p[2:, 1:-1] + p[2:, 2:])
        out = s / 9.0
    return out


def trace_outer_borders(mask: np.ndarray) -> list[np.ndarray]:
    """Outer borders of every 8-connected foreground component.

    Returns one ``(n, 2)`` int32 array of (x, y) pixel coordinates per
    component, in raster-scan order of the component's topmost-leftmost
    pixel.  Moore tracing with Jacob's stopping criterion; an isolated pixel
    yields a single-point border.
    """
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    borders = []
    next_label = 0
    for y0 in range(h):
        row = mask[y0]
        for x0 in range(w):
            if row[x0] == 0 or labels[y0, x0] != 0:
                continue
            next_label += 1
            _flood_label(mask, labels, x0, y0, next_label)
            borders.append(_moore_trace(mask, x0, y0))
    return borders


def _flood_label(mask, labels, x0, y0, label):
    h, w = mask.shape
    stack = [(x0, y0)]
    labels[y0, x0] = label
    while stack:
        x, y = stack.pop()
        for dx, dy in _DIRS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and mask[ny, nx] and labels[ny, nx] == 0:
                labels[ny, nx] = label
                stack.append((nx, ny))


_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}


def _moore_trace(mask, x0, y0):
    """Clockwise Moore walk around one component from its topmost-leftmost
    pixel.  The backtrack is carried as a position; the walk stops when the
    start pixel is about to continue to the same second pixel again."""
    h, w = mask.shape

    def step(cx, cy, bx, by):
        bdir = _DIR_INDEX[(bx - cx, by - cy)]
        last_bg = (bx, by)
        for k in range(1, 9):
            d = (bdir + k) % 8
            nx, ny = cx + _DIRS[d][0], cy + _DIRS[d][1]
            if 0 <= nx < w and 0 <= ny < h and mask[ny, nx]:
                return (nx, ny), last_bg
            last_bg = (nx, ny)
        return None, None

    points = [(x0, y0)]
    # the start pixel is topmost-leftmost, so its W neighbour is background
    cur, back = step(x0, y0, x0 - 1, y0)
    if cur is None:
        return np.array(points, dtype=np.int32)
    second = cur
    limit = 4 * int(mask.sum()) + 8
    while limit > 0:
        nxt, nback = step(*cur, *back)
        if cur == (x0, y0) and nxt == second:
            break
        points.append(cur)
        cur, back = nxt, nback
        limit -= 1
    return np.array(points, dtype=np.int32)
