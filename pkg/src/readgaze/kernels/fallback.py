"""Pure NumPy/Python reference implementations of the hot kernels.

These are the semantic ground truth: the compiled backend must produce
bit-identical results (enforced by parity tests). Scanpath rasterization
and fixation grouping are plain Python loops here; the conv/pool helpers
lean on vectorized NumPy so the fallback stays usable for training.
"""

from __future__ import annotations

import numpy as np


# ---------------------------------------------------------------------------
# Scanpath rasterization
# ---------------------------------------------------------------------------

def rasterize_scanpath(
    px: np.ndarray,
    py: np.ndarray,
    colors: np.ndarray,
    width: int,
    height: int,
    radius: int = 2,
) -> np.ndarray:
    """Draw a gradient polyline plus vertex discs onto a black canvas.

    px, py: integer pixel coordinates of the vertices (clamped in-range).
    colors: (n, 3) float64 per-vertex RGB in [0, 1].
    Lines are 1 px integer Bresenham with the color linearly interpolated
    along each segment by step count; discs are painted after all lines,
    in vertex order, so later vertices win where discs overlap.
    Returns a (3, height, width) float64 image. No anti-aliasing.
    """
    img = np.zeros((3, height, width), dtype=np.float64)
    n = len(px)
    px = np.clip(np.asarray(px, dtype=np.int64), 0, width - 1)
    py = np.clip(np.asarray(py, dtype=np.int64), 0, height - 1)
    colors = np.asarray(colors, dtype=np.float64)

    for i in range(n - 1):
        _draw_segment(
            img,
            int(px[i]),
            int(py[i]),
            int(px[i + 1]),
            int(py[i + 1]),
            colors[i],
            colors[i + 1],
        )
    for i in range(n):
        _draw_disc(img, int(px[i]), int(py[i]), radius, colors[i], width, height)
    return img


def _draw_segment(img, x0, y0, x1, y1, c0, c1):
    """Bresenham line; pixel k of n gets color lerp(c0, c1, k/n)."""
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    nsteps = max(dx, -dy)
    x, y = x0, y0
    k = 0
    while True:
        f = k / nsteps if nsteps > 0 else 0.0
        img[0, y, x] = (1.0 - f) * c0[0] + f * c1[0]
        img[1, y, x] = (1.0 - f) * c0[1] + f * c1[1]
        img[2, y, x] = (1.0 - f) * c0[2] + f * c1[2]
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


def _draw_disc(img, cx, cy, radius, color, width, height):
    r2 = radius * radius
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
            img[0, yy, xx] = color[0]
            img[1, yy, xx] = color[1]
            img[2, yy, xx] = color[2]
    return img


# ---------------------------------------------------------------------------
# Dispersion-based fixation grouping
# ---------------------------------------------------------------------------

def idt_spans(
    x: np.ndarray,
    y: np.ndarray,
    t: np.ndarray,
    dispersion_threshold: float,
    min_duration_ms: float,
    max_gap_ms: float,
) -> np.ndarray:
    """Group a time-ordered point stream into stable-gaze spans.

    Grows a window while its bounding-box diagonal stays within
    ``dispersion_threshold`` and inter-sample gaps stay within
    ``max_gap_ms``; the maximal window becomes a span if it lasts at
    least ``min_duration_ms``, otherwise the start advances by one.
    Returns (n, 2) int64 inclusive [start, end] index pairs.
    """
    n = len(t)
    spans = []
    i = 0
    while i < n:
        minx = maxx = x[i]
        miny = maxy = y[i]
        j = i
        while j + 1 < n:
            if t[j + 1] - t[j] > max_gap_ms:
                break
            nminx = min(minx, x[j + 1])
            nmaxx = max(maxx, x[j + 1])
            nminy = min(miny, y[j + 1])
            nmaxy = max(maxy, y[j + 1])
            ddx = nmaxx - nminx
            ddy = nmaxy - nminy
            if ddx * ddx + ddy * ddy > dispersion_threshold * dispersion_threshold:
                break
            minx, maxx, miny, maxy = nminx, nmaxx, nminy, nmaxy
            j += 1
        if t[j] - t[i] >= min_duration_ms:
            spans.append((i, j))
            i = j + 1
        else:
            i += 1
    if not spans:
        return np.empty((0, 2), dtype=np.int64)
    return np.asarray(spans, dtype=np.int64)


# ---------------------------------------------------------------------------
# Convolution / pooling primitives (3x3, stride 1, pad 1; 2x2 max pool)
# ---------------------------------------------------------------------------

def im2col3x3(x: np.ndarray) -> np.ndarray:
    """Gather 3x3 neighborhoods (stride 1, zero pad 1) into a matrix.

    x: (N, C, H, W) float64. Returns (C*9, N*H*W) so a conv becomes one
    (F, C*9) @ (C*9, N*H*W) matrix product.
    """
    n, c, h, w = x.shape
    padded = np.zeros((n, c, h + 2, w + 2), dtype=np.float64)
    padded[:, :, 1 : h + 1, 1 : w + 1] = x
    cols = np.empty((c, 9, n * h * w), dtype=np.float64)
    for k in range(9):
        di, dj = divmod(k, 3)
        block = padded[:, :, di : di + h, dj : dj + w]
        cols[:, k, :] = block.transpose(1, 0, 2, 3).reshape(c, n * h * w)
    return cols.reshape(c * 9, n * h * w)


def col2im3x3(cols: np.ndarray, n: int, c: int, h: int, w: int) -> np.ndarray:
    """Scatter-add the im2col3x3 layout back to (N, C, H, W)."""
    cols = cols.reshape(c, 9, n, h, w)
    padded = np.zeros((n, c, h + 2, w + 2), dtype=np.float64)
    for k in range(9):
        di, dj = divmod(k, 3)
        padded[:, :, di : di + h, dj : dj + w] += cols[:, k].transpose(1, 0, 2, 3)
    return padded[:, :, 1 : h + 1, 1 : w + 1]


def maxpool2x2(x: np.ndarray) -> "tuple[np.ndarray, np.ndarray]":
    """2x2 max pool, stride 2. H and W must be even.

    Returns (out, arg) where arg in {0,1,2,3} encodes the winning cell
    as row-major offset dy*2+dx; ties go to the first cell in that scan
    order (the compiled backend matches this rule).
    """
    n, c, h, w = x.shape
    v = (
        x.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )
    arg = v.argmax(axis=-1).astype(np.uint8)
    out = np.take_along_axis(v, arg[..., None].astype(np.int64), axis=-1)[..., 0]
    return np.ascontiguousarray(out), arg


def maxpool2x2_backward(grad: np.ndarray, arg: np.ndarray) -> np.ndarray:
    """Route pooled gradients back to the winning input cells."""
    n, c, oh, ow = grad.shape
    v = np.zeros((n, c, oh, ow, 4), dtype=np.float64)
    np.put_along_axis(v, arg[..., None].astype(np.int64), grad[..., None], axis=-1)
    return np.ascontiguousarray(
        v.reshape(n, c, oh, ow, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, oh * 2, ow * 2)
    )
