"""Vectorized numpy implementations of the pixel kernels.

Operation order mirrors `_numba` exactly (lerp-form bilinear interpolation,
clamp-to-edge sampling), so both paths agree bitwise on float32 inputs.
The lerp form ``v0 + t*(v1-v0)`` keeps two exactness guarantees the package
relies on: sampling at an integer grid position returns the stored value
bit-exactly, and interpolating a constant field returns the constant.
"""

import numpy as np


def warp_bilinear(image: np.ndarray, flow: np.ndarray, mu: float) -> np.ndarray:
    c, h, w = image.shape
    dt = flow.dtype
    mu_s = dt.type(mu)
    xs = np.arange(w, dtype=dt)[None, :]
    ys = np.arange(h, dtype=dt)[:, None]
    sx = np.clip(xs + mu_s * flow[0], 0, w - 1)
    sy = np.clip(ys + mu_s * flow[1], 0, h - 1)
    x0f = np.floor(sx)
    y0f = np.floor(sy)
    tx = sx - x0f
    ty = sy - y0f
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    v00 = image[:, y0, x0]
    v01 = image[:, y0, x1]
    v10 = image[:, y1, x0]
    v11 = image[:, y1, x1]
    top = v00 + tx * (v01 - v00)
    bot = v10 + tx * (v11 - v10)
    out = top + ty * (bot - top)
    return out.astype(image.dtype, copy=False)


def resize_bilinear(channels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    c, ih, iw = channels.shape
    dt = channels.dtype
    half = dt.type(0.5)
    sx_scale = dt.type(iw) / dt.type(out_w)
    sy_scale = dt.type(ih) / dt.type(out_h)
    sx = np.clip((np.arange(out_w, dtype=dt) + half) * sx_scale - half, 0, iw - 1)[None, :]
    sy = np.clip((np.arange(out_h, dtype=dt) + half) * sy_scale - half, 0, ih - 1)[:, None]
    x0f = np.floor(sx)
    y0f = np.floor(sy)
    tx = sx - x0f
    ty = sy - y0f
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    x1 = np.minimum(x0 + 1, iw - 1)
    y1 = np.minimum(y0 + 1, ih - 1)
    y0b = np.broadcast_to(y0, (out_h, out_w))
    y1b = np.broadcast_to(y1, (out_h, out_w))
    x0b = np.broadcast_to(x0, (out_h, out_w))
    x1b = np.broadcast_to(x1, (out_h, out_w))
    v00 = channels[:, y0b, x0b]
    v01 = channels[:, y0b, x1b]
    v10 = channels[:, y1b, x0b]
    v11 = channels[:, y1b, x1b]
    top = v00 + tx * (v01 - v00)
    bot = v10 + tx * (v11 - v10)
    return (top + ty * (bot - top)).astype(dt, copy=False)


def affine_sample(channels: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    c, h, w = channels.shape
    dt = channels.dtype
    m = np.asarray(matrix, dtype=dt)
    xs = np.arange(w, dtype=dt)[None, :]
    ys = np.arange(h, dtype=dt)[:, None]
    sx = np.clip(m[0, 0] * xs + m[0, 1] * ys + m[0, 2], 0, w - 1)
    sy = np.clip(m[1, 0] * xs + m[1, 1] * ys + m[1, 2], 0, h - 1)
    x0f = np.floor(sx)
    y0f = np.floor(sy)
    tx = sx - x0f
    ty = sy - y0f
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    v00 = channels[:, y0, x0]
    v01 = channels[:, y0, x1]
    v10 = channels[:, y1, x0]
    v11 = channels[:, y1, x1]
    top = v00 + tx * (v01 - v00)
    bot = v10 + tx * (v11 - v10)
    return (top + ty * (bot - top)).astype(dt, copy=False)


def warp_rows_u8(image: np.ndarray, flow: np.ndarray, mu: float) -> np.ndarray:
    h, w = image.shape[1], image.shape[2]
    warped = warp_bilinear(image, flow, mu).astype(np.float32, copy=False)
    u8 = np.rint(np.clip(warped, 0.0, 1.0) * np.float32(255.0)).astype(np.uint8)
    rows = np.empty((h, 1 + 3 * w), dtype=np.uint8)
    rows[:, 0] = 0
    rows[:, 1:] = u8.transpose(1, 2, 0).reshape(h, 3 * w)
    return rows


def segment_alpha(
    h: int, w: int, ax: float, ay: float, bx: float, by: float, half_width: float
) -> np.ndarray:
    ax = np.float32(ax)
    ay = np.float32(ay)
    bx = np.float32(bx)
    by = np.float32(by)
    hw = np.float32(half_width)
    ex = bx - ax
    ey = by - ay
    len2 = ex * ex + ey * ey
    xs = np.arange(w, dtype=np.float32)[None, :]
    ys = np.arange(h, dtype=np.float32)[:, None]
    dx = xs - ax
    dy = ys - ay
    if len2 > np.float32(0.0):
        t = np.clip((dx * ex + dy * ey) / len2, np.float32(0.0), np.float32(1.0))
    else:
        t = np.zeros((h, w), dtype=np.float32)
    px = ax + t * ex
    py = ay + t * ey
    ddx = xs - px
    ddy = ys - py
    d = np.sqrt(ddx * ddx + ddy * ddy)
    return np.clip(hw + np.float32(0.5) - d, np.float32(0.0), np.float32(1.0)).astype(np.float32)
