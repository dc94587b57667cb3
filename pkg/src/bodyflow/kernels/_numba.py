"""Numba-compiled float32 kernels.

Scalar loops over output pixels, lerp-form bilinear, clamp-to-edge: the same
operation order as `_numpy`, so the two paths agree bitwise on float32.
First call pays JIT compilation; ``cache=True`` persists the machine code.
"""

import numpy as np
from numba import njit

_F0 = np.float32(0.0)
_F1 = np.float32(1.0)
_FHALF = np.float32(0.5)
_F255 = np.float32(255.0)


@njit(cache=True)
def warp_bilinear_f32(image, flow, mu):
    c, h, w = image.shape
    out = np.empty_like(image)
    xmax = np.float32(w - 1)
    ymax = np.float32(h - 1)
    for y in range(h):
        fy = np.float32(y)
        for x in range(w):
            sx = np.float32(x) + mu * flow[0, y, x]
            sy = fy + mu * flow[1, y, x]
            if sx < _F0:
                sx = _F0
            elif sx > xmax:
                sx = xmax
            if sy < _F0:
                sy = _F0
            elif sy > ymax:
                sy = ymax
            x0f = np.floor(sx)
            y0f = np.floor(sy)
            tx = sx - x0f
            ty = sy - y0f
            x0 = int(x0f)
            y0 = int(y0f)
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            y1 = y0 + 1
            if y1 > h - 1:
                y1 = h - 1
            for ch in range(c):
                v00 = image[ch, y0, x0]
                v01 = image[ch, y0, x1]
                v10 = image[ch, y1, x0]
                v11 = image[ch, y1, x1]
                top = v00 + tx * (v01 - v00)
                bot = v10 + tx * (v11 - v10)
                out[ch, y, x] = top + ty * (bot - top)
    return out


@njit(cache=True)
def resize_bilinear_f32(channels, out_h, out_w):
    c, ih, iw = channels.shape
    out = np.empty((c, out_h, out_w), dtype=np.float32)
    sx_scale = np.float32(iw) / np.float32(out_w)
    sy_scale = np.float32(ih) / np.float32(out_h)
    xmax = np.float32(iw - 1)
    ymax = np.float32(ih - 1)
    for y in range(out_h):
        sy = (np.float32(y) + _FHALF) * sy_scale - _FHALF
        if sy < _F0:
            sy = _F0
        elif sy > ymax:
            sy = ymax
        y0f = np.floor(sy)
        ty = sy - y0f
        y0 = int(y0f)
        y1 = y0 + 1
        if y1 > ih - 1:
            y1 = ih - 1
        for x in range(out_w):
            sx = (np.float32(x) + _FHALF) * sx_scale - _FHALF
            if sx < _F0:
                sx = _F0
            elif sx > xmax:
                sx = xmax
            x0f = np.floor(sx)
            tx = sx - x0f
            x0 = int(x0f)
            x1 = x0 + 1
            if x1 > iw - 1:
                x1 = iw - 1
            for ch in range(c):
                v00 = channels[ch, y0, x0]
                v01 = channels[ch, y0, x1]
                v10 = channels[ch, y1, x0]
                v11 = channels[ch, y1, x1]
                top = v00 + tx * (v01 - v00)
                bot = v10 + tx * (v11 - v10)
                out[ch, y, x] = top + ty * (bot - top)
    return out


@njit(cache=True)
def affine_sample_f32(channels, m):
    c, h, w = channels.shape
    out = np.empty_like(channels)
    xmax = np.float32(w - 1)
    ymax = np.float32(h - 1)
    for y in range(h):
        fy = np.float32(y)
        for x in range(w):
            fx = np.float32(x)
            sx = m[0, 0] * fx + m[0, 1] * fy + m[0, 2]
            sy = m[1, 0] * fx + m[1, 1] * fy + m[1, 2]
            if sx < _F0:
                sx = _F0
            elif sx > xmax:
                sx = xmax
            if sy < _F0:
                sy = _F0
            elif sy > ymax:
                sy = ymax
            x0f = np.floor(sx)
            y0f = np.floor(sy)
            tx = sx - x0f
            ty = sy - y0f
            x0 = int(x0f)
            y0 = int(y0f)
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            y1 = y0 + 1
            if y1 > h - 1:
                y1 = h - 1
            for ch in range(c):
                v00 = channels[ch, y0, x0]
                v01 = channels[ch, y0, x1]
                v10 = channels[ch, y1, x0]
                v11 = channels[ch, y1, x1]
                top = v00 + tx * (v01 - v00)
                bot = v10 + tx * (v11 - v10)
                out[ch, y, x] = top + ty * (bot - top)
    return out


@njit(cache=True)
def warp_rows_u8_f32(image, flow, mu):
    c, h, w = image.shape
    rows = np.empty((h, 1 + 3 * w), dtype=np.uint8)
    xmax = np.float32(w - 1)
    ymax = np.float32(h - 1)
    for y in range(h):
        rows[y, 0] = 0
        fy = np.float32(y)
        for x in range(w):
            sx = np.float32(x) + mu * flow[0, y, x]
            sy = fy + mu * flow[1, y, x]
            if sx < _F0:
                sx = _F0
            elif sx > xmax:
                sx = xmax
            if sy < _F0:
                sy = _F0
            elif sy > ymax:
                sy = ymax
            x0f = np.floor(sx)
            y0f = np.floor(sy)
            tx = sx - x0f
            ty = sy - y0f
            x0 = int(x0f)
            y0 = int(y0f)
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            y1 = y0 + 1
            if y1 > h - 1:
                y1 = h - 1
            base = 1 + 3 * x
            for ch in range(c):
                v00 = image[ch, y0, x0]
                v01 = image[ch, y0, x1]
                v10 = image[ch, y1, x0]
                v11 = image[ch, y1, x1]
                top = v00 + tx * (v01 - v00)
                bot = v10 + tx * (v11 - v10)
                v = top + ty * (bot - top)
                if v < _F0:
                    v = _F0
                elif v > _F1:
                    v = _F1
                rows[y, base + ch] = np.uint8(np.rint(v * _F255))
    return rows


@njit(cache=True)
def segment_alpha_f32(h, w, ax, ay, bx, by, half_width):
    out = np.empty((h, w), dtype=np.float32)
    ex = bx - ax
    ey = by - ay
    len2 = ex * ex + ey * ey
    for y in range(h):
        fy = np.float32(y)
        dy = fy - ay
        for x in range(w):
            fx = np.float32(x)
            dx = fx - ax
            if len2 > _F0:
                t = (dx * ex + dy * ey) / len2
                if t < _F0:
                    t = _F0
                elif t > _F1:
                    t = _F1
            else:
                t = _F0
            px = ax + t * ex
            py = ay + t * ey
            ddx = fx - px
            ddy = fy - py
            d = np.sqrt(ddx * ddx + ddy * ddy)
            a = half_width + _FHALF - d
            if a < _F0:
                a = _F0
            elif a > _F1:
                a = _F1
            out[y, x] = a
    return out
