"""Hot pixel kernels: numba-accelerated with a pure-numpy fallback.

The active path is resolved once at import time from the ``BODYFLOW_NUMBA``
environment variable:

* unset or ``auto`` -- use numba when it imports cleanly;
* ``1`` / ``true`` / ``on`` -- require numba, raise if unavailable;
* ``0`` / ``false`` / ``off`` -- pure numpy.

The numba specialisations are compiled for float32, the package's pixel
dtype; any other dtype silently routes to the numpy path. Both paths follow
the same operation order (lerp-form bilinear, clamp-to-edge), so on float32
inputs they produce bitwise-identical results; ``bodyflow bench`` compares
their speed.
"""

import os

import numpy as np

from . import _numpy as numpy_impl

_FLAG = os.environ.get("BODYFLOW_NUMBA", "auto").strip().lower()

USE_NUMBA = False
numba_impl = None
if _FLAG not in ("0", "false", "off", "no"):
    try:
        from . import _numba as numba_impl  # noqa: F401

        USE_NUMBA = True
    except ImportError:
        if _FLAG in ("1", "true", "on", "yes"):
            raise
        numba_impl = None


def _f32(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a)


def warp_bilinear(image: np.ndarray, flow: np.ndarray, mu: float) -> np.ndarray:
    """Backward-warp ``image`` (C,H,W) by ``mu * flow`` (2,H,W), clamping samples to the border."""
    if USE_NUMBA and image.dtype == np.float32 and flow.dtype == np.float32:
        return numba_impl.warp_bilinear_f32(_f32(image), _f32(flow), np.float32(mu))
    return numpy_impl.warp_bilinear(image, flow, mu)


def resize_bilinear(channels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel bilinear resize of a (C,H,W) stack; exact identity when sizes match."""
    if USE_NUMBA and channels.dtype == np.float32:
        return numba_impl.resize_bilinear_f32(_f32(channels), out_h, out_w)
    return numpy_impl.resize_bilinear(channels, out_h, out_w)


def affine_sample(channels: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Resample a (C,H,W) stack through a 2x3 backward affine map (output -> source coords)."""
    matrix = np.asarray(matrix, dtype=channels.dtype)
    if USE_NUMBA and channels.dtype == np.float32:
        return numba_impl.affine_sample_f32(_f32(channels), np.ascontiguousarray(matrix))
    return numpy_impl.affine_sample(channels, matrix)


def warp_rows_u8(image: np.ndarray, flow: np.ndarray, mu: float) -> np.ndarray:
    """Warp, quantize to uint8, and lay out PNG scanlines in one pass.

    Returns (H, 1+3W) uint8 rows: a zero filter byte, then RGB triples.
    Bitwise-equal to ``warp_bilinear`` followed by clip/rint quantization,
    fused so the interactive re-warp path touches memory once.
    """
    if image.shape[0] != 3:
        raise ValueError(f"expected an RGB (3, H, W) image, got {image.shape}")
    if USE_NUMBA and image.dtype == np.float32 and flow.dtype == np.float32:
        return numba_impl.warp_rows_u8_f32(_f32(image), _f32(flow), np.float32(mu))
    return numpy_impl.warp_rows_u8(image, flow, mu)


def segment_alpha(
    h: int, w: int, ax: float, ay: float, bx: float, by: float, half_width: float
) -> np.ndarray:
    """Anti-aliased coverage of a capsule of the given half-width around segment (a, b)."""
    if USE_NUMBA:
        return numba_impl.segment_alpha_f32(
            h, w, np.float32(ax), np.float32(ay), np.float32(bx), np.float32(by), np.float32(half_width)
        )
    return numpy_impl.segment_alpha(h, w, ax, ay, bx, by, half_width)
