"""Flow fields, warping with a runtime multiplier, and flow IO/visualization.

Flow convention, used everywhere in the package: **backward sampling in
pixels** — the output at pixel p is the source image sampled at p + mu*F(p),
with F stored as a (2, H, W) array in (dx, dy) channel order. The multiplier
mu scales the deformation at apply time; mu=0 returns the input bit-exactly,
negative mu reverses the edit direction.
"""

import logging
import math
import struct
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import FlowFormatError
from .kernels import resize_bilinear, warp_bilinear

log = logging.getLogger(__name__)

FLO_MAGIC = 202021.25


@dataclass
class FlowField:
    """Per-pixel backward displacement in pixels at its own resolution."""

    data: np.ndarray  # (2, H, W) float32, channels (dx, dy)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[0] != 2:
            raise ValueError(f"flow must be (2, H, W), got {self.data.shape}")

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    def scaled(self, mu: float) -> "FlowField":
        return FlowField(self.data * np.float32(mu))


def validate_mu(mu: float, strict: bool = False) -> float:
    """Check the multiplier. |mu| > 1 warns; under ``strict`` it raises."""
    mu = float(mu)
    if not math.isfinite(mu):
        raise ValueError(f"mu must be finite, got {mu}")
    if abs(mu) > 1.0:
        if strict:
            raise ValueError(f"mu must lie in [-1, 1], got {mu}")
        log.warning("mu=%.3f is outside [-1, 1]; extrapolating the learned edit", mu)
    return mu


def warp(image: np.ndarray, flow, mu: float = 1.0) -> np.ndarray:
    """Backward-warp ``image`` (C,H,W) by ``mu`` times the flow.

    Bilinear sampling with clamp-to-edge borders. mu=0 and F=0 are exact
    identities; warp(I, F, mu) == warp(I, mu*F, 1) bit-exactly.
    """
    f = flow.data if isinstance(flow, FlowField) else np.asarray(flow)
    image = np.asarray(image)
    if image.ndim != 3:
        raise ValueError(f"image must be (C, H, W), got {image.shape}")
    if f.shape[1:] != image.shape[1:]:
        raise ValueError(
            f"flow resolution {f.shape[1:]} != image resolution {image.shape[1:]}"
        )
    return warp_bilinear(image, f, mu)


def warp_torch(image, flow, mu=1.0):
    """Differentiable warp for training: torch tensors (B,C,H,W) / (B,2,H,W).

    Same sampling rule as :func:`warp` (lerp-form bilinear, clamp-to-edge),
    so mu=0 stays a bit-exact identity even inside the autograd graph.
    Gradients propagate to both the image and the flow.
    """
    import torch

    b, c, h, w = image.shape
    xs = torch.arange(w, dtype=image.dtype, device=image.device)
    ys = torch.arange(h, dtype=image.dtype, device=image.device)
    sx = (xs.view(1, 1, w) + mu * flow[:, 0]).clamp(0, w - 1)
    sy = (ys.view(1, h, 1) + mu * flow[:, 1]).clamp(0, h - 1)
    x0f = sx.floor()
    y0f = sy.floor()
    tx = (sx - x0f).unsqueeze(1)
    ty = (sy - y0f).unsqueeze(1)
    x0 = x0f.long()
    y0 = y0f.long()
    x1 = (x0 + 1).clamp(max=w - 1)
    y1 = (y0 + 1).clamp(max=h - 1)

    flat = image.reshape(b, c, h * w)

    def gather(yi, xi):
        idx = (yi * w + xi).reshape(b, 1, h * w).expand(b, c, h * w)
        return flat.gather(2, idx).reshape(b, c, h, w)

    v00 = gather(y0, x0)
    v01 = gather(y0, x1)
    v10 = gather(y1, x0)
    v11 = gather(y1, x1)
    top = v00 + tx * (v01 - v00)
    bot = v10 + tx * (v11 - v10)
    return top + ty * (bot - top)


def upsample_flow(flow: FlowField, target: Tuple[int, int]) -> FlowField:
    """Bilinearly upsample a flow and rescale its vectors to target units.

    dx is multiplied by W_target/W_source and dy by H_target/H_source so the
    displacements stay correct measured in target pixels.
    """
    src_h, src_w = flow.resolution
    out_h, out_w = target
    if out_h < src_h or out_w < src_w:
        raise ValueError(f"target {target} smaller than source {flow.resolution}")
    up = resize_bilinear(flow.data, out_h, out_w)
    up[0] *= np.float32(out_w / src_w)
    up[1] *= np.float32(out_h / src_h)
    return FlowField(up)


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB, all components in [0, 1]. Returns (3, H, W)."""
    i = np.floor(h * 6.0).astype(np.int64) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b]).astype(np.float32)


def visualize_flow(flow: FlowField) -> np.ndarray:
    """Color-wheel rendering: hue = direction, saturation = magnitude.

    Magnitude is normalized by its 99th percentile (robust to outliers) and
    clipped to 1; value is fixed at 1, so zero flow renders white.
    """
    dx = flow.data[0].astype(np.float64)
    dy = flow.data[1].astype(np.float64)
    mag = np.hypot(dx, dy)
    scale = np.percentile(mag, 99.0)
    sat = np.clip(mag / scale, 0.0, 1.0) if scale > 0 else np.zeros_like(mag)
    hue = (np.arctan2(dy, dx) / (2.0 * np.pi)) % 1.0
    return _hsv_to_rgb(hue, sat, np.ones_like(sat))


def flo_bytes(flow: FlowField) -> bytes:
    """Middlebury .flo encoding: float32 magic, int32 w/h, interleaved (dx, dy)."""
    h, w = flow.resolution
    interleaved = np.ascontiguousarray(
        flow.data.transpose(1, 2, 0), dtype=np.float32
    )
    return struct.pack("<f", FLO_MAGIC) + struct.pack("<ii", w, h) + interleaved.tobytes()


def write_flo(path, flow: FlowField) -> None:
    with open(path, "wb") as f:
        f.write(flo_bytes(flow))


def read_flo(path) -> FlowField:
    """Read a Middlebury .flo file; bit-exact inverse of :func:`write_flo`."""
    with open(path, "rb") as f:
        head = f.read(12)
        if len(head) < 12:
            raise FlowFormatError(f"{path}: truncated header")
        (magic,) = struct.unpack("<f", head[:4])
        if magic != np.float32(FLO_MAGIC):
            raise FlowFormatError(f"{path}: bad magic {magic!r}, not a .flo file")
        w, h = struct.unpack("<ii", head[4:12])
        if w <= 0 or h <= 0 or w > 10 ** 6 or h > 10 ** 6:
            raise FlowFormatError(f"{path}: implausible size {w}x{h}")
        payload = f.read(8 * w * h)
        if len(payload) != 8 * w * h:
            raise FlowFormatError(
                f"{path}: truncated payload ({len(payload)} of {8 * w * h} bytes)"
            )
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, 2)
    return FlowField(np.ascontiguousarray(data.transpose(2, 0, 1)))
