"""End-to-end inference: keypoints + image in, full-resolution flow out.

The generator works at its own square input size; everything around it is
resampling. The flow is computed once per image and the retouch amount is a
pure re-warp — scaling the cached flow by mu costs one bilinear pass, which
is what lets interactive callers sweep mu cheaply.
"""

import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import resize_flow
from .errors import SchemaError
from .generator import FlowGenerator, ablation_config, init_generator, predict_flow
from .kernels import resize_bilinear
from .priors import KeypointSet, build_pafs, encode_structure, rasterize_skeletons
from .train import load_checkpoint
from .warp import FlowField, warp

log = logging.getLogger(__name__)


@dataclass
class FlowStats:
    """Summary of a computed flow, cheap enough to put in every response."""

    width: int
    height: int
    mean_px: float
    max_px: float

    @classmethod
    def of(cls, flow: FlowField) -> "FlowStats":
        h, w = flow.resolution
        mag = np.hypot(flow.data[0], flow.data[1])
        return cls(width=w, height=h, mean_px=float(mag.mean()), max_px=float(mag.max()))

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "mean_px": self.mean_px,
            "max_px": self.max_px,
        }


class ReshapePipeline:
    """A loaded generator plus the resampling glue around it."""

    def __init__(self, model: FlowGenerator, checkpoint_id: str = "untrained"):
        model.train(False)
        self.model = model
        self.checkpoint_id = checkpoint_id

    @classmethod
    def from_checkpoint(cls, path) -> "ReshapePipeline":
        loaded = load_checkpoint(path)
        name = os.path.basename(str(path))
        return cls(loaded.model, checkpoint_id=f"{name}@step{loaded.step}")

    @classmethod
    def untrained(cls, ablation: str = "full", size: int = 256, seed: int = 0,
                  **overrides) -> "ReshapePipeline":
        """Randomly initialized model (zero flow head): useful for wiring
        tests and demos, produces an identity edit until trained."""
        cfg = ablation_config(ablation, input_size=size, **overrides)
        return cls(init_generator(cfg, seed), checkpoint_id="untrained")

    def compute_flow(self, image: np.ndarray, kp: KeypointSet) -> FlowField:
        """Full-resolution deformation flow for one image.

        ``image`` is (3, H, W) float32 in [0, 1]; the keypoints must describe
        that same image. The model runs at its own input size; the flow is
        resampled back to (H, W) with its components rescaled to stay in
        full-resolution pixel units.
        """
        if image.ndim != 3 or image.shape[0] != 3:
            raise SchemaError(f"image must be (3, H, W), got {image.shape}")
        h, w = image.shape[1], image.shape[2]
        if (kp.image_width, kp.image_height) != (w, h):
            raise SchemaError(
                f"keypoints describe a {kp.image_width}x{kp.image_height} image, "
                f"got a {w}x{h} upload"
            )
        cfg = self.model.config
        s = cfg.input_size
        small = resize_bilinear(np.ascontiguousarray(image, dtype=np.float32), s, s)
        kp_s = kp.scaled(s / w, s / h, s, s)
        skeletons = rasterize_skeletons(kp_s, (s, s)) if cfg.wants_skeletons else None
        heatmaps = None
        if cfg.wants_heatmaps:
            pafs = build_pafs(kp_s, (s, s))
            heatmaps = encode_structure(pafs, (cfg.bottleneck_size, cfg.bottleneck_size))
        flow = predict_flow(self.model, small, skeletons, heatmaps)
        if (h, w) != (s, s):
            flow = resize_flow(flow, (h, w))
        return flow

    @staticmethod
    def reshape(image: np.ndarray, flow: FlowField, mu: float) -> np.ndarray:
        """Re-warp only: sample the image through mu times the cached flow."""
        return warp(image, flow, mu)

    def process(self, image: np.ndarray, kp: KeypointSet, mu: float = 1.0) -> np.ndarray:
        """One-shot convenience: compute the flow, then warp with it."""
        return self.reshape(image, self.compute_flow(image, kp), mu)
