"""Encoder-decoder flow generator.

A U-Net trunk maps the RGB image stacked with the skeleton maps to a 2-channel
deformation flow at input resolution. Attention sits at the bottleneck and
comes in three flavors selected by config: structure-affinity attention (the
full model), plain softmax self-attention (affinity ablation), or none.
The flow head is zero-initialized, so a freshly built generator emits the
all-zero flow — training starts from the identity warp.

Ablation variants are pure configuration:

* full  — input_channels=15, attention_mode="sasa"
* wo_sp — input_channels=3,  attention_mode="self_attention_only"
* wo_aff— input_channels=15, attention_mode="self_attention_only"
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .errors import ConfigError
from .priors import SkeletonMaps, StructureHeatmaps
from .sasa import SASABlock, SelfAttentionBlock
from .topology import NUM_SKELETONS
from .warp import FlowField

ATTENTION_MODES = ("sasa", "self_attention_only", "none")

ABLATION_VARIANTS = {
    "full": dict(input_channels=15, attention_mode="sasa"),
    "wo_sp": dict(input_channels=3, attention_mode="self_attention_only"),
    "wo_aff": dict(input_channels=15, attention_mode="self_attention_only"),
}


@dataclass
class GeneratorConfig:
    input_channels: int = 15
    base_channels: int = 32
    depth: int = 4
    attention_mode: str = "sasa"
    use_skip_connections: bool = True
    input_size: int = 256

    def __post_init__(self):
        if self.input_channels not in (3, 3 + NUM_SKELETONS):
            raise ConfigError(
                f"input_channels must be 3 or {3 + NUM_SKELETONS}, got {self.input_channels}"
            )
        if self.attention_mode not in ATTENTION_MODES:
            raise ConfigError(
                f"attention_mode must be one of {ATTENTION_MODES}, got {self.attention_mode!r}"
            )
        if self.depth < 1 or self.base_channels < 1:
            raise ConfigError("depth and base_channels must be positive")
        if self.input_size % (1 << self.depth) != 0:
            raise ConfigError(
                f"input_size {self.input_size} not divisible by 2^depth = {1 << self.depth}"
            )

    @property
    def bottleneck_size(self) -> int:
        return self.input_size >> self.depth

    @property
    def wants_skeletons(self) -> bool:
        return self.input_channels > 3

    @property
    def wants_heatmaps(self) -> bool:
        return self.attention_mode == "sasa"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        return cls(**d)


def ablation_config(variant: str, **overrides) -> GeneratorConfig:
    if variant not in ABLATION_VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; pick from {sorted(ABLATION_VARIANTS)}")
    kw = dict(ABLATION_VARIANTS[variant])
    kw.update(overrides)
    return GeneratorConfig(**kw)


class ConvBlock(nn.Module):
    """Two 3x3 convs, each followed by instance norm and LeakyReLU(0.1)."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(c_in, c_out, 3, padding=1),
            nn.InstanceNorm2d(c_out, affine=True),
            nn.LeakyReLU(0.1, inplace=True),
            nn.Conv2d(c_out, c_out, 3, padding=1),
            nn.InstanceNorm2d(c_out, affine=True),
            nn.LeakyReLU(0.1, inplace=True),
        )

    def forward(self, x):
        return self.body(x)


class FlowGenerator(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        base, depth = config.base_channels, config.depth
        chans = [min(base << i, base * 8) for i in range(depth + 1)]

        self.stem = ConvBlock(config.input_channels, chans[0])
        self.downs = nn.ModuleList()
        for i in range(depth):
            self.downs.append(nn.Sequential(
                nn.Conv2d(chans[i], chans[i + 1], 3, stride=2, padding=1),
                nn.InstanceNorm2d(chans[i + 1], affine=True),
                nn.LeakyReLU(0.1, inplace=True),
                ConvBlock(chans[i + 1], chans[i + 1]),
            ))

        self.ups = nn.ModuleList()
        self.up_blocks = nn.ModuleList()
        for i in range(depth, 0, -1):
            self.ups.append(nn.Sequential(
                nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
                nn.Conv2d(chans[i], chans[i - 1], 3, padding=1),
                nn.InstanceNorm2d(chans[i - 1], affine=True),
                nn.LeakyReLU(0.1, inplace=True),
            ))
            skip = chans[i - 1] if config.use_skip_connections else 0
            self.up_blocks.append(ConvBlock(chans[i - 1] + skip, chans[i - 1]))

        self.flow_head = nn.Conv2d(chans[0], 2, 3, padding=1)
        nn.init.zeros_(self.flow_head.weight)
        nn.init.zeros_(self.flow_head.bias)

        # Attention is constructed last on purpose: the trunk then draws the
        # same RNG stream under every attention_mode, so models built from
        # one seed differ only in the attention block itself.
        if config.attention_mode == "sasa":
            self.attention = SASABlock(chans[depth])
        elif config.attention_mode == "self_attention_only":
            self.attention = SelfAttentionBlock(chans[depth])
        else:
            self.attention = None

    def forward(self, image, skeletons=None, heatmaps=None):
        """image (B,3,H,W); skeletons (B,12,H,W) and heatmaps (B,5,h,w) as configured."""
        cfg = self.config
        if cfg.wants_skeletons:
            if skeletons is None:
                raise ConfigError("generator config expects skeleton maps, got none")
            x = torch.cat([image, skeletons], dim=1)
        else:
            x = image
        if x.shape[1] != cfg.input_channels:
            raise ConfigError(
                f"assembled input has {x.shape[1]} channels, config expects {cfg.input_channels}"
            )
        if cfg.wants_heatmaps and heatmaps is None:
            raise ConfigError("attention_mode='sasa' requires structure heatmaps")

        x = self.stem(x)
        skips = [x]
        for down in self.downs:
            x = down(x)
            skips.append(x)

        if self.attention is not None:
            x = self.attention(x, heatmaps) if cfg.wants_heatmaps else self.attention(x)

        for i, (up, block) in enumerate(zip(self.ups, self.up_blocks)):
            x = up(x)
            if self.config.use_skip_connections:
                x = torch.cat([x, skips[len(self.downs) - 1 - i]], dim=1)
            x = block(x)
        return self.flow_head(x)


def init_generator(config: GeneratorConfig, seed: int) -> FlowGenerator:
    """Build a generator with weights fully determined by (config, seed)."""
    torch.manual_seed(seed)
    model = FlowGenerator(config)
    model.train(False)
    return model


def predict_flow(
    model: FlowGenerator,
    image: np.ndarray,
    skeletons: Optional[SkeletonMaps] = None,
    heatmaps: Optional[StructureHeatmaps] = None,
) -> FlowField:
    """Numpy-in / numpy-out forward pass for inference paths."""
    cfg = model.config
    t_img = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32))[None]
    t_skel = None
    t_heat = None
    if skeletons is not None:
        t_skel = torch.from_numpy(np.ascontiguousarray(skeletons.data))[None]
    if heatmaps is not None:
        t_heat = torch.from_numpy(np.ascontiguousarray(heatmaps.data))[None]
    if cfg.wants_heatmaps and t_heat is None:
        raise ConfigError("attention_mode='sasa' requires structure heatmaps")
    with torch.no_grad():
        flow = model(t_img, t_skel, t_heat)
    return FlowField(flow[0].numpy())
