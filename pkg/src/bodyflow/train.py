"""Training loop, checkpoint persistence, evaluation, ablation orchestration."""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from . import containers
from .data import AugmentParams, SamplePair, augment
from .errors import ConfigError, IncompatibleCheckpointError, NumericError
from .generator import (
    ABLATION_VARIANTS,
    FlowGenerator,
    GeneratorConfig,
    ablation_config,
    init_generator,
)
from .losses import LossWeights, loss_flow, loss_img, loss_orth, paf_vector_sum, total_loss
from .metrics import MetricReport, epe, psnr, ssim
from .priors import encode_structure
from .warp import warp_torch

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    """Everything a training run needs; mirrors 1:1 into JSON."""

    max_steps: int = 2000
    learning_rate: float = 2e-5
    batch_size: int = 4
    seed: int = 0
    ablation: str = "full"
    generator: Optional[GeneratorConfig] = None  # None: derived from `ablation`
    weights: LossWeights = field(default_factory=LossWeights)
    val_every: int = 100
    early_stop_epe: Optional[float] = None
    augment: bool = False
    hflip_prob: float = 0.5
    rotation_max_deg: float = 15.0
    crop_min_scale: float = 0.85

    def __post_init__(self):
        if self.max_steps <= 0 or self.batch_size <= 0 or self.val_every <= 0:
            raise ConfigError("max_steps, batch_size and val_every must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.ablation not in ABLATION_VARIANTS:
            raise ConfigError(
                f"ablation must be one of {sorted(ABLATION_VARIANTS)}, got {self.ablation!r}"
            )

    def generator_config(self) -> GeneratorConfig:
        if self.generator is not None:
            want = ABLATION_VARIANTS[self.ablation]
            for key, value in want.items():
                if getattr(self.generator, key) != value:
                    raise ConfigError(
                        f"generator config has {key}={getattr(self.generator, key)!r} "
                        f"but ablation {self.ablation!r} requires {value!r}"
                    )
            return self.generator
        return ablation_config(self.ablation)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["generator"] = self.generator.to_dict() if self.generator else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if d.get("generator"):
            d["generator"] = GeneratorConfig.from_dict(d["generator"])
        if d.get("weights"):
            d["weights"] = LossWeights(**d["weights"])
        return cls(**d)


@dataclass
class TrainResult:
    model: FlowGenerator
    history: List[dict]
    steps_run: int
    val_epe: Optional[float]
    stopped_early: bool


def _pair_tensors(pair: SamplePair, bottleneck: int):
    heat = encode_structure(pair.pafs, (bottleneck, bottleneck)).data
    return {
        "image": torch.from_numpy(pair.source),
        "target": torch.from_numpy(pair.target),
        "skeletons": torch.from_numpy(pair.skeletons.data),
        "heatmaps": torch.from_numpy(heat),
        "gt_flow": torch.from_numpy(pair.gt_flow.data),
        "limb_sum": torch.from_numpy(paf_vector_sum(pair.pafs)),
    }


def _stack(batch: Sequence[dict]) -> Dict[str, torch.Tensor]:
    return {k: torch.stack([b[k] for b in batch]) for k in batch[0]}


def _forward(model: FlowGenerator, batch: Dict[str, torch.Tensor]) -> torch.Tensor:
    cfg = model.config
    kwargs = {}
    if cfg.wants_skeletons:
        kwargs["skeletons"] = batch["skeletons"]
    if cfg.wants_heatmaps:
        kwargs["heatmaps"] = batch["heatmaps"]
    return model(batch["image"], **kwargs)


def train(
    config: TrainConfig,
    train_pairs: Sequence[SamplePair],
    val_pairs: Sequence[SamplePair] = (),
    log_path=None,
    checkpoint_path=None,
) -> TrainResult:
    """Adam on the weighted three-part loss, flow multiplier fixed at 1.

    Deterministic given the seed (single-process loading). Emits one metrics
    record per step — ``{step, l_img, l_flow, l_orth, total}``, plus ``epe``
    at validation steps — to ``history`` and, when given, ``log_path`` as
    JSON lines. A non-finite loss aborts with the step, the batch's sample
    ids, and each loss part.
    """
    if not train_pairs:
        raise ConfigError("train: empty training set")
    gen_cfg = config.generator_config()
    size = train_pairs[0].resolution[0]
    if gen_cfg.input_size != size:
        gen_cfg = replace(gen_cfg, input_size=size)
    model = init_generator(gen_cfg, config.seed)
    model.train(True)
    opt = torch.optim.Adam(
        model.parameters(), lr=config.learning_rate, betas=(0.9, 0.999), eps=1e-8
    )
    rng = np.random.default_rng(config.seed)
    bottleneck = gen_cfg.bottleneck_size

    cache: List[Optional[dict]] = [None] * len(train_pairs)

    def tensors_for(index: int) -> dict:
        if config.augment:
            params = AugmentParams.sample(
                int(rng.integers(0, 2**31)),
                hflip_prob=config.hflip_prob,
                rotation_max_deg=config.rotation_max_deg,
                crop_min_scale=config.crop_min_scale,
            )
            return _pair_tensors(augment(train_pairs[index], params), bottleneck)
        if cache[index] is None:
            cache[index] = _pair_tensors(train_pairs[index], bottleneck)
        return cache[index]

    history: List[dict] = []
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    val_epe: Optional[float] = None
    stopped_early = False
    steps_run = 0
    try:
        for step in range(config.max_steps):
            idx = rng.integers(0, len(train_pairs), config.batch_size)
            batch = _stack([tensors_for(int(i)) for i in idx])
            pred = _forward(model, batch)
            warped = warp_torch(batch["image"], pred, 1.0)
            l_img = loss_img(warped, batch["target"])
            l_flow = loss_flow(pred, batch["gt_flow"])
            l_orth = loss_orth(pred, batch["limb_sum"])
            loss = total_loss(l_img, l_flow, l_orth, config.weights)
            if not math.isfinite(loss.item()):
                ids = [train_pairs[int(i)].id for i in idx]
                raise NumericError(
                    f"non-finite loss at step {step}: total={loss.item()}, "
                    f"l_img={l_img.item()}, l_flow={l_flow.item()}, "
                    f"l_orth={l_orth.item()}, batch={ids}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            steps_run = step + 1
            record = {
                "step": step,
                "l_img": l_img.item(),
                "l_flow": l_flow.item(),
                "l_orth": l_orth.item(),
                "total": loss.item(),
            }
            if val_pairs and (steps_run % config.val_every == 0 or steps_run == config.max_steps):
                val_epe = evaluate_epe(model, val_pairs)
                record["epe"] = val_epe
                model.train(True)
            history.append(record)
            if log_file:
                log_file.write(json.dumps(record) + "\n")
            if (
                config.early_stop_epe is not None
                and val_epe is not None
                and val_epe < config.early_stop_epe
            ):
                stopped_early = True
                log.info("early stop at step %d: val EPE %.4f", step, val_epe)
                break
    finally:
        if log_file:
            log_file.close()
    model.train(False)
    if val_pairs and val_epe is None:
        val_epe = evaluate_epe(model, val_pairs)
    if checkpoint_path:
        save_checkpoint(model, opt, steps_run, config, checkpoint_path)
    return TrainResult(model, history, steps_run, val_epe, stopped_early)


def evaluate_epe(model: FlowGenerator, pairs: Sequence[SamplePair], batch_size: int = 8) -> float:
    """Mean end-point error of predicted vs ground-truth flow over ``pairs``."""
    was_training = model.training
    model.train(False)
    bottleneck = model.config.bottleneck_size
    values = []
    with torch.no_grad():
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start : start + batch_size]
            batch = _stack([_pair_tensors(p, bottleneck) for p in chunk])
            pred = _forward(model, batch)
            for i, pair in enumerate(chunk):
                values.append(epe(pred[i].numpy(), pair.gt_flow.data))
    model.train(was_training)
    return float(np.mean(values))


def evaluate_metrics(model: FlowGenerator, pairs: Sequence[SamplePair]) -> MetricReport:
    """SSIM/PSNR of the mu=1 warped output against the target, plus flow EPE."""
    was_training = model.training
    model.train(False)
    bottleneck = model.config.bottleneck_size
    report = MetricReport()
    with torch.no_grad():
        for pair in pairs:
            batch = _stack([_pair_tensors(pair, bottleneck)])
            pred = _forward(model, batch)
            warped = warp_torch(batch["image"], pred, 1.0)[0].numpy()
            report.add(
                ssim=ssim(warped, pair.target),
                psnr=psnr(warped, pair.target),
                epe=epe(pred[0].numpy(), pair.gt_flow.data),
            )
    model.train(was_training)
    return report


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(
    model: FlowGenerator,
    optimizer: Optional[torch.optim.Optimizer],
    step: int,
    config: TrainConfig,
    path,
) -> None:
    """Persist weights, optimizer state, step counter and config snapshot."""
    tensors: Dict[str, np.ndarray] = {}
    for name, value in model.state_dict().items():
        tensors[f"model/{name}"] = value.detach().numpy()
    opt_meta = None
    if optimizer is not None:
        state = optimizer.state_dict()
        for pid, slots in state["state"].items():
            for slot, value in slots.items():
                if isinstance(value, torch.Tensor):
                    tensors[f"opt/{pid}/{slot}"] = value.detach().numpy()
        opt_meta = {
            "param_groups": state["param_groups"],
            "scalar_state": {
                str(pid): {
                    slot: value
                    for slot, value in slots.items()
                    if not isinstance(value, torch.Tensor)
                }
                for pid, slots in state["state"].items()
            },
        }
    containers.write_container(
        path,
        tensors,
        meta={
            "kind": "checkpoint",
            "checkpoint_version": CHECKPOINT_VERSION,
            "step": step,
            "train_config": config.to_dict(),
            "generator_config": model.config.to_dict(),
            "optimizer": opt_meta,
        },
    )


@dataclass
class LoadedCheckpoint:
    model: FlowGenerator
    config: TrainConfig
    step: int
    optimizer_state: Optional[dict]

    def restore_optimizer(self, optimizer: torch.optim.Optimizer) -> None:
        if self.optimizer_state is None:
            raise ConfigError("checkpoint holds no optimizer state")
        optimizer.load_state_dict(self.optimizer_state)


def load_checkpoint(path) -> LoadedCheckpoint:
    """Rebuild the generator (and optimizer state) from a container file."""
    tensors, meta = containers.read_container(path)
    version = meta.get("checkpoint_version")
    if version != CHECKPOINT_VERSION:
        raise IncompatibleCheckpointError(
            f"{path}: checkpoint version {version!r}, expected {CHECKPOINT_VERSION}"
        )
    config = TrainConfig.from_dict(meta["train_config"])
    gen_cfg = GeneratorConfig.from_dict(meta["generator_config"])
    model = init_generator(gen_cfg, config.seed)
    state = {
        name[len("model/") :]: torch.from_numpy(arr)
        for name, arr in tensors.items()
        if name.startswith("model/")
    }
    model.load_state_dict(state)
    model.train(False)
    opt_state = None
    opt_meta = meta.get("optimizer")
    if opt_meta:
        slots: Dict[int, dict] = {}
        for name, arr in tensors.items():
            if not name.startswith("opt/"):
                continue
            _, pid, slot = name.split("/", 2)
            slots.setdefault(int(pid), {})[slot] = torch.from_numpy(arr)
        for pid, scalars in opt_meta["scalar_state"].items():
            slots.setdefault(int(pid), {}).update(scalars)
        # JSON has no tuples; betas must come back as one
        groups = [
            dict(g, betas=tuple(g["betas"])) if "betas" in g else dict(g)
            for g in opt_meta["param_groups"]
        ]
        opt_state = {"state": slots, "param_groups": groups}
    return LoadedCheckpoint(model, config, int(meta["step"]), opt_state)


def inspect_checkpoint(path) -> dict:
    """Header-only view: weight names/shapes and config, payload untouched."""
    return containers.inspect_container(path)


# ---------------------------------------------------------------------------
# Ablations

ABLATION_LABELS = {
    "wo_sp": "w/o SP (RGB only)",
    "wo_aff": "w/o AFF (RGB+SP)",
    "full": "Full (RGB+SP+AFF)",
}
ABLATION_ORDER = ("wo_sp", "wo_aff", "full")


@dataclass
class AblationReport:
    results: Dict[str, MetricReport]
    epe_by_variant: Dict[str, float]

    def table(self) -> str:
        """Comparison table: Method | SSIM (up) | PSNR (up) | LPIPS (down) | EPE (down).

        LPIPS needs a pretrained perceptual network, which this package does
        not ship; the column is kept for layout parity and marked n/a.
        """
        rows = [("Method", "SSIM↑", "PSNR↑", "LPIPS↓", "EPE↓")]
        for variant in ABLATION_ORDER:
            report = self.results[variant]
            rows.append(
                (
                    ABLATION_LABELS[variant],
                    f"{report.mean_ssim:.4f}",
                    f"{report.mean_psnr:.4f}",
                    "n/a",
                    f"{report.mean_epe:.3f}",
                )
            )
        widths = [max(len(r[c]) for r in rows) for c in range(5)]
        lines = []
        for i, row in enumerate(rows):
            lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)))
            if i == 0:
                lines.append("  ".join("-" * widths[c] for c in range(5)))
        return "\n".join(lines)


def run_ablation_suite(
    base: TrainConfig,
    train_pairs: Sequence[SamplePair],
    val_pairs: Sequence[SamplePair],
    checkpoint_dir=None,
    generator_overrides: Optional[dict] = None,
) -> AblationReport:
    """Train {w/o SP, w/o AFF, full} under one seed and budget, then compare.

    ``generator_overrides`` (e.g. ``{"base_channels": 8}``) applies on top of
    each variant's own input/attention settings, for scaled-down runs.
    """
    results: Dict[str, MetricReport] = {}
    epes: Dict[str, float] = {}
    for variant in ABLATION_ORDER:
        gen = ablation_config(variant, **generator_overrides) if generator_overrides else None
        config = replace(base, ablation=variant, generator=gen)
        ckpt = None
        if checkpoint_dir is not None:
            ckpt = str(checkpoint_dir) + f"/{variant}.bft"
        log.info("ablation %s: training %d steps", variant, config.max_steps)
        result = train(config, train_pairs, val_pairs, checkpoint_path=ckpt)
        report = evaluate_metrics(result.model, list(val_pairs))
        results[variant] = report
        epes[variant] = report.mean_epe
        log.info(
            "ablation %s: EPE %.3f SSIM %.4f PSNR %.2f",
            variant, report.mean_epe, report.mean_ssim, report.mean_psnr,
        )
    return AblationReport(results, epes)
