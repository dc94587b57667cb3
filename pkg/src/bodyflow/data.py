"""Dataset plumbing: manifests, sample loading, augmentation, synthetic pairs.

A training sample couples a source image with a "retouched" target and the
backward deformation flow between them, plus the structural priors rendered
at the same resolution. Real data brings its own targets and flows; the
synthetic generator builds analytic limb-anchored flows so that end-to-end
training is verifiable without any external flow estimator.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image

from . import containers
from .errors import IncompatibleCheckpointError, SchemaError
from .kernels import affine_sample, resize_bilinear, segment_alpha, warp_bilinear
from .priors import (
    KeypointSet,
    PAFStack,
    SkeletonMaps,
    build_pafs,
    ingest_keypoints,
    rasterize_skeletons,
)
from .topology import (
    HFLIP_PAF_PERM,
    HFLIP_SKELETON_PERM,
    JOINT_INDEX,
    PAF_LIMBS,
    SKELETON_EDGES,
)
from .warp import FlowField, read_flo

log = logging.getLogger(__name__)

TRAIN_SIZE = 256
CACHE_VERSION = 1


# ---------------------------------------------------------------------------
# Manifests


@dataclass
class SampleDescriptor:
    id: str
    source_path: str
    keypoints_path: str
    target_path: Optional[str] = None
    gt_flow_path: Optional[str] = None
    split: str = "train"
    flow_negate: bool = False


@dataclass
class ManifestLoad:
    """Validated descriptors plus a report of rows that had to be skipped."""

    descriptors: List[SampleDescriptor] = field(default_factory=list)
    skipped: List[dict] = field(default_factory=list)

    def __iter__(self):
        return iter(self.descriptors)

    def __len__(self):
        return len(self.descriptors)


_MANIFEST_PATH_FIELDS = ("source_path", "keypoints_path", "target_path", "gt_flow_path")


def load_manifest(path, split: Optional[str] = None) -> ManifestLoad:
    """Read a line-delimited JSON manifest, validating referenced files.

    Rows whose required files are missing (or that fail to parse) are
    collected in ``skipped`` with a reason instead of raising; valid rows
    keep their manifest order. Relative paths resolve against the manifest's
    directory. ``split`` filters rows by their split tag when given.
    """
    base = os.path.dirname(os.path.abspath(path))
    out = ManifestLoad()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                out.skipped.append({"line": lineno, "reason": f"bad JSON: {exc}"})
                continue
            missing = [k for k in ("id", "source_path", "keypoints_path") if k not in row]
            if missing:
                out.skipped.append(
                    {"line": lineno, "reason": f"missing fields: {', '.join(missing)}"}
                )
                continue
            desc = SampleDescriptor(
                id=str(row["id"]),
                source_path=row["source_path"],
                keypoints_path=row["keypoints_path"],
                target_path=row.get("target_path"),
                gt_flow_path=row.get("gt_flow_path"),
                split=row.get("split", "train"),
                flow_negate=bool(row.get("flow_negate", False)),
            )
            for name in _MANIFEST_PATH_FIELDS:
                p = getattr(desc, name)
                if p is None:
                    continue
                if not os.path.isabs(p):
                    p = os.path.join(base, p)
                    setattr(desc, name, p)
                if not os.path.isfile(p):
                    out.skipped.append(
                        {"line": lineno, "id": desc.id, "reason": f"{name} not found: {p}"}
                    )
                    desc = None
                    break
            if desc is None:
                continue
            if split is not None and desc.split != split:
                continue
            out.descriptors.append(desc)
    for item in out.skipped:
        log.warning("manifest %s line %s skipped: %s", path, item.get("line"), item["reason"])
    return out


# ---------------------------------------------------------------------------
# Images


def load_image(path) -> np.ndarray:
    """Read PNG/JPEG into a (3, H, W) float32 array in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / np.float32(255.0)
    return arr.transpose(2, 0, 1).copy()


def save_image(arr: np.ndarray, path) -> None:
    """Write a (3, H, W) float array in [0, 1] as PNG (lossless 8-bit)."""
    u8 = image_to_u8(arr)
    Image.fromarray(u8.transpose(1, 2, 0), "RGB").save(path, format="PNG")


def image_to_u8(arr: np.ndarray) -> np.ndarray:
    clipped = np.clip(np.asarray(arr, dtype=np.float32), 0.0, 1.0)
    return np.rint(clipped * np.float32(255.0)).astype(np.uint8)


# ---------------------------------------------------------------------------
# Sample pairs


@dataclass
class SamplePair:
    """One training example: images, priors, and ground-truth flow, all at
    a single square resolution."""

    source: np.ndarray  # (3, S, S) float32 in [0, 1]
    target: np.ndarray  # (3, S, S) float32 in [0, 1]
    skeletons: SkeletonMaps
    pafs: PAFStack
    gt_flow: FlowField
    id: str

    def __post_init__(self):
        s = self.source.shape[1:]
        parts = {
            "target": self.target.shape[1:],
            "skeletons": self.skeletons.data.shape[1:],
            "pafs": self.pafs.magnitude.shape[1:],
            "gt_flow": self.gt_flow.data.shape[1:],
        }
        for name, shape in parts.items():
            if shape != s:
                raise SchemaError(
                    f"sample {self.id}: {name} resolution {shape} != source {s}"
                )
        if not np.isfinite(self.gt_flow.data).all():
            raise SchemaError(f"sample {self.id}: non-finite ground-truth flow")

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.source.shape[1], self.source.shape[2]


def resize_flow(flow: FlowField, size: Tuple[int, int]) -> FlowField:
    """Resample a flow to a new resolution, rescaling the vector components."""
    h, w = size
    src_h, src_w = flow.resolution
    data = resize_bilinear(flow.data, h, w).copy()
    data[0] *= np.float32(w / src_w)
    data[1] *= np.float32(h / src_h)
    return FlowField(data)


def import_gt_flow(path, negate: bool = False) -> FlowField:
    """Read a Middlebury flow file, optionally flipping it into the backward
    convention (the manifest's ``flow_negate`` flag)."""
    flow = read_flo(path)
    if negate:
        flow = FlowField(-flow.data)
    return flow


def _crop_image(arr: np.ndarray, box: Tuple[float, float, float, float]) -> np.ndarray:
    x, y, w, h = (int(round(v)) for v in box)
    return arr[:, y : y + h, x : x + w]


def load_sample(desc: SampleDescriptor, size: int = TRAIN_SIZE) -> SamplePair:
    """Materialize one descriptor: crop, resize, priors, ground-truth flow.

    The keypoint file's crop box (when present) is applied to images and
    joints before the resize to ``size``. A missing target is synthesized by
    warping the source with the ground-truth flow, which is how the pairs
    are defined in the first place.
    """
    with open(desc.keypoints_path, "rb") as fh:
        kp = ingest_keypoints(fh.read())
    source = load_image(desc.source_path)
    target = load_image(desc.target_path) if desc.target_path else None
    if kp.crop_box is not None:
        x, y, w, h = kp.crop_box
        source = _crop_image(source, kp.crop_box)
        joints = kp.joints.copy()
        joints[:, 0] -= np.float32(x)
        joints[:, 1] -= np.float32(y)
        cw, ch = int(round(w)), int(round(h))
        # joints the crop excludes stop being observations, not errors
        outside = (
            (joints[:, 0] < 0)
            | (joints[:, 0] >= cw)
            | (joints[:, 1] < 0)
            | (joints[:, 1] >= ch)
        )
        joints[outside, 2] = 0.0
        joints[:, 0] = np.clip(joints[:, 0], 0.0, cw - 0.5)
        joints[:, 1] = np.clip(joints[:, 1], 0.0, ch - 0.5)
        kp = KeypointSet(joints, cw, ch, None, kp.image)
        if target is not None:
            target = _crop_image(target, (x, y, w, h))
    source = resize_bilinear(source, size, size)
    if target is not None:
        target = resize_bilinear(target, size, size)
    kp = kp.scaled(size / kp.image_width, size / kp.image_height, size, size)
    skel = rasterize_skeletons(kp, (size, size))
    pafs = build_pafs(kp, (size, size))
    if desc.gt_flow_path:
        flow = import_gt_flow(desc.gt_flow_path, negate=desc.flow_negate)
        if flow.resolution != (size, size):
            flow = resize_flow(flow, (size, size))
    else:
        raise SchemaError(f"sample {desc.id}: no gt_flow_path; cannot build a training pair")
    if target is None:
        target = warp_bilinear(source, flow.data, 1.0)
    return SamplePair(source, target, skel, pafs, flow, desc.id)


# ---------------------------------------------------------------------------
# Augmentation


@dataclass
class AugmentParams:
    """A concrete draw of the augmentation transform (deterministic given
    its fields; :meth:`sample` draws them from the training ranges)."""

    hflip: bool = False
    rotation_deg: float = 0.0
    crop: Optional[Tuple[float, float, float, float]] = None  # relative (x0, y0, w, h)
    seed: int = 0

    @classmethod
    def sample(
        cls,
        seed: int,
        hflip_prob: float = 0.5,
        rotation_max_deg: float = 15.0,
        crop_min_scale: float = 0.85,
    ) -> "AugmentParams":
        rng = np.random.default_rng(seed)
        hflip = bool(rng.random() < hflip_prob)
        rotation = float(rng.uniform(-rotation_max_deg, rotation_max_deg))
        scale = float(rng.uniform(crop_min_scale, 1.0))
        x0 = float(rng.uniform(0.0, 1.0 - scale))
        y0 = float(rng.uniform(0.0, 1.0 - scale))
        return cls(hflip=hflip, rotation_deg=rotation, crop=(x0, y0, scale, scale), seed=seed)


def _hflip_pair(pair: SamplePair) -> SamplePair:
    # Pure reindexing: mirror columns, permute left/right channels, negate
    # the x-component of every vector quantity.
    source = pair.source[:, :, ::-1].copy()
    target = pair.target[:, :, ::-1].copy()
    skel = pair.skeletons.data[HFLIP_SKELETON_PERM][:, :, ::-1].copy()
    vec = pair.pafs.vectors[HFLIP_PAF_PERM][:, :, ::-1, :].copy()
    vec[..., 0] = -vec[..., 0]
    mag = pair.pafs.magnitude[HFLIP_PAF_PERM][:, :, ::-1].copy()
    ori = np.arctan2(vec[..., 1], vec[..., 0]).astype(np.float32) * (mag > 0)
    flow = pair.gt_flow.data[:, :, ::-1].copy()
    flow[0] = -flow[0]
    return SamplePair(
        source,
        target,
        SkeletonMaps(skel),
        PAFStack(vec, mag, ori),
        FlowField(flow),
        pair.id,
    )


def _affine_matrices(
    size: Tuple[int, int],
    rotation_deg: float,
    crop: Optional[Tuple[float, float, float, float]],
):
    """Backward sampling matrix (output px -> source px) and the forward
    linear maps for flow vectors (rotation+scale) and PAF vectors (rotation
    only)."""
    h, w = size
    theta = math.radians(rotation_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    if crop is not None:
        rx0, ry0, rw, rh = crop
        if rw <= 0 or rh <= 0 or rw * w < 1 or rh * h < 1:
            raise ValueError(f"degenerate crop box {crop}")
        sx, sy = rw, rh  # source pixels advanced per output pixel
        tx = rx0 * w + 0.5 * sx - 0.5
        ty = ry0 * h + 0.5 * sy - 0.5
    else:
        sx = sy = 1.0
        tx = ty = 0.0
    # backward rotation about the center composed after the crop map
    r_back = np.array([[cos_t, sin_t], [-sin_t, cos_t]], dtype=np.float64)
    lin = r_back @ np.diag([sx, sy])
    off = r_back @ np.array([tx - cx, ty - cy]) + np.array([cx, cy])
    matrix = np.concatenate([lin, off[:, None]], axis=1).astype(np.float32)
    r_fwd = np.array([[cos_t, -sin_t], [sin_t, cos_t]], dtype=np.float32)
    flow_lin = (np.diag([1.0 / sx, 1.0 / sy]) @ r_fwd).astype(np.float32)
    return matrix, flow_lin, r_fwd


def _apply_linear(vec_xy: np.ndarray, lin: np.ndarray) -> np.ndarray:
    # vec_xy: (..., 2) with x first
    out = np.empty_like(vec_xy)
    out[..., 0] = lin[0, 0] * vec_xy[..., 0] + lin[0, 1] * vec_xy[..., 1]
    out[..., 1] = lin[1, 0] * vec_xy[..., 0] + lin[1, 1] * vec_xy[..., 1]
    return out


def augment(pair: SamplePair, params: AugmentParams) -> SamplePair:
    """Apply one geometric transform identically to every component.

    Raster channels are resampled with a single backward affine pass; flow
    vectors pick up the full forward linear map (rotation and crop-resize
    scale), PAF vectors the rotation only. Identity parameters return the
    pair unchanged.
    """
    if params.hflip:
        pair = _hflip_pair(pair)
    no_crop = params.crop is None or tuple(params.crop) == (0.0, 0.0, 1.0, 1.0)
    if params.rotation_deg == 0.0 and no_crop:
        return pair
    h, w = pair.resolution
    matrix, flow_lin, r_fwd = _affine_matrices(
        (h, w), params.rotation_deg, None if no_crop else params.crop
    )
    source = affine_sample(pair.source, matrix)
    target = affine_sample(pair.target, matrix)
    skel = affine_sample(pair.skeletons.data, matrix)
    vx = affine_sample(pair.pafs.vectors[..., 0], matrix)
    vy = affine_sample(pair.pafs.vectors[..., 1], matrix)
    vec = np.stack([vx, vy], axis=-1)
    vec = _apply_linear(vec, r_fwd)
    mag = affine_sample(pair.pafs.magnitude, matrix)
    ori = np.arctan2(vec[..., 1], vec[..., 0]).astype(np.float32) * (mag > 0)
    flow = affine_sample(pair.gt_flow.data, matrix)
    flow = _apply_linear(flow.transpose(1, 2, 0), flow_lin).transpose(2, 0, 1)
    return SamplePair(
        source,
        target,
        SkeletonMaps(skel),
        PAFStack(vec, mag, ori),
        FlowField(np.ascontiguousarray(flow)),
        pair.id,
    )


# ---------------------------------------------------------------------------
# Synthetic pairs


def _limb_band_field(
    h: int, w: int, ax: float, ay: float, bx: float, by: float, sigma: float
) -> np.ndarray:
    """Compression band for one limb: perpendicular to the limb axis, odd
    across it (d/sigma * exp(0.5 - d^2/(2 sigma^2)), peak 1 at |d| = sigma),
    zero beyond 3 sigma and tapered toward the endpoints so that limbs
    meeting at a joint do not fight each other."""
    length = math.hypot(bx - ax, by - ay)
    ex, ey = (bx - ax) / length, (by - ay) / length
    xs = np.arange(w, dtype=np.float64)[None, :]
    ys = np.arange(h, dtype=np.float64)[:, None]
    dx = xs - ax
    dy = ys - ay
    along = dx * ex + dy * ey
    across = dy * ex - dx * ey  # signed distance, positive to the left of a->b
    profile = (across / sigma) * np.exp(0.5 - (across * across) / (2.0 * sigma * sigma))
    profile[np.abs(across) > 3.0 * sigma] = 0.0
    taper = min(length / 3.0, 2.0 * sigma)
    ramp = np.clip(np.minimum(along, length - along) / taper, 0.0, 1.0)
    weight = profile * ramp
    field = np.zeros((2, h, w), dtype=np.float64)
    field[0] = weight * -ey  # unit normal (-ey, ex), scaled by the odd profile
    field[1] = weight * ex
    return field


def synth_flow(
    kp: KeypointSet,
    size: Tuple[int, int],
    strength: float,
    target_mean_px: float = 3.5,
    pafs: Optional[PAFStack] = None,
) -> FlowField:
    """Analytic limb-anchored deformation flow, a deterministic function of
    the pose (which is what makes it learnable from the pose's priors).

    Per-limb Gaussian-derivative bands perpendicular to each limb axis give
    the magnitude profile. Where limb bands overlap, the naive band sum
    drifts away from perpendicular, so on the affinity-field support the
    direction is snapped to the exact perpendicular of the locally summed
    limb vector (keeping the band magnitude and side). The field is then
    normalized so its mean magnitude is ``target_mean_px * strength``, with
    per-pixel peaks capped near 3.5x the mean.
    """
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength must be in [0, 1], got {strength}")
    h, w = size
    base = np.zeros((2, h, w), dtype=np.float64)
    limbs = 0
    for a, b in PAF_LIMBS:
        if not (kp.visible(a) and kp.visible(b)):
            continue
        ax, ay = float(kp.joints[a, 0]), float(kp.joints[a, 1])
        bx, by = float(kp.joints[b, 0]), float(kp.joints[b, 1])
        length = math.hypot(bx - ax, by - ay)
        if length < 1.0:
            continue
        sigma = max(4.0, 0.18 * length)
        base += _limb_band_field(h, w, ax, ay, bx, by, sigma)
        limbs += 1
    if limbs == 0:
        raise ValueError("synth_flow: pose has no valid limbs")
    mean_mag = float(np.hypot(base[0], base[1]).mean())
    if mean_mag <= 0.0:
        raise ValueError("synth_flow: limb bands lie entirely outside the image")

    if pafs is None:
        pafs = build_pafs(kp, size)
    limb_sum = pafs.vectors.sum(axis=0).transpose(2, 0, 1).astype(np.float64)
    lx, ly = limb_sum[0], limb_sum[1]
    lnorm = np.hypot(lx, ly)
    on_support = lnorm > 1e-6
    px = np.where(on_support, -ly / np.maximum(lnorm, 1e-12), 0.0)
    py = np.where(on_support, lx / np.maximum(lnorm, 1e-12), 0.0)
    proj = base[0] * px + base[1] * py
    base[0] = np.where(on_support, proj * px, base[0])
    base[1] = np.where(on_support, proj * py, base[1])

    base *= target_mean_px / np.hypot(base[0], base[1]).mean()
    mag = np.hypot(base[0], base[1])
    cap = 3.5 * target_mean_px
    base *= np.minimum(1.0, cap / np.maximum(mag, 1e-12))
    base *= strength * target_mean_px / np.hypot(base[0], base[1]).mean()
    return FlowField(base.astype(np.float32))


def render_person(kp: KeypointSet, size: Tuple[int, int], seed: int = 0) -> np.ndarray:
    """Draw the pose as colored capsule limbs over a textured background.

    Purely synthetic imagery, but with enough structure that image-space
    losses carry signal: smooth low-frequency background, distinct limb
    colors, a head disc, and fine noise over everything.
    """
    h, w = size
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(0.15, 0.85, size=(3, 6, 6)).astype(np.float32)
    img = resize_bilinear(coarse, h, w)
    for a, b in SKELETON_EDGES:
        if not (kp.visible(a) and kp.visible(b)):
            continue
        ax, ay = float(kp.joints[a, 0]), float(kp.joints[a, 1])
        bx, by = float(kp.joints[b, 0]), float(kp.joints[b, 1])
        width = max(2.0, 0.045 * min(h, w)) * rng.uniform(0.8, 1.2)
        alpha = segment_alpha(h, w, ax, ay, bx, by, width / 2.0)
        color = rng.uniform(0.1, 0.9, size=3).astype(np.float32)
        img = img * (1.0 - alpha) + color[:, None, None] * alpha
    nose = JOINT_INDEX["nose"]
    ls, rs = JOINT_INDEX["left_shoulder"], JOINT_INDEX["right_shoulder"]
    if kp.visible(nose) and kp.visible(ls) and kp.visible(rs):
        nx, ny = float(kp.joints[nose, 0]), float(kp.joints[nose, 1])
        shoulder_span = math.hypot(
            float(kp.joints[ls, 0] - kp.joints[rs, 0]),
            float(kp.joints[ls, 1] - kp.joints[rs, 1]),
        )
        radius = max(2.0, 0.3 * shoulder_span)
        alpha = segment_alpha(h, w, nx, ny, nx, ny, radius)
        color = rng.uniform(0.2, 0.9, size=3).astype(np.float32)
        img = img * (1.0 - alpha) + color[:, None, None] * alpha
    img = img + rng.uniform(-0.04, 0.04, size=img.shape).astype(np.float32)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def random_pose(size: Tuple[int, int], seed: int = 0) -> KeypointSet:
    """A plausible front-facing figure with every joint confidently visible."""
    h, w = size
    rng = np.random.default_rng(seed)
    s = min(h, w)

    def jit(scale=0.02):
        return float(rng.uniform(-scale, scale)) * s

    cx = w * float(rng.uniform(0.42, 0.58))
    shoulder_y = h * float(rng.uniform(0.26, 0.34))
    hip_y = h * float(rng.uniform(0.5, 0.58))
    half_shoulder = s * float(rng.uniform(0.1, 0.14))
    half_hip = s * float(rng.uniform(0.07, 0.1))

    pts: Dict[str, Tuple[float, float]] = {}
    pts["left_shoulder"] = (cx + half_shoulder + jit(), shoulder_y + jit())
    pts["right_shoulder"] = (cx - half_shoulder + jit(), shoulder_y + jit())
    pts["left_hip"] = (cx + half_hip + jit(), hip_y + jit())
    pts["right_hip"] = (cx - half_hip + jit(), hip_y + jit())

    def chain(start, side, angles, lengths, names):
        x, y = pts[start]
        for angle_range, rel_len, name in zip(angles, lengths, names):
            ang = math.radians(float(rng.uniform(*angle_range)))
            ln = s * rel_len * float(rng.uniform(0.85, 1.15))
            x = x + side * ln * math.sin(ang)
            y = y + ln * math.cos(ang)
            pts[name] = (x, y)

    arm_angles = [(15.0, 55.0), (-25.0, 35.0)]
    chain("left_shoulder", +1, arm_angles, [0.15, 0.14], ["left_elbow", "left_wrist"])
    chain("right_shoulder", -1, arm_angles, [0.15, 0.14], ["right_elbow", "right_wrist"])
    leg_angles = [(-12.0, 12.0), (-10.0, 10.0)]
    chain("left_hip", +1, leg_angles, [0.17, 0.16], ["left_knee", "left_ankle"])
    chain("right_hip", -1, leg_angles, [0.17, 0.16], ["right_knee", "right_ankle"])

    neck_x = (pts["left_shoulder"][0] + pts["right_shoulder"][0]) / 2.0
    neck_y = (pts["left_shoulder"][1] + pts["right_shoulder"][1]) / 2.0
    head = s * 0.1
    pts["nose"] = (neck_x + jit(0.01), neck_y - head)
    pts["left_eye"] = (neck_x + 0.25 * head, neck_y - 1.2 * head)
    pts["right_eye"] = (neck_x - 0.25 * head, neck_y - 1.2 * head)
    pts["left_ear"] = (neck_x + 0.5 * head, neck_y - head)
    pts["right_ear"] = (neck_x - 0.5 * head, neck_y - head)

    joints = np.zeros((17, 3), dtype=np.float32)
    for name, (x, y) in pts.items():
        idx = JOINT_INDEX[name]
        joints[idx] = (
            min(max(x, 1.0), w - 1.5),
            min(max(y, 1.0), h - 1.5),
            1.0,
        )
    return KeypointSet(joints, w, h)


def synth_pair(
    image: np.ndarray,
    kp: KeypointSet,
    strength: float,
    seed: int = 0,
    target_mean_px: float = 3.5,
) -> SamplePair:
    """Build a noise-free supervised pair from an image and its pose.

    The exact analytic flow is stored as ground truth and the target is the
    source warped with it — so warp-consistency holds bit-exactly by
    construction.
    """
    h, w = image.shape[1], image.shape[2]
    if (kp.image_width, kp.image_height) != (w, h):
        kp = kp.scaled(w / kp.image_width, h / kp.image_height, w, h)
    pafs = build_pafs(kp, (h, w))
    flow = synth_flow(kp, (h, w), strength, target_mean_px=target_mean_px, pafs=pafs)
    source = np.asarray(image, dtype=np.float32)
    target = warp_bilinear(source, flow.data, 1.0)
    skel = rasterize_skeletons(kp, (h, w))
    return SamplePair(source, target, skel, pafs, flow, f"synth-{seed}")


def synth_example(
    size: int, seed: int, strength: float = 1.0
) -> Tuple[KeypointSet, SamplePair]:
    """One pose plus its supervised pair, fully determined by the seed."""
    kp = random_pose((size, size), seed=seed)
    image = render_person(kp, (size, size), seed=seed)
    return kp, synth_pair(image, kp, strength, seed=seed)


def make_synthetic_dataset(
    count: int,
    size: int = 64,
    seed: int = 0,
    strength: float = 1.0,
) -> List[SamplePair]:
    """Generate ``count`` independent pose/image/flow samples."""
    pairs = []
    for i in range(count):
        sample_seed = int(np.random.default_rng((seed, i)).integers(0, 2**31))
        _, pair = synth_example(size, sample_seed, strength)
        pair.id = f"synth-{seed}-{i}"
        pairs.append(pair)
    return pairs


# ---------------------------------------------------------------------------
# Precomputed-prior cache


def cache_sample(pair: SamplePair, path) -> None:
    """Persist a fully materialized pair (images, priors, flow) bit-exactly."""
    containers.write_container(
        path,
        {
            "source": pair.source,
            "target": pair.target,
            "skeletons": pair.skeletons.data,
            "paf_vectors": pair.pafs.vectors,
            "paf_magnitude": pair.pafs.magnitude,
            "paf_orientation": pair.pafs.orientation,
            "gt_flow": pair.gt_flow.data,
        },
        meta={"id": pair.id, "cache_version": CACHE_VERSION},
    )


def load_cached_sample(path) -> SamplePair:
    tensors, meta = containers.read_container(path)
    version = meta.get("cache_version")
    if version != CACHE_VERSION:
        raise IncompatibleCheckpointError(
            f"{path}: sample cache version {version!r}, expected {CACHE_VERSION}"
        )
    return SamplePair(
        tensors["source"],
        tensors["target"],
        SkeletonMaps(tensors["skeletons"]),
        PAFStack(
            tensors["paf_vectors"], tensors["paf_magnitude"], tensors["paf_orientation"]
        ),
        FlowField(tensors["gt_flow"]),
        meta.get("id", "cached"),
    )
