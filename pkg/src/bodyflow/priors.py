"""Structural priors built from 2D keypoints.

Three products, all derived from one :class:`KeypointSet`:

* skeleton maps — anti-aliased capsule rasterizations of 12 bones, stacked
  with the RGB image at the generator input;
* part affinity fields — per-limb unit-vector rectangles (plus their polar
  magnitude/orientation form) whose support is grown by a few rounds of
  3x3 morphological dilation;
* structure heatmaps — five soft masks (arms, torso, legs, foreground,
  background) area-averaged down to the attention bottleneck.

Pose estimation itself is out of scope; keypoints arrive as documents in the
schema described at :func:`ingest_keypoints`.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import SchemaError
from .kernels import segment_alpha
from .topology import (
    ARM_LIMBS,
    HFLIP_JOINT_PERM,
    JOINT_NAMES,
    LEG_LIMBS,
    NUM_JOINTS,
    NUM_PAF_LIMBS,
    NUM_SKELETONS,
    PAF_LIMBS,
    SKELETON_EDGES,
    TORSO_LIMBS,
)

log = logging.getLogger(__name__)

# Joints below this confidence are treated as missing.
TAU_KP = 0.05

# Structure-heatmap channel order.
HEATMAP_CHANNELS = ("arms", "torso", "legs", "fg", "bg")


@dataclass
class KeypointSet:
    """17 named joints with confidences, in image pixel coordinates."""

    joints: np.ndarray  # (17, 3) float32 rows of (x, y, confidence)
    image_width: int
    image_height: int
    crop_box: Optional[Tuple[float, float, float, float]] = None
    image: str = ""

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float32)
        if self.joints.shape != (NUM_JOINTS, 3):
            raise SchemaError(
                f"keypoints: expected shape ({NUM_JOINTS}, 3), got {self.joints.shape}"
            )
        if not np.isfinite(self.joints).all():
            raise SchemaError("keypoints: non-finite coordinate or confidence")
        conf = self.joints[:, 2]
        if (conf < 0).any() or (conf > 1).any():
            raise SchemaError("keypoints: confidence outside [0, 1]")
        live = conf >= TAU_KP
        x, y = self.joints[:, 0], self.joints[:, 1]
        bad = live & (
            (x < 0) | (x >= self.image_width) | (y < 0) | (y >= self.image_height)
        )
        if bad.any():
            name = JOINT_NAMES[int(np.flatnonzero(bad)[0])]
            raise SchemaError(
                f"keypoints: joint '{name}' lies outside "
                f"[0, {self.image_width}) x [0, {self.image_height})"
            )

    def visible(self, joint: int) -> bool:
        return bool(self.joints[joint, 2] >= TAU_KP)

    def hflip(self) -> "KeypointSet":
        """Mirror about the vertical axis, swapping left/right joint labels."""
        flipped = self.joints[HFLIP_JOINT_PERM].copy()
        flipped[:, 0] = np.float32(self.image_width - 1) - flipped[:, 0]
        return KeypointSet(
            joints=flipped,
            image_width=self.image_width,
            image_height=self.image_height,
            crop_box=self.crop_box,
            image=self.image,
        )

    def scaled(self, sx: float, sy: float, width: int, height: int) -> "KeypointSet":
        """Rescale coordinates into a (width, height) canvas."""
        j = self.joints.copy()
        j[:, 0] *= np.float32(sx)
        j[:, 1] *= np.float32(sy)
        # A confident joint on the far border would land exactly on `width`
        # after upscaling; nudge it back inside.
        j[:, 0] = np.minimum(j[:, 0], np.float32(width) - np.float32(0.5))
        j[:, 1] = np.minimum(j[:, 1], np.float32(height) - np.float32(0.5))
        return KeypointSet(j, width, height, None, self.image)


@dataclass
class SkeletonMaps:
    """12 anti-aliased bone rasterizations in [0, 1], background exactly 0."""

    data: np.ndarray  # (12, H, W) float32

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]


@dataclass
class PAFStack:
    """Per-limb unit-vector fields plus their polar decomposition."""

    vectors: np.ndarray      # (10, H, W, 2) float32, unit or zero
    magnitude: np.ndarray    # (10, H, W) float32 in {0, 1}
    orientation: np.ndarray  # (10, H, W) float32 radians in (-pi, pi], 0 off-support

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.magnitude.shape[1], self.magnitude.shape[2]


@dataclass
class StructureHeatmaps:
    """Soft masks (arms, torso, legs, fg, bg) at bottleneck resolution."""

    data: np.ndarray  # (5, h, w) float32 in [0, 1]

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]


def ingest_keypoints(document) -> KeypointSet:
    """Parse one keypoint document into a validated :class:`KeypointSet`.

    Schema (JSON)::

        {
          "image": "name.jpg",
          "width": 768, "height": 1024,
          "crop_box": [x, y, w, h] or null,
          "keypoints": [[x, y, c], ...17 entries in COCO order...]
        }

    ``keypoints`` may instead be an object keyed by joint name; joints left
    out (or given as null in the list form) become confidence-0 entries.
    ``document`` may be bytes/str of JSON or an already-parsed mapping.
    """
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise SchemaError(f"keypoint document: invalid JSON ({e})") from e
    if not isinstance(document, dict):
        raise SchemaError("keypoint document: expected a JSON object")

    for fld in ("width", "height", "keypoints"):
        if fld not in document:
            raise SchemaError(f"keypoint document: missing field '{fld}'")
    try:
        width = int(document["width"])
        height = int(document["height"])
    except (TypeError, ValueError) as e:
        raise SchemaError(f"keypoint document: width/height must be integers ({e})") from e
    if width <= 0 or height <= 0:
        raise SchemaError("keypoint document: width/height must be positive")

    raw = document["keypoints"]
    joints = np.zeros((NUM_JOINTS, 3), dtype=np.float32)
    if isinstance(raw, dict):
        for name in raw:
            if name not in JOINT_NAMES:
                raise SchemaError(f"keypoints: unknown joint name '{name}'")
        for i, name in enumerate(JOINT_NAMES):
            entry = raw.get(name)
            if entry is None:
                continue
            joints[i] = _parse_joint(entry, name)
    elif isinstance(raw, list):
        if len(raw) != NUM_JOINTS:
            raise SchemaError(
                f"keypoints: expected {NUM_JOINTS} entries, got {len(raw)}"
            )
        for i, entry in enumerate(raw):
            if entry is None:
                continue
            joints[i] = _parse_joint(entry, JOINT_NAMES[i])
    else:
        raise SchemaError("keypoints: expected a list or an object keyed by joint name")

    crop_box = document.get("crop_box")
    if crop_box is not None:
        if not (isinstance(crop_box, (list, tuple)) and len(crop_box) == 4):
            raise SchemaError("crop_box: expected [x, y, w, h] or null")
        crop_box = tuple(float(v) for v in crop_box)

    return KeypointSet(
        joints=joints,
        image_width=width,
        image_height=height,
        crop_box=crop_box,
        image=str(document.get("image", "")),
    )


def _parse_joint(entry, name: str) -> Tuple[float, float, float]:
    if not (isinstance(entry, (list, tuple)) and len(entry) == 3):
        raise SchemaError(f"keypoints: joint '{name}' must be [x, y, confidence]")
    try:
        x, y, c = (float(v) for v in entry)
    except (TypeError, ValueError) as e:
        raise SchemaError(f"keypoints: joint '{name}' has a non-numeric value") from e
    return x, y, c


def keypoints_to_document(kp: KeypointSet) -> dict:
    """Inverse of :func:`ingest_keypoints` (list form)."""
    return {
        "image": kp.image,
        "width": int(kp.image_width),
        "height": int(kp.image_height),
        "crop_box": list(kp.crop_box) if kp.crop_box is not None else None,
        "keypoints": [[float(x), float(y), float(c)] for x, y, c in kp.joints],
    }


def rasterize_skeletons(
    kp: KeypointSet, size: Tuple[int, int], line_width: float = 3.0
) -> SkeletonMaps:
    """Render each skeleton edge as an anti-aliased capsule of ``line_width``.

    A channel is all-zero when either endpoint is missing. Peak value is 1;
    background pixels are exactly 0.
    """
    h, w = size
    if h <= 0 or w <= 0 or line_width < 1:
        raise ValueError("rasterize_skeletons: need positive size and line_width >= 1")
    maps = np.zeros((NUM_SKELETONS, h, w), dtype=np.float32)
    half = float(line_width) / 2.0
    for ch, (a, b) in enumerate(SKELETON_EDGES):
        if not (kp.visible(a) and kp.visible(b)):
            continue
        ax, ay = kp.joints[a, 0], kp.joints[a, 1]
        bx, by = kp.joints[b, 0], kp.joints[b, 1]
        maps[ch] = segment_alpha(h, w, ax, ay, bx, by, half)
    return SkeletonMaps(data=maps)


def _limb_rectangle_mask(
    h: int, w: int, ax: float, ay: float, bx: float, by: float, half_width: float
) -> np.ndarray:
    """Binary membership of the rectangle of ``half_width`` around segment a->b."""
    ex, ey = bx - ax, by - ay
    length = math.hypot(ex, ey)
    ux, uy = ex / length, ey / length
    xs = np.arange(w, dtype=np.float64)[None, :] - ax
    ys = np.arange(h, dtype=np.float64)[:, None] - ay
    along = xs * ux + ys * uy
    across = xs * (-uy) + ys * ux
    return (along >= 0.0) & (along <= length) & (np.abs(across) <= half_width)


def _dilate3x3(mask: np.ndarray, iterations: int) -> np.ndarray:
    """Binary dilation with the full 3x3 structuring element."""
    m = mask
    for _ in range(iterations):
        p = np.pad(m, 1)
        m = (
            p[:-2, :-2] | p[:-2, 1:-1] | p[:-2, 2:]
            | p[1:-1, :-2] | p[1:-1, 1:-1] | p[1:-1, 2:]
            | p[2:, :-2] | p[2:, 1:-1] | p[2:, 2:]
        )
    return m


def build_pafs(
    kp: KeypointSet,
    size: Tuple[int, int],
    limb_half_width: Optional[float] = None,
    dilate_iters: int = 3,
) -> PAFStack:
    """Build the 10-limb part-affinity stack.

    Inside the rectangle of ``limb_half_width`` around limb p1->p2 the field
    holds the unit vector (p2-p1)/|p2-p1|; the support is then dilated
    ``dilate_iters`` times with a 3x3 element, new pixels copying the same
    vector. ``limb_half_width=None`` uses max(4, 0.08 * limb length) per limb.
    """
    h, w = size
    vectors = np.zeros((NUM_PAF_LIMBS, h, w, 2), dtype=np.float32)
    magnitude = np.zeros((NUM_PAF_LIMBS, h, w), dtype=np.float32)
    orientation = np.zeros((NUM_PAF_LIMBS, h, w), dtype=np.float32)
    for ch, (a, b) in enumerate(PAF_LIMBS):
        if not (kp.visible(a) and kp.visible(b)):
            continue
        ax, ay = float(kp.joints[a, 0]), float(kp.joints[a, 1])
        bx, by = float(kp.joints[b, 0]), float(kp.joints[b, 1])
        length = math.hypot(bx - ax, by - ay)
        if length < 1.0:
            log.warning(
                "PAF limb %d (%s-%s): endpoints coincide (%.3f px); channel left zero",
                ch, JOINT_NAMES[a], JOINT_NAMES[b], length,
            )
            continue
        half = limb_half_width if limb_half_width is not None else max(4.0, 0.08 * length)
        mask = _limb_rectangle_mask(h, w, ax, ay, bx, by, half)
        if dilate_iters > 0:
            mask = _dilate3x3(mask, dilate_iters)
        ux = np.float32((bx - ax) / length)
        uy = np.float32((by - ay) / length)
        m32 = mask.astype(np.float32)
        vectors[ch, :, :, 0] = ux * m32
        vectors[ch, :, :, 1] = uy * m32
        magnitude[ch] = m32
        # derived from the stored float32 vectors (not the float64 geometry)
        # so that every later recomputation from the vectors is bit-identical
        orientation[ch] = np.arctan2(uy, ux).astype(np.float32) * m32
    return PAFStack(vectors=vectors, magnitude=magnitude, orientation=orientation)


def _area_average(mask: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact mean of ``mask`` over each output cell's source rectangle.

    Uses a summed-area table evaluated at (possibly fractional) cell borders;
    the table is bilinear inside each pixel, so fractional lookups are exact
    coverage-weighted sums. Float64 throughout: the sums are integers below
    2**53, hence exact, and even divisions (e.g. 256 -> 16) yield dyadic
    means that survive the final float32 cast unchanged.
    """
    ih, iw = mask.shape
    sat = np.zeros((ih + 1, iw + 1), dtype=np.float64)
    np.cumsum(np.cumsum(mask, axis=0, dtype=np.float64), axis=1, out=sat[1:, 1:])

    def lookup(ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
        y0 = np.clip(np.floor(ys).astype(np.int64), 0, ih - 1)
        x0 = np.clip(np.floor(xs).astype(np.int64), 0, iw - 1)
        ty = (ys - y0)[:, None]
        tx = (xs - x0)[None, :]
        s00 = sat[np.ix_(y0, x0)]
        s01 = sat[np.ix_(y0, x0 + 1)]
        s10 = sat[np.ix_(y0 + 1, x0)]
        s11 = sat[np.ix_(y0 + 1, x0 + 1)]
        top = s00 + tx * (s01 - s00)
        bot = s10 + tx * (s11 - s10)
        return top + ty * (bot - top)

    ys = np.arange(out_h + 1, dtype=np.float64) * (ih / out_h)
    xs = np.arange(out_w + 1, dtype=np.float64) * (iw / out_w)
    s = lookup(ys, xs)
    cell = s[1:, 1:] - s[1:, :-1] - s[:-1, 1:] + s[:-1, :-1]
    area = (ih / out_h) * (iw / out_w)
    return cell / area


def encode_structure(pafs: PAFStack, bottleneck: Tuple[int, int]) -> StructureHeatmaps:
    """Area-average limb-group masks down to the attention bottleneck.

    Channels: arms, torso, legs, foreground (union of all limbs), and
    background = 1 - foreground. The complement is taken after the float32
    cast, which — checked exhaustively over every float32 in [0, 1] — makes
    fg + bg == 1 hold bit-exactly at every pixel.
    """
    h, w = bottleneck
    support = pafs.magnitude > 0
    groups = {
        "arms": np.logical_or.reduce(support[list(ARM_LIMBS)], axis=0),
        "torso": np.logical_or.reduce(support[list(TORSO_LIMBS)], axis=0),
        "legs": np.logical_or.reduce(support[list(LEG_LIMBS)], axis=0),
        "fg": np.logical_or.reduce(support, axis=0),
    }
    data = np.empty((5, h, w), dtype=np.float32)
    for i, name in enumerate(("arms", "torso", "legs", "fg")):
        data[i] = _area_average(groups[name], h, w).astype(np.float32)
    data[4] = np.float32(1.0) - data[3]
    return StructureHeatmaps(data=data)


def priors_for_image(
    kp: KeypointSet,
    size: Tuple[int, int],
    bottleneck: Tuple[int, int],
    line_width: float = 3.0,
) -> Tuple[SkeletonMaps, StructureHeatmaps]:
    """One-call convenience: keypoints -> (skeleton maps, structure heatmaps).

    ``kp`` is rescaled from its own image size to ``size`` first, so callers
    hand in keypoints in original-image coordinates.
    """
    h, w = size
    scaled = kp.scaled(w / kp.image_width, h / kp.image_height, w, h)
    skel = rasterize_skeletons(scaled, size, line_width=line_width)
    pafs = build_pafs(scaled, size)
    heat = encode_structure(pafs, bottleneck)
    return skel, heat
