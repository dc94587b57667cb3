"""Training objectives: image L1, flow L1, limb-orthogonality, weighted sum.

The orthogonality term pushes the predicted flow to cross limbs at right
angles (width edits) instead of sliding along them (length edits): it is the
mean |cos| of the angle between the flow and the channel-summed limb vector,
taken over pixels where both fields have usable magnitude. Literal reading of
the formula would reward anti-parallel flow, so the absolute value is used —
deviation by intent, recorded with the design notes.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
import torch

from .priors import PAFStack

SUPPORT_EPS = 1e-6


@dataclass
class LossWeights:
    lambda_img: float = 15.0
    lambda_flow: float = 15.0
    lambda_orth: float = 2.0

    def __post_init__(self):
        if self.lambda_img < 0 or self.lambda_flow < 0 or self.lambda_orth < 0:
            raise ValueError("loss weights must be non-negative")


def loss_img(output: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over every channel and pixel."""
    if output.shape != gt.shape:
        raise ValueError(f"image shapes differ: {tuple(output.shape)} vs {tuple(gt.shape)}")
    return (output - gt).abs().mean()


def loss_flow(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over both flow channels."""
    if pred.shape != gt.shape:
        raise ValueError(f"flow shapes differ: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    return (pred - gt).abs().mean()


def paf_vector_sum(pafs: Union[PAFStack, np.ndarray]) -> np.ndarray:
    """Channel-summed limb vector field V = sum_n L_n, as (2, H, W)."""
    vectors = pafs.vectors if isinstance(pafs, PAFStack) else np.asarray(pafs)
    return vectors.sum(axis=0).transpose(2, 0, 1).astype(np.float32)


def loss_orth(
    pred: torch.Tensor,
    limb_sum: torch.Tensor,
    eps: float = SUPPORT_EPS,
    return_support: bool = False,
):
    """Mean |cos angle(V, F)| over pixels where both norms exceed ``eps``.

    ``pred`` and ``limb_sum``: (2, H, W) or (B, 2, H, W), matching shapes.
    Returns 0 when no pixel qualifies; with ``return_support=True`` also
    returns the number of contributing pixels so callers can tell "perfectly
    orthogonal" apart from "nothing to measure".
    """
    if pred.shape != limb_sum.shape:
        raise ValueError(
            f"flow/limb shapes differ: {tuple(pred.shape)} vs {tuple(limb_sum.shape)}"
        )
    chan = -3  # channel axis for both (2,H,W) and (B,2,H,W)
    dot = (pred * limb_sum).sum(dim=chan)
    fn = torch.sqrt((pred * pred).sum(dim=chan))
    ln = torch.sqrt((limb_sum * limb_sum).sum(dim=chan))
    mask = (fn > eps) & (ln > eps)
    support = int(mask.sum())
    if support == 0:
        value = pred.sum() * 0.0  # keeps the graph connected with zero gradient
    else:
        value = (dot[mask].abs() / (fn[mask] * ln[mask])).mean()
    if return_support:
        return value, support
    return value


def total_loss(l_img, l_flow, l_orth, weights: LossWeights):
    """lambda_img * L_img + lambda_flow * L_flow + lambda_orth * L_orth."""
    return (
        weights.lambda_img * l_img
        + weights.lambda_flow * l_flow
        + weights.lambda_orth * l_orth
    )
