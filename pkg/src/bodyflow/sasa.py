"""Structure-affinity self-attention at the generator bottleneck.

Two correlation maps over flattened bottleneck locations are composed
multiplicatively: a feature self-attention map (who looks like whom) and a
structure affinity map built from the body-part heatmaps (who belongs with
whom). Both are centered by their global scalar mean, squashed through a
sigmoid, multiplied elementwise, and used as plain (un-normalized) mixing
weights for the value projection. The result enters the trunk as a
gamma-scaled residual with gamma starting at 0, so an untrained block is an
exact identity.

A standard softmax self-attention block with the same value path is provided
as the ablation stand-in for the affinity branch.
"""

from typing import Tuple

import torch
from torch import nn

from .errors import NumericError


def _flat(x: torch.Tensor) -> Tuple[torch.Tensor, bool]:
    """(C,h,w) or (B,C,h,w) -> (B, C, hw), remembering if a batch dim was added."""
    if x.dim() == 3:
        return x.reshape(1, x.shape[0], -1), True
    if x.dim() == 4:
        return x.reshape(x.shape[0], x.shape[1], -1), False
    raise ValueError(f"expected (C,h,w) or (B,C,h,w), got shape {tuple(x.shape)}")


def _project(x_flat: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
    """1x1 projection: (B, C, hw) x (O, C) -> (B, O, hw)."""
    return torch.einsum("oc,bcn->bon", w, x_flat)


def self_attention_map(x: torch.Tensor, w_k: torch.Tensor, w_q: torch.Tensor) -> torch.Tensor:
    """Entry (i, j) is the inner product of projected features at i and j."""
    xf, squeeze = _flat(x)
    k = _project(xf, w_k)
    q = _project(xf, w_q)
    m = torch.bmm(k.transpose(1, 2), q)
    return m[0] if squeeze else m


def structure_affinity_map(y: torch.Tensor, w_g: torch.Tensor) -> torch.Tensor:
    """Gram matrix of projected structure heatmaps; symmetric by construction."""
    yf, squeeze = _flat(y)
    g = _project(yf, w_g)
    m = torch.bmm(g.transpose(1, 2), g)
    return m[0] if squeeze else m


def center(m: torch.Tensor) -> torch.Tensor:
    """Subtract the global scalar mean of each map (all hw x hw entries)."""
    return m - m.mean(dim=(-2, -1), keepdim=True)


def compose(att: torch.Tensor, aff: torch.Tensor) -> torch.Tensor:
    """sigmoid(centered att) * sigmoid(centered aff); entries in (0, 1)."""
    if att.shape != aff.shape:
        raise ValueError(f"map shapes differ: {tuple(att.shape)} vs {tuple(aff.shape)}")
    return torch.sigmoid(center(att)) * torch.sigmoid(center(aff))


def apply_sasa(x, y, w_k, w_q, w_v, w_g, gamma):
    """Full block: X + gamma * (composed map applied to the value projection).

    The mixing is a plain weighted sum over locations — no row normalization.
    """
    xf, _ = _flat(x)
    yf, _ = _flat(y)
    att = torch.bmm(_project(xf, w_k).transpose(1, 2), _project(xf, w_q))
    if not torch.isfinite(att).all():
        raise NumericError("sasa: non-finite self-attention map")
    aff = torch.bmm(_project(yf, w_g).transpose(1, 2), _project(yf, w_g))
    if not torch.isfinite(aff).all():
        raise NumericError("sasa: non-finite structure affinity map")
    phi = compose(att, aff)
    v = _project(xf, w_v)
    alpha = torch.bmm(v, phi.transpose(1, 2))
    if not torch.isfinite(alpha).all():
        raise NumericError("sasa: non-finite attention output")
    out = xf + gamma * alpha
    return out.reshape(x.shape)


def inner_dim(channels: int) -> int:
    return max(channels // 8, 1)


class SASABlock(nn.Module):
    """Learnable structure-affinity attention over (B, C, h, w) features."""

    def __init__(self, channels: int, heat_channels: int = 5):
        super().__init__()
        ci = inner_dim(channels)
        self.w_k = nn.Parameter(torch.empty(ci, channels))
        self.w_q = nn.Parameter(torch.empty(ci, channels))
        self.w_v = nn.Parameter(torch.empty(channels, channels))
        self.w_g = nn.Parameter(torch.empty(ci, heat_channels))
        for w in (self.w_k, self.w_q, self.w_v, self.w_g):
            nn.init.xavier_uniform_(w)
        self.gamma = nn.Parameter(torch.tensor(0.0))

    def forward(self, x: torch.Tensor, heatmaps: torch.Tensor) -> torch.Tensor:
        return apply_sasa(x, heatmaps, self.w_k, self.w_q, self.w_v, self.w_g, self.gamma)


class SelfAttentionBlock(nn.Module):
    """Softmax self-attention with the same value path (affinity ablation)."""

    def __init__(self, channels: int):
        super().__init__()
        ci = inner_dim(channels)
        self.w_k = nn.Parameter(torch.empty(ci, channels))
        self.w_q = nn.Parameter(torch.empty(ci, channels))
        self.w_v = nn.Parameter(torch.empty(channels, channels))
        for w in (self.w_k, self.w_q, self.w_v):
            nn.init.xavier_uniform_(w)
        self.gamma = nn.Parameter(torch.tensor(0.0))

    def forward(self, x: torch.Tensor, heatmaps=None) -> torch.Tensor:
        xf, squeeze = _flat(x)
        scores = torch.bmm(_project(xf, self.w_k).transpose(1, 2), _project(xf, self.w_q))
        attn = torch.softmax(scores, dim=-1)
        v = _project(xf, self.w_v)
        alpha = torch.bmm(v, attn.transpose(1, 2))
        out = xf + self.gamma * alpha
        return out.reshape(x.shape)
