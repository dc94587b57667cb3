"""Image and flow quality metrics: SSIM, PSNR, end-point error.

SSIM is the standard single-scale form: 11x11 Gaussian window (sigma 1.5),
K1=0.01 / K2=0.03, dynamic range 1.0, evaluated only at fully-inside window
positions and averaged over channels. PSNR uses the same [0, 1] range with
identical images capped at a 99 dB sentinel.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .warp import FlowField

PSNR_CAP_DB = 99.0


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    xs = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """The 2-D Gaussian weighting window used by :func:`ssim` (sums to 1)."""
    k = _gaussian_kernel(size, sigma)
    return np.outer(k, k)


def _filter_valid(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation of a 2-D image with a 1-D kernel."""
    t = sliding_window_view(img, k.size, axis=1) @ k
    return np.ascontiguousarray(sliding_window_view(t, k.size, axis=0)) @ k


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[None], b[None]
    size = 11
    if a.shape[1] < size or a.shape[2] < size:
        raise ValueError(f"images must be at least {size}x{size}, got {a.shape[1:]}")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    k = _gaussian_kernel(size, 1.5)
    vals = []
    for ch in range(a.shape[0]):
        mu_a = _filter_valid(a[ch], k)
        mu_b = _filter_valid(b[ch], k)
        e_aa = _filter_valid(a[ch] * a[ch], k)
        e_bb = _filter_valid(b[ch] * b[ch], k)
        e_ab = _filter_valid(a[ch] * b[ch], k)
        var_a = e_aa - mu_a * mu_a
        var_b = e_bb - mu_b * mu_b
        cov = e_ab - mu_a * mu_b
        s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
            (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
        )
        vals.append(s.mean())
    return float(np.mean(vals))


def psnr(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10((data_range * data_range) / mse), PSNR_CAP_DB)


def epe(pred, gt) -> float:
    p = pred.data if isinstance(pred, FlowField) else np.asarray(pred)
    g = gt.data if isinstance(gt, FlowField) else np.asarray(gt)
    if p.shape != g.shape:
        raise ValueError(f"flow shapes differ: {p.shape} vs {g.shape}")
    d = p.astype(np.float64) - g.astype(np.float64)
    return float(np.hypot(d[0], d[1]).mean())


@dataclass
class MetricReport:
    """Per-sample metric lists plus their arithmetic means.

    Any subset of the three metrics may be recorded per sample; means are
    ``None`` until at least one value of that metric has been added.
    """

    ssim_values: List[float] = field(default_factory=list)
    psnr_values: List[float] = field(default_factory=list)
    epe_values: List[float] = field(default_factory=list)

    def add(self, ssim=None, psnr=None, epe=None) -> None:
        if ssim is not None:
            self.ssim_values.append(float(ssim))
        if psnr is not None:
            self.psnr_values.append(float(psnr))
        if epe is not None:
            self.epe_values.append(float(epe))

    @property
    def count(self) -> int:
        return max(len(self.ssim_values), len(self.psnr_values), len(self.epe_values))

    @staticmethod
    def _mean(values: List[float]) -> Optional[float]:
        return float(np.mean(values)) if values else None

    @property
    def mean_ssim(self) -> Optional[float]:
        return self._mean(self.ssim_values)

    @property
    def mean_psnr(self) -> Optional[float]:
        return self._mean(self.psnr_values)

    @property
    def mean_epe(self) -> Optional[float]:
        return self._mean(self.epe_values)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "ssim": self.mean_ssim,
            "psnr": self.mean_psnr,
            "epe": self.mean_epe,
        }
