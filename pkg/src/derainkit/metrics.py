"""Segmentation, restoration, and report metrics.

Degenerate F-measure inputs return None ("undefined") so that empty
ground truth is never silently scored as zero; callers exclude and
flag such entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import convolve2d

from .frames import BG, DC, FG, BinaryMask, Frame, FrameSequence, TriStateMask, luma_array

__all__ = [
    "ConfusionCounts",
    "confusion",
    "precision",
    "recall",
    "f_measure",
    "psnr",
    "sequence_psnr",
    "ssim",
    "mean_ssim",
    "relative_improvement",
]


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel counts over scored (non-don't-care) pixels."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


def confusion(pred: BinaryMask, gt: TriStateMask) -> ConfusionCounts:
    """Count TP/FP/FN/TN, excluding don't-care pixels entirely."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ValueError(
            f"mask sizes differ: prediction {pred.width}x{pred.height}, "
            f"ground truth {gt.width}x{gt.height}"
        )
    scored = gt.labels != DC
    p = pred.bits & scored
    is_fg = (gt.labels == FG) & scored
    is_bg = (gt.labels == BG) & scored
    return ConfusionCounts(
        tp=int((p & is_fg).sum()),
        fp=int((p & is_bg).sum()),
        fn=int((~pred.bits & is_fg).sum()),
        tn=int((~pred.bits & is_bg).sum()),
    )


def precision(counts: ConfusionCounts) -> Optional[float]:
    denom = counts.tp + counts.fp
    return counts.tp / denom if denom else None


def recall(counts: ConfusionCounts) -> Optional[float]:
    denom = counts.tp + counts.fn
    return counts.tp / denom if denom else None


def f_measure(counts: ConfusionCounts) -> Optional[float]:
    """Harmonic mean of precision and recall.

    None when there are no predictions (TP+FP = 0) or no positives in
    the ground truth (TP+FN = 0). TP = 0 with both FP and FN present is
    a genuine zero, not undefined.
    """
    if counts.tp + counts.fp == 0 or counts.tp + counts.fn == 0:
        return None
    if counts.tp == 0:
        return 0.0
    pr = counts.tp / (counts.tp + counts.fp)
    re = counts.tp / (counts.tp + counts.fn)
    return 2.0 * pr * re / (pr + re)


def _check_same_shape(a: Frame, b: Frame) -> None:
    if (a.height, a.width, a.channels) != (b.height, b.width, b.channels):
        raise ValueError(
            f"frame shapes differ: {a.data.shape} vs {b.data.shape}"
        )


def psnr(a: Frame, b: Frame, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; inf for identical frames."""
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    _check_same_shape(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def sequence_psnr(a: FrameSequence, b: FrameSequence, peak: float = 255.0) -> float:
    """PSNR with the MSE pooled over every sample of every frame.

    Pooling keeps the value finite when only some frames differ, which
    a per-frame mean would turn into inf.
    """
    if len(a) != len(b):
        raise ValueError(f"sequence lengths differ: {len(a)} vs {len(b)}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    total = 0.0
    count = 0
    for fa, fb in zip(a, b):
        _check_same_shape(fa, fb)
        total += float(np.sum((fa.data - fb.data) ** 2))
        count += fa.data.size
    if total == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / (total / count))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(
    a: Frame,
    b: Frame,
    *,
    k1: float = 0.01,
    k2: float = 0.03,
    peak: float = 255.0,
    window: int = 11,
    sigma: float = 1.5,
) -> float:
    """Structural similarity, averaged over valid window positions.

    Single-channel frames only; uses the reference Gaussian window.
    """
    _check_same_shape(a, b)
    if a.channels != 1:
        raise ValueError("ssim requires single-channel frames; convert to luma first")
    if window % 2 == 0 or window < 3:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if a.height < window or a.width < window:
        raise ValueError(
            f"frame {a.width}x{a.height} is smaller than the {window}x{window} window"
        )
    kernel = _gaussian_window(window, sigma)
    x, y = a.data, b.data
    mu_x = convolve2d(x, kernel, mode="valid")
    mu_y = convolve2d(y, kernel, mode="valid")
    xx = convolve2d(x * x, kernel, mode="valid")
    yy = convolve2d(y * y, kernel, mode="valid")
    xy = convolve2d(x * y, kernel, mode="valid")
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    score = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(score.mean())


def mean_ssim(a: FrameSequence, b: FrameSequence, **kwargs) -> float:
    """Mean per-frame SSIM over two sequences (luma of color frames)."""
    if len(a) != len(b):
        raise ValueError(f"sequence lengths differ: {len(a)} vs {len(b)}")
    values = []
    for fa, fb in zip(a, b):
        values.append(ssim(Frame(luma_array(fa)), Frame(luma_array(fb)), **kwargs))
    return float(np.mean(values))


def relative_improvement(baseline: float, treated: float) -> Optional[float]:
    """Percentage change of treated over baseline; None if baseline is 0."""
    if baseline == 0:
        return None
    return 100.0 * (treated - baseline) / baseline
