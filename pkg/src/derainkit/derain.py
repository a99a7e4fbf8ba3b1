"""Rain removal: simple per-frame filters and the full streak pipeline.

The pipeline follows the classic photometric route: candidate pixels
must brighten symmetrically against both temporal neighbors, candidate
blobs must fit the linear brightness model of a streak, and surviving
blobs must agree with the dominant streak orientation over a sliding
window. Confirmed pixels are replaced by the two-frame average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError
from .frames import BinaryMask, Frame, FrameSequence, luma_array, to_luma

__all__ = [
    "GargNayarParams",
    "StreakBlob",
    "spatial_filter",
    "temporal_median",
    "photometric_candidates",
    "extract_blobs",
    "photometric_linearity_filter",
    "orientation_consensus",
    "chromatic_filter",
    "inpaint_temporal_mean",
    "garg_nayar",
]

# Elongation of a blob whose minor axis has zero variance (a perfect line).
_ELONGATION_CAP = 1e6


@dataclass(frozen=True)
class GargNayarParams:
    """Tunables for the streak detection and removal pipeline."""

    min_change: float = 3.0
    equality_tol: float = 1.0
    slope_range: Tuple[float, float] = (0.0, 0.039)
    min_streak_pixels: int = 5
    max_fit_rmse: float = 2.0
    window: int = 30
    orientation_tol: float = math.radians(15.0)
    min_elongation: float = 3.0
    use_chromatic: bool = False
    chromatic_tol: float = 10.0

    def __post_init__(self) -> None:
        if self.min_change <= 0:
            raise ConfigurationError("min_change must be positive")
        if self.equality_tol < 0:
            raise ConfigurationError("equality_tol must be >= 0")
        lo, hi = self.slope_range
        if lo > hi:
            raise ConfigurationError(f"invalid slope_range {self.slope_range}")
        if self.min_streak_pixels < 1:
            raise ConfigurationError("min_streak_pixels must be >= 1")
        if self.max_fit_rmse < 0:
            raise ConfigurationError("max_fit_rmse must be >= 0")
        if self.window < 1:
            raise ConfigurationError("window must be >= 1")
        if not 0 <= self.orientation_tol <= math.pi / 2:
            raise ConfigurationError("orientation_tol must lie in [0, pi/2]")
        if self.min_elongation < 1:
            raise ConfigurationError("min_elongation must be >= 1")
        if self.chromatic_tol < 0:
            raise ConfigurationError("chromatic_tol must be >= 0")


@dataclass(frozen=True)
class StreakBlob:
    """A connected candidate component with its photometric fit.

    pixels is an (n, 2) array of (x, y) coordinates. slope and intercept
    come from the least-squares fit of the brightness change against the
    background estimate: delta = -slope * background + intercept.
    """

    pixels: np.ndarray
    centroid: Tuple[float, float]
    orientation: float
    elongation: float
    slope: float
    intercept: float
    fit_rmse: float

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


# ---------------------------------------------------------------------------
# Per-frame filters
# ---------------------------------------------------------------------------


def spatial_filter(frame: Frame, mode: str = "mean", k: int = 3) -> Frame:
    """k x k mean or median with edge replication, per channel."""
    if mode not in ("mean", "median"):
        raise ConfigurationError(f"mode must be 'mean' or 'median', got {mode!r}")
    if k < 1 or k % 2 == 0:
        raise ConfigurationError(f"kernel size must be odd and >= 1, got {k}")
    size = (k, k) if frame.channels == 1 else (k, k, 1)
    if mode == "mean":
        out = ndimage.uniform_filter(frame.data, size=size, mode="nearest")
    else:
        out = ndimage.median_filter(frame.data, size=size, mode="nearest")
    return Frame(np.clip(out, 0.0, 255.0))


def temporal_median(seq: FrameSequence, w: int = 5) -> FrameSequence:
    """Per-pixel median over a centered window of w frames.

    Windows are clipped at the sequence ends; an even count of available
    frames takes the lower median, which reproduces the background
    exactly when streaks only brighten pixels.
    """
    if w < 3 or w % 2 == 0:
        raise ConfigurationError(f"window must be odd and >= 3, got {w}")
    if len(seq) < 2:
        raise ConfigurationError(f"need at least 2 frames, got {len(seq)}")
    stack = seq.stack()
    half = w // 2
    out = []
    for n in range(len(seq)):
        lo = max(0, n - half)
        hi = min(len(seq), n + half + 1)
        window = np.sort(stack[lo:hi], axis=0)
        out.append(Frame(window[(hi - lo - 1) // 2]))
    return FrameSequence(tuple(out), seq.fps)


# ---------------------------------------------------------------------------
# Detection stages
# ---------------------------------------------------------------------------


def photometric_candidates(
    prev: Frame,
    cur: Frame,
    nxt: Frame,
    min_change: float = 3.0,
    equality_tol: float = 1.0,
) -> BinaryMask:
    """Pixels brighter than both neighbors by a near-equal amount."""
    for name, f in (("prev", prev), ("cur", cur), ("next", nxt)):
        if f.channels != 1:
            raise ValueError(f"{name} frame must be single-channel luma")
    if prev.data.shape != cur.data.shape or nxt.data.shape != cur.data.shape:
        raise ValueError("frames must share dimensions")
    if min_change <= 0:
        raise ConfigurationError("min_change must be positive")
    if equality_tol < 0:
        raise ConfigurationError("equality_tol must be >= 0")
    dp = cur.data - prev.data
    dn = cur.data - nxt.data
    bits = (dp >= min_change) & (dn >= min_change) & (np.abs(dp - dn) <= equality_tol)
    return BinaryMask(bits)


def _fit_line(background: np.ndarray, delta: np.ndarray) -> Tuple[float, float, float]:
    """Least-squares delta = m * background + c; returns (m, c, rmse)."""
    if np.ptp(background) == 0.0:
        m = 0.0
        c = float(delta.mean())
    else:
        design = np.column_stack([background, np.ones_like(background)])
        (m, c), *_ = np.linalg.lstsq(design, delta, rcond=None)
    residual = delta - (m * background + c)
    return float(m), float(c), float(np.sqrt(np.mean(residual**2)))


def extract_blobs(
    mask: BinaryMask, delta: np.ndarray, background: np.ndarray
) -> List[StreakBlob]:
    """Group candidate pixels into 8-connected blobs with shape and fit stats."""
    if mask.bits.shape != delta.shape or mask.bits.shape != background.shape:
        raise ValueError("mask, delta, and background must share dimensions")
    labels, count = ndimage.label(mask.bits, structure=np.ones((3, 3), dtype=bool))
    blobs: List[StreakBlob] = []
    for region in range(1, count + 1):
        ys, xs = np.nonzero(labels == region)
        n = xs.size
        centroid = (float(xs.mean()), float(ys.mean()))
        if n == 1:
            orientation, elongation = 0.0, 1.0
        else:
            coords = np.stack([xs - xs.mean(), ys - ys.mean()])
            cov = coords @ coords.T / n
            evals, evecs = np.linalg.eigh(cov)
            minor, major = max(evals[0], 0.0), max(evals[1], 0.0)
            vx, vy = evecs[0, 1], evecs[1, 1]
            orientation = math.atan2(vy, vx) % math.pi
            if minor <= major * 1e-12:
                elongation = _ELONGATION_CAP
            else:
                elongation = max(math.sqrt(major / minor), 1.0)
        m, c, rmse = _fit_line(background[ys, xs], delta[ys, xs])
        blobs.append(
            StreakBlob(
                pixels=np.column_stack([xs, ys]),
                centroid=centroid,
                orientation=orientation,
                elongation=elongation,
                slope=-m,
                intercept=c,
                fit_rmse=rmse,
            )
        )
    return blobs


def photometric_linearity_filter(
    blobs: Sequence[StreakBlob], params: GargNayarParams = GargNayarParams()
) -> List[StreakBlob]:
    """Keep blobs that look like streaks: big enough, admissible slope, tight fit."""
    lo, hi = params.slope_range
    return [
        b
        for b in blobs
        if b.size >= params.min_streak_pixels
        and lo <= b.slope <= hi
        and b.fit_rmse <= params.max_fit_rmse
    ]


def _angular_distance(a: float, b: float) -> float:
    # Orientations have period pi.
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def orientation_consensus(
    frame_blobs: Sequence[Sequence[StreakBlob]],
    shape: Tuple[int, int],
    params: GargNayarParams = GargNayarParams(),
) -> List[BinaryMask]:
    """Confirm blobs aligned with the dominant orientation near each frame.

    The dominant orientation is the mode of a pixel-count-weighted
    histogram (10 degree bins) over a centered window of params.window
    frames, built from sufficiently elongated blobs only.
    """
    n_frames = len(frame_blobs)
    bins = 18
    bin_width = math.pi / bins

    def hist_of(frame: Sequence[StreakBlob]) -> np.ndarray:
        h = np.zeros(bins)
        for blob in frame:
            if blob.elongation >= params.min_elongation:
                h[int(blob.orientation / bin_width) % bins] += blob.size
        return h

    histograms = [hist_of(frame) for frame in frame_blobs]
    # Centered clipping; an even window extends one frame further forward.
    back = (params.window - 1) // 2
    fwd = params.window // 2
    masks: List[BinaryMask] = []
    for n in range(n_frames):
        lo = max(0, n - back)
        hi = min(n_frames - 1, n + fwd)
        pooled = np.sum(histograms[lo : hi + 1], axis=0)
        bits = np.zeros(shape, dtype=bool)
        if pooled.sum() > 0:
            mode = int(np.argmax(pooled))  # ties resolve to the lowest bin
            dominant = (mode + 0.5) * bin_width
            for blob in frame_blobs[n]:
                if (
                    blob.elongation >= params.min_elongation
                    and _angular_distance(blob.orientation, dominant) <= params.orientation_tol
                ):
                    bits[blob.pixels[:, 1], blob.pixels[:, 0]] = True
        masks.append(BinaryMask(bits))
    return masks


def chromatic_filter(
    candidates: BinaryMask,
    prev: Frame,
    cur: Frame,
    nxt: Frame,
    chromatic_tol: float = 10.0,
) -> BinaryMask:
    """Drop candidates whose per-channel brightness changes disagree."""
    for name, f in (("prev", prev), ("cur", cur), ("next", nxt)):
        if f.channels != 3:
            raise ValueError(f"{name} frame must be RGB for the chromatic check")
    if chromatic_tol < 0:
        raise ConfigurationError("chromatic_tol must be >= 0")
    delta = cur.data - 0.5 * (prev.data + nxt.data)
    spread = delta.max(axis=2) - delta.min(axis=2)
    return BinaryMask(candidates.bits & (spread <= chromatic_tol))


def inpaint_temporal_mean(cur: Frame, prev: Frame, nxt: Frame, confirmed: BinaryMask) -> Frame:
    """Replace confirmed pixels with the average of both temporal neighbors."""
    if prev.data.shape != cur.data.shape or nxt.data.shape != cur.data.shape:
        raise ValueError("frames must share dimensions")
    if (confirmed.height, confirmed.width) != (cur.height, cur.width):
        raise ValueError("mask dimensions must match the frame")
    out = cur.data.copy()
    average = 0.5 * (prev.data + nxt.data)
    out[confirmed.bits] = average[confirmed.bits]
    return Frame(out)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------


def garg_nayar(
    seq: FrameSequence, params: GargNayarParams = GargNayarParams()
) -> Tuple[FrameSequence, List[BinaryMask]]:
    """Detect and remove rain streaks across a sequence.

    Returns the derained sequence plus the per-frame confirmed masks.
    The first and last frames pass through unmodified (their masks are
    empty); every other pixel is modified only if its mask bit is set.
    """
    if len(seq) < 3:
        raise ConfigurationError(f"need at least 3 frames, got {len(seq)}")
    if params.use_chromatic and seq.channels != 3:
        raise ConfigurationError("chromatic filtering requires RGB frames")
    shape = (seq.height, seq.width)
    lumas = [luma_array(f) for f in seq]

    accepted: List[List[StreakBlob]] = []
    for n in range(1, len(seq) - 1):
        prev_l, cur_l, nxt_l = Frame(lumas[n - 1]), Frame(lumas[n]), Frame(lumas[n + 1])
        candidates = photometric_candidates(
            prev_l, cur_l, nxt_l, params.min_change, params.equality_tol
        )
        if params.use_chromatic:
            candidates = chromatic_filter(
                candidates, seq[n - 1], seq[n], seq[n + 1], params.chromatic_tol
            )
        background = 0.5 * (lumas[n - 1] + lumas[n + 1])
        delta = lumas[n] - background
        blobs = extract_blobs(candidates, delta, background)
        accepted.append(photometric_linearity_filter(blobs, params))

    confirmed = orientation_consensus(accepted, shape, params)

    empty = BinaryMask(np.zeros(shape, dtype=bool))
    out_frames: List[Frame] = [seq[0]]
    out_masks: List[BinaryMask] = [empty]
    for n in range(1, len(seq) - 1):
        mask = confirmed[n - 1]
        out_frames.append(inpaint_temporal_mean(seq[n], seq[n - 1], seq[n + 1], mask))
        out_masks.append(mask)
    out_frames.append(seq[len(seq) - 1])
    out_masks.append(empty)
    return FrameSequence(tuple(out_frames), seq.fps), out_masks
