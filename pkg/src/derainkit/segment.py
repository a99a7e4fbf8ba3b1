"""Per-pixel mixture-of-Gaussians background subtraction.

A fixed pool of components per pixel, recursively updated: the best
matching component absorbs each sample, weights decay under a small
complexity prior, and a pixel is background when its matched component
sits inside the top-weight set covering background_fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError
from .frames import BinaryMask, Frame, FrameSequence

__all__ = [
    "MogParams",
    "MogModel",
    "SegmentationResult",
    "mog_init",
    "mog_update",
    "segment_sequence",
]


@dataclass(frozen=True)
class MogParams:
    """Mixture settings; complexity_prior defaults to 0.05 * learning_rate."""

    max_components: int = 5
    learning_rate: float = 0.005
    background_fraction: float = 0.9
    match_threshold: float = 2.5
    initial_variance: float = 225.0
    min_variance: float = 4.0
    complexity_prior: Optional[float] = None
    burn_in: int = 100

    def __post_init__(self) -> None:
        if self.max_components < 1:
            raise ConfigurationError("max_components must be >= 1")
        if not 0 < self.learning_rate < 1:
            raise ConfigurationError("learning_rate must lie in (0, 1)")
        if not 0 < self.background_fraction <= 1:
            raise ConfigurationError("background_fraction must lie in (0, 1]")
        if self.match_threshold <= 0:
            raise ConfigurationError("match_threshold must be positive")
        if self.initial_variance <= 0 or self.min_variance <= 0:
            raise ConfigurationError("variances must be positive")
        if self.min_variance > self.initial_variance:
            raise ConfigurationError("min_variance must not exceed initial_variance")
        if self.complexity_prior is None:
            object.__setattr__(self, "complexity_prior", 0.05 * self.learning_rate)
        if self.complexity_prior < 0:
            raise ConfigurationError("complexity_prior must be >= 0")
        if self.burn_in < 0:
            raise ConfigurationError("burn_in must be >= 0")


@dataclass
class MogModel:
    """Per-pixel mixture state, kept sorted by descending weight.

    weights: (K, h, w); zero weight marks an unused slot.
    means:   (K, h, w) for luma or (K, h, w, c) for color.
    variances: (K, h, w), shared across channels.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def max_components(self) -> int:
        return self.weights.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.means.ndim == 3 else self.means.shape[3]


def mog_init(frame: Frame, params: MogParams = MogParams()) -> MogModel:
    """One full-weight component per pixel, centered on the first frame."""
    k = params.max_components
    h, w = frame.height, frame.width
    weights = np.zeros((k, h, w))
    weights[0] = 1.0
    if frame.channels == 1:
        means = np.zeros((k, h, w))
        means[0] = frame.data
    else:
        means = np.zeros((k, h, w, frame.channels))
        means[0] = frame.data
    variances = np.full((k, h, w), params.initial_variance)
    return MogModel(weights, means, variances)


def _sample_axis(frame_data: np.ndarray, model: MogModel) -> np.ndarray:
    # Broadcast the sample against the component axis.
    return frame_data[None] if model.means.ndim == 3 else frame_data[None]


def mog_update(
    model: MogModel, frame: Frame, params: MogParams = MogParams()
) -> Tuple[MogModel, BinaryMask]:
    """Advance the model by one frame and classify its pixels.

    Returns the updated model and the foreground mask. Classification
    uses the pre-update weights, so a brand-new component is foreground
    on the frame that spawns it.
    """
    if (frame.height, frame.width) != model.weights.shape[1:]:
        raise ValueError(
            f"frame size {frame.width}x{frame.height} does not match the model"
        )
    expected_channels = model.channels
    if frame.channels != expected_channels:
        raise ValueError(
            f"frame has {frame.channels} channels, model expects {expected_channels}"
        )
    weights = model.weights
    means = model.means
    variances = model.variances
    k = model.max_components
    channels = expected_channels
    x = frame.data

    diff = x[None] - means
    if channels == 1:
        dist_sq = diff * diff
    else:
        dist_sq = np.sum(diff * diff, axis=3)
    active = weights > 0.0
    matched = active & (dist_sq <= (params.match_threshold**2) * variances)

    # Best match = matching component of highest weight (components are
    # sorted descending, so that is the first match along the axis).
    masked = np.where(matched, weights, -1.0)
    best = masked.argmax(axis=0)
    has_match = np.take_along_axis(masked, best[None], axis=0)[0] >= 0.0

    # Background test against the pre-update, sorted weights: a component
    # belongs to the background set iff the cumulative weight before it
    # is still below background_fraction.
    cum_before = np.cumsum(weights, axis=0) - weights
    in_bg_set = cum_before < params.background_fraction
    matched_in_bg = np.take_along_axis(in_bg_set, best[None], axis=0)[0]
    fg_bits = ~(has_match & matched_in_bg)

    lr = params.learning_rate
    ownership = np.zeros_like(weights)
    np.put_along_axis(ownership, best[None], has_match[None].astype(float), axis=0)

    new_weights = np.where(
        active, weights + lr * (ownership - weights) - lr * params.complexity_prior, 0.0
    )
    new_weights = np.maximum(new_weights, 0.0)  # prune by starvation

    own = ownership > 0.0
    own_b = own[..., None] if channels > 1 else own
    new_means = np.where(own_b, means + lr * diff, means)
    mean_sq_dev = dist_sq / channels
    new_vars = np.where(own, variances + lr * (mean_sq_dev - variances), variances)
    new_vars = np.maximum(new_vars, params.min_variance)

    # Unmatched samples claim the weakest slot (unused slots weigh 0).
    no_match = ~has_match
    if np.any(no_match):
        weakest = new_weights.argmin(axis=0)
        slot = np.zeros_like(new_weights, dtype=bool)
        np.put_along_axis(slot, weakest[None], no_match[None], axis=0)
        new_weights = np.where(slot, lr, new_weights)
        slot_b = slot[..., None] if channels > 1 else slot
        new_means = np.where(slot_b, x[None], new_means)
        new_vars = np.where(slot, params.initial_variance, new_vars)

    total = new_weights.sum(axis=0)
    new_weights = new_weights / total[None]

    # Restore the descending-weight invariant (stable for determinism).
    order = np.argsort(-new_weights, axis=0, kind="stable")
    new_weights = np.take_along_axis(new_weights, order, axis=0)
    new_vars = np.take_along_axis(new_vars, order, axis=0)
    order_b = order[..., None] if channels > 1 else order
    new_means = np.take_along_axis(new_means, order_b, axis=0)

    return MogModel(new_weights, new_means, new_vars), BinaryMask(fg_bits)


@dataclass(frozen=True)
class SegmentationResult:
    """Foreground masks for every frame; the first burn_in are warm-up."""

    masks: Tuple[BinaryMask, ...]
    burn_in: int

    def scored_indices(self) -> List[int]:
        return list(range(self.burn_in, len(self.masks)))


def segment_sequence(seq: FrameSequence, params: MogParams = MogParams()) -> SegmentationResult:
    """Run the mixture over a sequence, one mask per frame."""
    model = mog_init(seq[0], params)
    masks: List[BinaryMask] = []
    for frame in seq:
        model, mask = mog_update(model, frame, params)
        masks.append(mask)
    return SegmentationResult(tuple(masks), min(params.burn_in, len(masks)))
