"""Weather optics and the synthetic streak generator.

Extinction models map precipitation rates to extinction coefficients;
the generator renders photometrically consistent streaks over clean
frames and doubles as the ground-truth oracle for detector tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError
from .frames import BinaryMask, Frame, FrameSequence, TriStateMask, BG, FG, luma_array

__all__ = [
    "ExtinctionModel",
    "RainConfig",
    "MovingRectangle",
    "rain_extinction",
    "snow_extinction",
    "attenuate",
    "render_streaks",
    "generate_synthetic_sequence",
    "sample_streak_segments",
    "rasterize_segment",
    "smooth_noise_background",
]

# Snow extinction reuses the rain power law at one tenth of the rate.
_SNOW_RATE_SCALE = 0.1

# Admissible slope range for the streak photometric model.
SLOPE_RANGE = (0.0, 0.039)


@dataclass(frozen=True)
class ExtinctionModel:
    """Power-law extinction: coefficient * rate ** exponent.

    kind is "rain" or "snow"; the snow variant is evaluated at one tenth
    of the precipitation rate.
    """

    coefficient: float
    exponent: float
    kind: str

    def __post_init__(self) -> None:
        if self.coefficient < 0:
            raise ConfigurationError(f"coefficient must be >= 0, got {self.coefficient}")
        if self.kind not in ("rain", "snow"):
            raise ConfigurationError(f"kind must be 'rain' or 'snow', got {self.kind!r}")


def rain_extinction(model: ExtinctionModel, rate: float) -> float:
    """Extinction coefficient for a rain rate (mm/h)."""
    if model.kind != "rain":
        raise ConfigurationError(f"expected a rain model, got kind={model.kind!r}")
    if rate < 0:
        raise ConfigurationError(f"rate must be >= 0, got {rate}")
    return model.coefficient * rate**model.exponent

def snow_extinction(model: ExtinctionModel, rate: float) -> float:
    """Extinction coefficient for a snowfall rate, via the scaled rain law."""
    if model.kind != "snow":
        raise ConfigurationError(f"expected a snow model, got kind={model.kind!r}")
    if rate < 0:
        raise ConfigurationError(f"rate must be >= 0, got {rate}")
    return model.coefficient * _SNOW_RATE_SCALE**model.exponent * rate**model.exponent


def attenuate(frame: Frame, beta: float, depth: float, airlight: float = 255.0) -> Frame:
    """Blend a frame toward the airlight by exp(-beta * depth)."""
    if beta < 0:
        raise ConfigurationError(f"beta must be >= 0, got {beta}")
    if depth < 0:
        raise ConfigurationError(f"depth must be >= 0, got {depth}")
    if not 0.0 <= airlight <= 255.0:
        raise ConfigurationError(f"airlight must lie in [0, 255], got {airlight}")
    transmission = math.exp(-beta * depth)
    out = frame.data * transmission + airlight * (1.0 - transmission)
    return Frame(np.clip(out, 0.0, 255.0))


@dataclass(frozen=True)
class RainConfig:
    """Synthetic streak generator settings.

    Streak brightness follows delta = brightness_offset
    - photometric_slope * background, applied once per covered pixel.
    """

    streaks_per_frame: float = 50.0
    orientation_mean: float = math.pi / 2  # radians in [0, pi); pi/2 is vertical
    orientation_jitter: float = math.radians(3.0)
    length_range: Tuple[float, float] = (8.0, 14.0)
    width: float = 1.0
    photometric_slope: float = 0.02
    brightness_offset: float = 30.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.streaks_per_frame < 0:
            raise ConfigurationError("streaks_per_frame must be >= 0")
        if not 0.0 <= self.orientation_mean < math.pi:
            raise ConfigurationError("orientation_mean must lie in [0, pi)")
        if self.orientation_jitter < 0:
            raise ConfigurationError("orientation_jitter must be >= 0")
        lo, hi = self.length_range
        if not (0 < lo <= hi):
            raise ConfigurationError(f"invalid length_range {self.length_range}")
        if self.width <= 0:
            raise ConfigurationError("width must be positive")
        if not SLOPE_RANGE[0] <= self.photometric_slope <= SLOPE_RANGE[1]:
            raise ConfigurationError(
                f"photometric_slope must lie in [{SLOPE_RANGE[0]}, {SLOPE_RANGE[1]}]"
            )
        if self.brightness_offset < self.photometric_slope * 255.0:
            raise ConfigurationError(
                "brightness_offset must be >= photometric_slope * 255 so streaks never darken"
            )


def _frame_rng(seed: int, frame_index: int) -> np.random.Generator:
    # Counter-based seeding: one independent stream per (seed, frame).
    return np.random.default_rng(np.random.SeedSequence((seed, frame_index)))


def sample_streak_segments(
    cfg: RainConfig, shape: Tuple[int, int], frame_index: int
) -> List[Tuple[Tuple[float, float], Tuple[float, float]]]:
    """Draw streak line segments ((x0, y0), (x1, y1)) for one frame.

    Centers are sampled over the frame extended by the largest possible
    capsule half-extent, with the Poisson rate scaled to keep
    streaks_per_frame meaningful per frame area. Sampling only inside
    the frame would thin coverage near the borders and masks of
    consecutive frames would overlap more than independent placement
    predicts.
    """
    h, w = shape
    rng = _frame_rng(cfg.seed, frame_index)
    margin = 0.5 * cfg.length_range[1] + 0.5 * cfg.width + 1.0
    area_scale = (w + 2.0 * margin) * (h + 2.0 * margin) / (w * h)
    count = int(rng.poisson(cfg.streaks_per_frame * area_scale))
    segments = []
    for _ in range(count):
        cx = rng.uniform(-margin, w - 1 + margin)
        cy = rng.uniform(-margin, h - 1 + margin)
        theta = rng.normal(cfg.orientation_mean, cfg.orientation_jitter) % math.pi
        length = rng.uniform(*cfg.length_range)
        dx = 0.5 * length * math.cos(theta)
        dy = 0.5 * length * math.sin(theta)
        segments.append(((cx - dx, cy - dy), (cx + dx, cy + dy)))
    return segments


def rasterize_segment(
    shape: Tuple[int, int],
    p0: Tuple[float, float],
    p1: Tuple[float, float],
    width: float,
) -> np.ndarray:
    """Boolean coverage of a stroke: pixels within width/2 of the segment.

    No anti-aliasing; a pixel is covered iff its center lies inside the
    capsule around the segment.
    """
    h, w = shape
    radius = width / 2.0
    (x0, y0), (x1, y1) = p0, p1
    cx_lo = max(0, int(math.floor(min(x0, x1) - radius - 1)))
    cx_hi = min(w - 1, int(math.ceil(max(x0, x1) + radius + 1)))
    cy_lo = max(0, int(math.floor(min(y0, y1) - radius - 1)))
    cy_hi = min(h - 1, int(math.ceil(max(y0, y1) + radius + 1)))
    mask = np.zeros(shape, dtype=bool)
    if cx_lo > cx_hi or cy_lo > cy_hi:
        return mask
    ys, xs = np.mgrid[cy_lo : cy_hi + 1, cx_lo : cx_hi + 1]
    ex, ey = x1 - x0, y1 - y0
    seg_len_sq = ex * ex + ey * ey
    if seg_len_sq == 0:
        dist_sq = (xs - x0) ** 2 + (ys - y0) ** 2
    else:
        t = np.clip(((xs - x0) * ex + (ys - y0) * ey) / seg_len_sq, 0.0, 1.0)
        dist_sq = (xs - (x0 + t * ex)) ** 2 + (ys - (y0 + t * ey)) ** 2
    mask[cy_lo : cy_hi + 1, cx_lo : cx_hi + 1] = dist_sq <= radius * radius
    return mask


def streak_coverage(cfg: RainConfig, shape: Tuple[int, int], frame_index: int) -> np.ndarray:
    """Union coverage mask of all streaks for one frame."""
    coverage = np.zeros(shape, dtype=bool)
    for p0, p1 in sample_streak_segments(cfg, shape, frame_index):
        coverage |= rasterize_segment(shape, p0, p1, cfg.width)
    return coverage


def apply_streak_photometry(
    clean: Frame, coverage: np.ndarray, slope: float, offset: float
) -> Tuple[Frame, BinaryMask]:
    """Brighten covered pixels by offset - slope * background luma.

    The delta is computed from luma and added to every channel, so the
    change is chromatically uniform. Overlapping streaks brighten a
    pixel once. The returned mask marks exactly the pixels whose stored
    value changed (saturated pixels that did not move are excluded).
    """
    background = luma_array(clean)
    delta = np.where(coverage, offset - slope * background, 0.0)
    if clean.channels == 3:
        rainy = np.clip(clean.data + delta[:, :, None], 0.0, 255.0)
        changed = np.any(rainy != clean.data, axis=2)
    else:
        rainy = np.clip(clean.data + delta, 0.0, 255.0)
        changed = rainy != clean.data
    return Frame(rainy), BinaryMask(changed)


def render_streaks(clean: Frame, cfg: RainConfig, frame_index: int) -> Tuple[Frame, BinaryMask]:
    """Overlay one frame's worth of streaks; deterministic per (seed, index)."""
    if frame_index < 0:
        raise ConfigurationError(f"frame_index must be >= 0, got {frame_index}")
    coverage = streak_coverage(cfg, (clean.height, clean.width), frame_index)
    return apply_streak_photometry(clean, coverage, cfg.photometric_slope, cfg.brightness_offset)


@dataclass(frozen=True)
class MovingRectangle:
    """A constant-offset rectangle translating at a fixed velocity."""

    x: float
    y: float
    width: int
    height: int
    dx: float
    dy: float
    intensity_offset: float = 80.0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError("rectangle width and height must be positive")

    def position(self, t: int) -> Tuple[int, int]:
        """Integer top-left corner at frame t."""
        return (int(round(self.x + t * self.dx)), int(round(self.y + t * self.dy)))


def _rect_mask(rect: MovingRectangle, shape: Tuple[int, int], t: int) -> np.ndarray:
    h, w = shape
    x0, y0 = rect.position(t)
    if x0 < 0 or y0 < 0 or x0 + rect.width > w or y0 + rect.height > h:
        raise ConfigurationError(
            f"rectangle leaves the frame at t={t}: corner ({x0}, {y0}), "
            f"size {rect.width}x{rect.height}, frame {w}x{h}"
        )
    mask = np.zeros(shape, dtype=bool)
    mask[y0 : y0 + rect.height, x0 : x0 + rect.width] = True
    return mask


def generate_synthetic_sequence(
    background: Frame,
    object_cfg: Optional[MovingRectangle],
    rain_cfg: Optional[RainConfig],
    n_frames: int,
    fps: float,
) -> Tuple[FrameSequence, FrameSequence, List[BinaryMask], List[TriStateMask]]:
    """Build matched clean/rainy sequences with exact ground truth.

    Returns (clean, rainy, streak_masks, fg_masks). The rainy sequence
    differs from the clean one exactly on the streak masks; fg masks
    label the moving object.
    """
    if n_frames < 1:
        raise ConfigurationError(f"n_frames must be >= 1, got {n_frames}")
    if fps <= 0:
        raise ConfigurationError(f"fps must be positive, got {fps}")
    shape = (background.height, background.width)
    clean_frames: List[Frame] = []
    rainy_frames: List[Frame] = []
    streak_masks: List[BinaryMask] = []
    fg_masks: List[TriStateMask] = []
    for t in range(n_frames):
        if object_cfg is not None:
            rect = _rect_mask(object_cfg, shape, t)
            data = background.data.copy()
            data[rect] = np.clip(data[rect] + object_cfg.intensity_offset, 0.0, 255.0)
            clean = Frame(data)
            labels = np.where(rect, FG, BG).astype(np.uint8)
        else:
            clean = background
            labels = np.full(shape, BG, dtype=np.uint8)
        if rain_cfg is not None:
            rainy, streaks = render_streaks(clean, rain_cfg, t)
        else:
            rainy = clean
            streaks = BinaryMask(np.zeros(shape, dtype=bool))
        clean_frames.append(clean)
        rainy_frames.append(rainy)
        streak_masks.append(streaks)
        fg_masks.append(TriStateMask(labels))
    return (
        FrameSequence(tuple(clean_frames), fps),
        FrameSequence(tuple(rainy_frames), fps),
        streak_masks,
        fg_masks,
    )


def smooth_noise_background(
    width: int,
    height: int,
    *,
    low: float = 40.0,
    high: float = 200.0,
    smooth_sigma: float = 3.0,
    seed: int = 0,
    channels: int = 1,
) -> Frame:
    """Gaussian-smoothed uniform noise; a generic textured backdrop."""
    if not (0 <= low <= high <= 255):
        raise ConfigurationError(f"invalid intensity range [{low}, {high}]")
    if channels not in (1, 3):
        raise ConfigurationError(f"channels must be 1 or 3, got {channels}")
    rng = np.random.default_rng(seed)
    if channels == 1:
        noise = rng.uniform(low, high, size=(height, width))
        smooth = ndimage.gaussian_filter(noise, smooth_sigma, mode="nearest")
    else:
        noise = rng.uniform(low, high, size=(height, width, 3))
        smooth = ndimage.gaussian_filter(noise, (smooth_sigma, smooth_sigma, 0), mode="nearest")
    return Frame(np.clip(smooth, 0.0, 255.0))
