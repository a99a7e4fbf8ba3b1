"""Frame, sequence, and mask containers plus PNG I/O.

Samples are kept as float64 in [0, 255] throughout; quantization
(round half up, then clamp) happens only when a frame is written to
disk. Masks use three labels: background, foreground, and don't-care.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, NamedTuple, Sequence, Tuple

import numpy as np
from PIL import Image

from .errors import DataFormatError

__all__ = [
    "BG",
    "FG",
    "DC",
    "Frame",
    "FrameSequence",
    "TriStateMask",
    "BinaryMask",
    "TemporalWindow",
    "to_luma",
    "temporal_window",
    "load_sequence",
    "load_tristate_mask",
    "load_binary_mask",
    "save_frame",
    "save_sequence",
    "save_tristate_mask",
    "save_binary_mask",
    "list_frame_files",
]

# Tri-state labels (internal) and their on-disk byte encoding.
BG, FG, DC = 0, 1, 2
_BYTE_FOR_LABEL = {BG: 0, FG: 255, DC: 128}
_LABEL_FOR_BYTE = {0: BG, 255: FG, 128: DC}

# Rec. 601 luma weights.
_LUMA_R, _LUMA_G = 0.299, 0.587


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Frame:
    """A single image with float64 samples in [0, 255].

    data has shape (height, width) for luma or (height, width, 3) for RGB.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim not in (2, 3):
            raise ValueError(f"frame data must be 2-D or 3-D, got shape {arr.shape}")
        if arr.ndim == 3 and arr.shape[2] != 3:
            raise ValueError(f"color frames must have 3 channels, got {arr.shape[2]}")
        if arr.size == 0:
            raise ValueError("frame must contain at least one pixel")
        if not np.all(np.isfinite(arr)):
            raise ValueError("frame samples must be finite")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 255.0:
            raise ValueError(f"frame samples must lie in [0, 255], got [{lo}, {hi}]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


@dataclass(frozen=True)
class FrameSequence:
    """An ordered run of equally sized frames at a fixed frame rate."""

    frames: Tuple[Frame, ...]
    fps: float

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("sequence must contain at least one frame")
        if not (self.fps > 0):
            raise ValueError(f"fps must be positive, got {self.fps}")
        first = frames[0]
        for i, f in enumerate(frames):
            if (f.height, f.width, f.channels) != (first.height, first.width, first.channels):
                raise ValueError(
                    f"frame {i} has shape {f.data.shape}, expected {first.data.shape}"
                )
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, index: int) -> Frame:
        return self.frames[index]

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def channels(self) -> int:
        return self.frames[0].channels

    def stack(self) -> np.ndarray:
        """All frames as one (n, h, w[, c]) array."""
        return np.stack([f.data for f in self.frames])


@dataclass(frozen=True)
class TriStateMask:
    """Per-pixel labels: BG (0), FG (1), or DC (2, excluded from scoring)."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"mask labels must be 2-D, got shape {arr.shape}")
        arr = arr.astype(np.uint8, copy=True)
        if not np.isin(arr, (BG, FG, DC)).all():
            raise ValueError("mask labels must be BG, FG, or DC")
        object.__setattr__(self, "labels", _freeze(arr))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def fg(self) -> np.ndarray:
        return self.labels == FG

    def dc(self) -> np.ndarray:
        return self.labels == DC


@dataclass(frozen=True)
class BinaryMask:
    """A boolean pixel mask (detector output, streak coverage, and so on)."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"mask bits must be 2-D, got shape {arr.shape}")
        arr = arr.astype(bool, copy=True)
        object.__setattr__(self, "bits", _freeze(arr))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(self.bits.sum())


class TemporalWindow(NamedTuple):
    """Frames around an index, with the indices that fell off either end."""

    frames: List[Frame]
    indices: List[int]
    clipped: List[int]


def to_luma(frame: Frame) -> Frame:
    """Convert an RGB frame to Rec. 601 luma.

    Anchoring the sum on the blue channel keeps gray inputs exact:
    r = g = b maps to exactly b.
    """
    if frame.channels != 3:
        raise ValueError("to_luma requires a 3-channel frame")
    r = frame.data[:, :, 0]
    g = frame.data[:, :, 1]
    b = frame.data[:, :, 2]
    luma = b + _LUMA_R * (r - b) + _LUMA_G * (g - b)
    return Frame(np.clip(luma, 0.0, 255.0))


def luma_array(frame: Frame) -> np.ndarray:
    """2-D luma samples of a frame of either channel count."""
    if frame.channels == 1:
        return frame.data
    return to_luma(frame).data


def temporal_window(seq: FrameSequence, n: int, radius: int) -> TemporalWindow:
    """Frames [n - radius, n + radius] clipped to the sequence bounds."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if not 0 <= n < len(seq):
        raise IndexError(f"frame index {n} out of range for sequence of {len(seq)}")
    requested = range(n - radius, n + radius + 1)
    indices = [i for i in requested if 0 <= i < len(seq)]
    clipped = [i for i in requested if i not in indices]
    return TemporalWindow([seq[i] for i in indices], indices, clipped)


# ---------------------------------------------------------------------------
# PNG I/O
# ---------------------------------------------------------------------------

_FRAME_STEM = re.compile(r"^\d+$")


def list_frame_files(path: Path | str) -> List[Tuple[int, Path]]:
    """(index, file) pairs for a frame directory, sorted by numeric index.

    Filenames must be zero-padded decimal stems; anything else is a
    format error rather than silently skipped.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise DataFormatError(f"not a directory: {directory}")
    out: List[Tuple[int, Path]] = []
    for file in sorted(directory.glob("*.png")):
        if not _FRAME_STEM.match(file.stem):
            raise DataFormatError(f"frame filename is not a decimal index: {file.name}")
        out.append((int(file.stem), file))
    if not out:
        raise DataFormatError(f"no .png frames found in {directory}")
    out.sort(key=lambda pair: pair[0])
    indices = [i for i, _ in out]
    if len(set(indices)) != len(indices):
        raise DataFormatError(f"duplicate frame indices in {directory}")
    return out


def _read_image(path: Path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except OSError as exc:
        raise DataFormatError(f"cannot decode {path}: {exc}") from exc
    return img


def _load_frame(path: Path, color_mode: str) -> Frame:
    img = _read_image(path)
    if img.mode not in ("L", "RGB"):
        try:
            img = img.convert("RGB" if color_mode == "rgb" else "L")
        except ValueError as exc:
            raise DataFormatError(f"{path}: unsupported image mode {img.mode}") from exc
    arr = np.asarray(img, dtype=np.float64)
    if color_mode == "rgb":
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        return Frame(arr)
    if arr.ndim == 3:
        return to_luma(Frame(arr))
    return Frame(arr)


def load_sequence(path: Path | str, color_mode: str = "luma", *, fps: float) -> FrameSequence:
    """Load a directory of numbered PNG frames.

    color_mode selects the sample layout: "luma" collapses RGB files with
    Rec. 601 weights, "rgb" replicates grayscale files to three channels.
    """
    if color_mode not in ("luma", "rgb"):
        raise ValueError(f"color_mode must be 'luma' or 'rgb', got {color_mode!r}")
    files = list_frame_files(path)
    frames = [_load_frame(file, color_mode) for _, file in files]
    first = frames[0]
    for (idx, file), frame in zip(files, frames):
        if (frame.height, frame.width) != (first.height, first.width):
            raise DataFormatError(
                f"{file}: size {frame.width}x{frame.height} differs from "
                f"{first.width}x{first.height}"
            )
    return FrameSequence(tuple(frames), fps)


def load_tristate_mask(path: Path | str) -> TriStateMask:
    """Load an annotation mask encoded as bytes 0 (BG), 255 (FG), 128 (DC)."""
    file = Path(path)
    img = _read_image(file)
    if img.mode != "L":
        raise DataFormatError(f"{file}: mask must be 8-bit grayscale, got mode {img.mode}")
    arr = np.asarray(img, dtype=np.uint8)
    valid = np.isin(arr, (0, 128, 255))
    if not valid.all():
        ys, xs = np.nonzero(~valid)
        y, x = int(ys[0]), int(xs[0])
        raise DataFormatError(
            f"{file}: invalid mask byte {int(arr[y, x])} at pixel (x={x}, y={y}); "
            "expected 0, 128, or 255"
        )
    labels = np.empty(arr.shape, dtype=np.uint8)
    for byte, label in _LABEL_FOR_BYTE.items():
        labels[arr == byte] = label
    return TriStateMask(labels)


def load_binary_mask(path: Path | str) -> BinaryMask:
    """Load a detector mask encoded as bytes 0 (off) and 255 (on)."""
    file = Path(path)
    img = _read_image(file)
    if img.mode != "L":
        raise DataFormatError(f"{file}: mask must be 8-bit grayscale, got mode {img.mode}")
    arr = np.asarray(img, dtype=np.uint8)
    valid = np.isin(arr, (0, 255))
    if not valid.all():
        ys, xs = np.nonzero(~valid)
        y, x = int(ys[0]), int(xs[0])
        raise DataFormatError(
            f"{file}: invalid mask byte {int(arr[y, x])} at pixel (x={x}, y={y}); "
            "expected 0 or 255"
        )
    return BinaryMask(arr == 255)


def quantize(samples: np.ndarray) -> np.ndarray:
    """Round half up and clamp to the 8-bit range."""
    return np.clip(np.floor(samples + 0.5), 0, 255).astype(np.uint8)


def save_frame(frame: Frame, path: Path | str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(quantize(frame.data)).save(path)


def save_sequence(seq: FrameSequence, directory: Path | str, *, digits: int = 6) -> List[Path]:
    """Write frames as zero-padded PNGs (000000.png, 000001.png, ...)."""
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(seq):
        path = out_dir / f"{i:0{digits}d}.png"
        save_frame(frame, path)
        paths.append(path)
    return paths


def save_tristate_mask(mask: TriStateMask, path: Path | str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    encoded = np.zeros(mask.labels.shape, dtype=np.uint8)
    for label, byte in _BYTE_FOR_LABEL.items():
        encoded[mask.labels == label] = byte
    Image.fromarray(encoded, mode="L").save(path)


def save_binary_mask(mask: BinaryMask, path: Path | str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.where(mask.bits, 255, 0).astype(np.uint8), mode="L").save(path)
