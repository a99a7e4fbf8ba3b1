"""Turn config specs into callables over frame sequences.

A derainer maps a sequence to a same-shaped sequence; a segmenter maps
a sequence to per-frame foreground masks. External methods are read
from directories laid out as <dir>/<sequence-name>/<frames>.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, List

import numpy as np

from ..decompose import admm_decompose
from ..derain import garg_nayar, spatial_filter, temporal_median
from ..errors import DataFormatError
from ..frames import (
    BinaryMask,
    Frame,
    FrameSequence,
    list_frame_files,
    load_binary_mask,
    load_sequence,
    luma_array,
)
from ..segment import SegmentationResult, segment_sequence
from .config import DerainerSpec, SegmenterSpec
from .manifest import SequenceSpec

Derainer = Callable[[FrameSequence, SequenceSpec], FrameSequence]
Segmenter = Callable[[FrameSequence], SegmentationResult]


def _check_like(seq: FrameSequence, out: FrameSequence, what: str, name: str) -> FrameSequence:
    if (
        len(out) != len(seq)
        or out.height != seq.height
        or out.width != seq.width
    ):
        raise DataFormatError(
            f"{what} for sequence {name!r} does not match the input: "
            f"{len(out)} frames of {out.width}x{out.height}, "
            f"expected {len(seq)} of {seq.width}x{seq.height}"
        )
    return out


def _admm_derain(seq: FrameSequence, spec: DerainerSpec) -> FrameSequence:
    # The solver works on luma; subtracting its rain layer from every
    # channel removes streaks without recoloring the background.
    frames: List[Frame] = []
    for frame in seq:
        result = admm_decompose(luma_array(frame), spec.params)
        rain = result.rain if frame.data.ndim == 2 else result.rain[:, :, None]
        frames.append(Frame(np.clip(frame.data - rain, 0.0, 255.0)))
    return FrameSequence(tuple(frames), seq.fps)


def build_derainer(spec: DerainerSpec) -> Derainer:
    if spec.kind == "none":
        return lambda seq, _: seq
    if spec.kind == "spatial":
        mode, k = spec.options["mode"], spec.options["k"]
        return lambda seq, _: FrameSequence(
            tuple(spatial_filter(f, mode, k) for f in seq), seq.fps
        )
    if spec.kind == "temporal_median":
        w = spec.options["w"]
        return lambda seq, _: temporal_median(seq, w)
    if spec.kind == "garg_nayar":
        return lambda seq, _: garg_nayar(seq, spec.params)[0]
    if spec.kind == "admm":
        return lambda seq, _: _admm_derain(seq, spec)
    if spec.kind == "external":
        root = Path(spec.options["dir"])

        def _external(seq: FrameSequence, sspec: SequenceSpec) -> FrameSequence:
            out = load_sequence(root / sspec.name, sspec.color_mode, fps=seq.fps)
            return _check_like(seq, out, f"external derainer {spec.label!r}", sspec.name)

        return _external
    raise AssertionError(f"unhandled derainer kind {spec.kind!r}")


def build_segmenter(spec: SegmenterSpec, sequence: SequenceSpec) -> Segmenter:
    if spec.kind == "mog":
        return lambda seq: segment_sequence(seq, spec.params)
    if spec.kind == "external":
        root = Path(spec.options["dir"])
        burn_in = spec.options["burn_in"]

        def _external(seq: FrameSequence) -> SegmentationResult:
            files = list_frame_files(root / sequence.name)
            if len(files) != len(seq):
                raise DataFormatError(
                    f"external segmenter {spec.label!r} for sequence "
                    f"{sequence.name!r}: {len(files)} masks for {len(seq)} frames"
                )
            masks = tuple(load_binary_mask(p) for _, p in files)
            for m in masks:
                if m.bits.shape != (seq.height, seq.width):
                    raise DataFormatError(
                        f"external segmenter {spec.label!r}: mask shape "
                        f"{m.bits.shape} does not match frames "
                        f"({seq.height}, {seq.width})"
                    )
            return SegmentationResult(masks, min(burn_in, len(masks)))

        return _external
    raise AssertionError(f"unhandled segmenter kind {spec.kind!r}")
