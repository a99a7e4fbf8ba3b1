"""Dataset manifests: which sequences exist and where their files live.

A manifest is a JSON file listing sequences. Paths are stored relative
to the manifest file so a dataset directory can be moved wholesale.
Ground-truth masks are sparse: the masks directory holds files only for
the annotated frame indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..errors import ConfigurationError, DataFormatError
from ..frames import (
    FrameSequence,
    TriStateMask,
    list_frame_files,
    load_sequence,
    load_tristate_mask,
)

COLOR_MODES = ("luma", "rgb")


@dataclass(frozen=True)
class SequenceSpec:
    """One video: a frames directory plus optional annotations.

    clean_frames_dir points at the rain-free counterpart when one
    exists (synthetic data); restoration scoring needs it.
    """

    name: str
    frames_dir: Path
    fps: float
    color_mode: str = "luma"
    gt_masks_dir: Optional[Path] = None
    clean_frames_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigurationError("sequence name must be non-empty")
        if self.name == "average":
            raise ConfigurationError("sequence name 'average' is reserved for report rows")
        if not (self.fps > 0):
            raise ConfigurationError(f"sequence {self.name!r}: fps must be positive, got {self.fps}")
        if self.color_mode not in COLOR_MODES:
            raise ConfigurationError(
                f"sequence {self.name!r}: color_mode must be one of {COLOR_MODES}, "
                f"got {self.color_mode!r}"
            )

    def load_frames(self) -> FrameSequence:
        return load_sequence(self.frames_dir, self.color_mode, fps=self.fps)

    def load_clean(self) -> FrameSequence:
        if self.clean_frames_dir is None:
            raise ConfigurationError(f"sequence {self.name!r} has no clean_frames_dir")
        return load_sequence(self.clean_frames_dir, self.color_mode, fps=self.fps)

    def gt_indices(self) -> List[int]:
        if self.gt_masks_dir is None:
            return []
        return [idx for idx, _ in list_frame_files(self.gt_masks_dir)]

    def load_gt(self) -> Dict[int, TriStateMask]:
        """Annotated frame index -> mask, for however many frames carry one."""
        if self.gt_masks_dir is None:
            return {}
        return {idx: load_tristate_mask(p) for idx, p in list_frame_files(self.gt_masks_dir)}


@dataclass(frozen=True)
class DatasetManifest:
    sequences: Tuple[SequenceSpec, ...]

    def __post_init__(self) -> None:
        if not self.sequences:
            raise ConfigurationError("manifest must list at least one sequence")
        names = [s.name for s in self.sequences]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ConfigurationError(f"duplicate sequence name {dup!r} in manifest")

    def __iter__(self):
        return iter(self.sequences)


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_manifest(path: Path | str) -> DatasetManifest:
    """Parse and validate a manifest file.

    Checks that every ground-truth mask index refers to an existing
    frame, so score-time lookups cannot miss.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise DataFormatError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("sequences"), list):
        raise ConfigurationError(f"manifest {path} must be an object with a 'sequences' list")

    base = path.parent
    known = {"name", "frames_dir", "fps", "color_mode", "gt_masks_dir", "clean_frames_dir"}
    specs: List[SequenceSpec] = []
    for i, entry in enumerate(raw["sequences"]):
        if not isinstance(entry, dict):
            raise ConfigurationError(f"manifest sequence #{i} must be an object")
        unknown = set(entry) - known
        if unknown:
            raise ConfigurationError(
                f"manifest sequence #{i}: unknown field {sorted(unknown)[0]!r}"
            )
        missing = {"name", "frames_dir", "fps"} - set(entry)
        if missing:
            raise ConfigurationError(
                f"manifest sequence #{i}: missing field {sorted(missing)[0]!r}"
            )
        specs.append(
            SequenceSpec(
                name=str(entry["name"]),
                frames_dir=_resolve(base, entry["frames_dir"]),
                fps=float(entry["fps"]),
                color_mode=entry.get("color_mode", "luma"),
                gt_masks_dir=(
                    _resolve(base, entry["gt_masks_dir"]) if "gt_masks_dir" in entry else None
                ),
                clean_frames_dir=(
                    _resolve(base, entry["clean_frames_dir"])
                    if "clean_frames_dir" in entry
                    else None
                ),
            )
        )

    manifest = DatasetManifest(tuple(specs))
    for spec in manifest:
        frame_indices = {idx for idx, _ in list_frame_files(spec.frames_dir)}
        if not frame_indices:
            raise DataFormatError(f"sequence {spec.name!r}: no frames in {spec.frames_dir}")
        for idx in spec.gt_indices():
            if idx not in frame_indices:
                raise ConfigurationError(
                    f"sequence {spec.name!r}: gt mask index {idx} has no matching frame"
                )
    return manifest


def save_manifest(manifest: DatasetManifest, path: Path | str) -> None:
    """Write a manifest with paths made relative to its location."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p: Optional[Path]) -> Optional[str]:
        if p is None:
            return None
        p = p.resolve()
        try:
            return p.relative_to(base).as_posix()
        except ValueError:
            return str(p)

    entries = []
    for spec in manifest:
        entry = {
            "name": spec.name,
            "frames_dir": rel(spec.frames_dir),
            "fps": spec.fps,
            "color_mode": spec.color_mode,
        }
        if spec.gt_masks_dir is not None:
            entry["gt_masks_dir"] = rel(spec.gt_masks_dir)
        if spec.clean_frames_dir is not None:
            entry["clean_frames_dir"] = rel(spec.clean_frames_dir)
        entries.append(entry)
    path.write_text(json.dumps({"sequences": entries}, indent=2) + "\n")
