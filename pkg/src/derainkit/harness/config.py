"""Evaluation configuration: which algorithms run and how.

The config is a JSON file. Every report embeds the resolved form (all
defaults filled in, keys sorted) so a report is self-describing and two
semantically identical configs serialize to identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from ..decompose import DecompositionConfig
from ..derain import GargNayarParams
from ..errors import ConfigurationError, DataFormatError
from ..segment import MogParams
from ..track import TrackingParams

DERAINER_KINDS = ("none", "spatial", "temporal_median", "garg_nayar", "admm", "external")
SEGMENTER_KINDS = ("mog", "external")

# Option dataclass per kind; None means the kind takes ad-hoc options.
_DERAINER_PARAMS = {"garg_nayar": GargNayarParams, "admm": DecompositionConfig}
_SEGMENTER_PARAMS = {"mog": MogParams}


def _build_params(cls, options: Mapping[str, Any], context: str):
    """Construct a params dataclass from a JSON options dict.

    Unknown keys are rejected by name; list values are converted to the
    tuples the dataclasses expect.
    """
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs: Dict[str, Any] = {}
    for key, value in options.items():
        if key not in fields:
            raise ConfigurationError(f"{context}: unknown option {key!r}")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{context}: {exc}") from exc


def _params_dict(params) -> Dict[str, Any]:
    d = dataclasses.asdict(params)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


@dataclass(frozen=True)
class DerainerSpec:
    """One rain-removal method to evaluate, with its options resolved."""

    kind: str
    label: str
    params: Any = None  # kind-specific dataclass, or None
    options: Mapping[str, Any] = field(default_factory=dict)  # ad-hoc options

    @property
    def is_baseline(self) -> bool:
        return self.kind == "none"

    def resolved_options(self) -> Dict[str, Any]:
        if self.params is not None:
            return _params_dict(self.params)
        return dict(self.options)


@dataclass(frozen=True)
class SegmenterSpec:
    kind: str
    label: str
    params: Any = None
    options: Mapping[str, Any] = field(default_factory=dict)

    def resolved_options(self) -> Dict[str, Any]:
        if self.params is not None:
            return _params_dict(self.params)
        return dict(self.options)


def _parse_derainer(entry: Mapping[str, Any], index: int) -> DerainerSpec:
    context = f"derainers[{index}]"
    if not isinstance(entry, Mapping) or "kind" not in entry:
        raise ConfigurationError(f"{context}: each derainer needs a 'kind'")
    kind = entry["kind"]
    if kind not in DERAINER_KINDS:
        raise ConfigurationError(f"{context}: unknown kind {kind!r}, expected one of {DERAINER_KINDS}")
    label = str(entry.get("label", kind))
    options = {k: v for k, v in entry.items() if k not in ("kind", "label")}

    if kind == "none":
        if options:
            raise ConfigurationError(f"{context}: 'none' takes no options")
        return DerainerSpec(kind, label)
    if kind == "spatial":
        mode = options.pop("mode", "mean")
        k = options.pop("k", 3)
        if options:
            raise ConfigurationError(f"{context}: unknown option {sorted(options)[0]!r}")
        if mode not in ("mean", "median"):
            raise ConfigurationError(f"{context}: mode must be 'mean' or 'median', got {mode!r}")
        if not (isinstance(k, int) and k >= 1 and k % 2 == 1):
            raise ConfigurationError(f"{context}: k must be an odd positive integer, got {k!r}")
        return DerainerSpec(kind, label, options={"mode": mode, "k": k})
    if kind == "temporal_median":
        w = options.pop("w", 5)
        if options:
            raise ConfigurationError(f"{context}: unknown option {sorted(options)[0]!r}")
        if not (isinstance(w, int) and w >= 3 and w % 2 == 1):
            raise ConfigurationError(f"{context}: w must be an odd integer >= 3, got {w!r}")
        return DerainerSpec(kind, label, options={"w": w})
    if kind == "external":
        if "dir" not in options:
            raise ConfigurationError(f"{context}: external derainer needs a 'dir'")
        directory = str(options.pop("dir"))
        if options:
            raise ConfigurationError(f"{context}: unknown option {sorted(options)[0]!r}")
        return DerainerSpec(kind, label, options={"dir": directory})
    params = _build_params(_DERAINER_PARAMS[kind], options, context)
    return DerainerSpec(kind, label, params=params)


def _parse_segmenter(entry: Mapping[str, Any], index: int) -> SegmenterSpec:
    context = f"segmenters[{index}]"
    if not isinstance(entry, Mapping) or "kind" not in entry:
        raise ConfigurationError(f"{context}: each segmenter needs a 'kind'")
    kind = entry["kind"]
    if kind not in SEGMENTER_KINDS:
        raise ConfigurationError(
            f"{context}: unknown kind {kind!r}, expected one of {SEGMENTER_KINDS}"
        )
    label = str(entry.get("label", kind))
    options = {k: v for k, v in entry.items() if k not in ("kind", "label")}
    if kind == "external":
        if "dir" not in options:
            raise ConfigurationError(f"{context}: external segmenter needs a 'dir'")
        directory = str(options.pop("dir"))
        burn_in = options.pop("burn_in", 0)
        if options:
            raise ConfigurationError(f"{context}: unknown option {sorted(options)[0]!r}")
        if not (isinstance(burn_in, int) and burn_in >= 0):
            raise ConfigurationError(f"{context}: burn_in must be a non-negative integer")
        return SegmenterSpec(kind, label, options={"dir": directory, "burn_in": burn_in})
    params = _build_params(_SEGMENTER_PARAMS[kind], options, context)
    return SegmenterSpec(kind, label, params=params)


@dataclass(frozen=True)
class EvalConfig:
    """Everything an evaluation run needs besides the dataset itself."""

    derainers: Tuple[DerainerSpec, ...]
    segmenters: Tuple[SegmenterSpec, ...] = ()
    tracking: TrackingParams = field(default_factory=TrackingParams)
    metrics: Tuple[str, ...] = ("psnr", "ssim")
    out_dir: Path = Path("eval-out")
    seed: int = 0
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.derainers:
            raise ConfigurationError("config must list at least one derainer")
        baselines = [d for d in self.derainers if d.is_baseline]
        if len(baselines) != 1:
            raise ConfigurationError(
                "config must include exactly one derainer of kind 'none' "
                f"to serve as the baseline, found {len(baselines)}"
            )
        labels = [d.label for d in self.derainers]
        if len(set(labels)) != len(labels):
            dup = next(l for l in labels if labels.count(l) > 1)
            raise ConfigurationError(f"duplicate derainer label {dup!r}")
        seg_labels = [s.label for s in self.segmenters]
        if len(set(seg_labels)) != len(seg_labels):
            dup = next(l for l in seg_labels if seg_labels.count(l) > 1)
            raise ConfigurationError(f"duplicate segmenter label {dup!r}")
        for m in self.metrics:
            if m not in ("psnr", "ssim"):
                raise ConfigurationError(f"unknown metric toggle {m!r}")
        if not self.metrics:
            raise ConfigurationError("at least one restoration metric must stay enabled")
        if self.jobs < 1:
            raise ConfigurationError(f"jobs must be >= 1, got {self.jobs}")

    @property
    def baseline(self) -> DerainerSpec:
        return next(d for d in self.derainers if d.is_baseline)

    def canonical_json(self) -> str:
        """Resolved config as one sorted, compact JSON line."""
        doc = {
            "derainers": [
                {"kind": d.kind, "label": d.label, "options": d.resolved_options()}
                for d in self.derainers
            ],
            "segmenters": [
                {"kind": s.kind, "label": s.label, "options": s.resolved_options()}
                for s in self.segmenters
            ],
            "tracking": _params_dict(self.tracking),
            "metrics": list(self.metrics),
            "seed": self.seed,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def load_config(
    path: Path | str,
    *,
    out_dir: Optional[Path] = None,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
) -> EvalConfig:
    """Parse a config file; keyword overrides come from CLI flags."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise DataFormatError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config {path} must be a JSON object")
    known = {"derainers", "segmenters", "tracking", "metrics", "out_dir", "seed", "jobs"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"config: unknown field {sorted(unknown)[0]!r}")

    derainers = tuple(
        _parse_derainer(e, i) for i, e in enumerate(raw.get("derainers", []))
    )
    segmenters = tuple(
        _parse_segmenter(e, i) for i, e in enumerate(raw.get("segmenters", []))
    )
    tracking = _build_params(TrackingParams, raw.get("tracking", {}), "tracking")
    metrics = tuple(raw.get("metrics", ["psnr", "ssim"]))
    return EvalConfig(
        derainers=derainers,
        segmenters=segmenters,
        tracking=tracking,
        metrics=metrics,
        out_dir=Path(out_dir if out_dir is not None else raw.get("out_dir", "eval-out")),
        seed=int(seed if seed is not None else raw.get("seed", 0)),
        jobs=int(jobs if jobs is not None else raw.get("jobs", 1)),
    )
