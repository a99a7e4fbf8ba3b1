"""Evaluation loops: derain, evaluate, and collect comparison rows.

Each report row holds one metric value for one (sequence, derainer,
evaluator) cell. Baseline rows ("none" derainer) carry the absolute
value; treated rows carry both their absolute value and the change
relative to the same sequence's baseline, so every percentage in a
report can be recomputed from stored absolutes.

Category average rows (sequence name "average") follow the summed
convention: segmentation averages derive from summed F-measures,
tracking averages from summed feature counts, restoration averages
from per-sequence means. Sequences where any derainer produced an
undefined score are left out of all averages so the baseline stays
comparable across derainers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

from ..errors import ConfigurationError, DataFormatError
from ..frames import list_frame_files
from ..metrics import confusion, f_measure, mean_ssim, relative_improvement, sequence_psnr
from ..track import forward_backward_eval
from .config import EvalConfig
from .manifest import DatasetManifest, SequenceSpec
from .runners import build_derainer, build_segmenter

log = logging.getLogger(__name__)

AVERAGE = "average"

BASELINE = "baseline"
TREATED = "treated"

# Flag values: "undefined" marks a row whose own metric could not be
# computed; "undefined-baseline" marks a treated row whose absolute is
# fine but whose baseline is zero, undefined, or infinite.
FLAG_UNDEFINED = "undefined"
FLAG_UNDEFINED_BASELINE = "undefined-baseline"

Value = Optional[float]
T = TypeVar("T")
U = TypeVar("U")


@dataclass(frozen=True)
class ReportRow:
    sequence: str
    derainer: str
    evaluator: str
    role: str
    metric: str
    absolute: Value
    relative_pct: Value
    flags: str = ""


@dataclass(frozen=True)
class EvalReport:
    kind: str
    config_json: str
    rows: Tuple[ReportRow, ...]

    def __post_init__(self) -> None:
        if not self.rows:
            raise ConfigurationError("report must contain at least one row")


def _parallel_map(fn: Callable[[T], U], items: Sequence[T], jobs: int) -> List[U]:
    """Apply fn to every item, preserving input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _relative(baseline: Value, treated: Value) -> Tuple[Value, str]:
    if baseline is None or treated is None or not math.isfinite(baseline) or baseline == 0:
        return None, FLAG_UNDEFINED_BASELINE
    return relative_improvement(baseline, treated), ""


def _assemble(
    absolutes: Dict[Tuple[str, str, str, str], Value],
    sequences: Sequence[str],
    derainer_labels: Sequence[str],
    baseline_label: str,
    evaluators: Sequence[str],
    metrics: Sequence[str],
    average_mode: str,
) -> List[ReportRow]:
    """Turn a table of absolute values into ordered report rows.

    absolutes is keyed by (sequence, derainer, evaluator, metric);
    average_mode is "mean" or "sum" and fixes what the average row's
    absolute column holds. The relative percentage of an average row is
    always computed from the sums, which for "mean" coincides with the
    ratio of means.
    """
    rows: List[ReportRow] = []
    for seq in sequences:
        for dlabel in derainer_labels:
            role = BASELINE if dlabel == baseline_label else TREATED
            for ev in evaluators:
                for metric in metrics:
                    absolute = absolutes[(seq, dlabel, ev, metric)]
                    if absolute is None:
                        rel, flags = None, FLAG_UNDEFINED
                    elif role == BASELINE:
                        rel, flags = None, ""
                    else:
                        base = absolutes[(seq, baseline_label, ev, metric)]
                        rel, flags = _relative(base, absolute)
                    rows.append(
                        ReportRow(seq, dlabel, ev, role, metric, absolute, rel, flags)
                    )

    for ev in evaluators:
        for metric in metrics:
            # A sequence joins the average only if every derainer scored it.
            valid = [
                seq
                for seq in sequences
                if all(
                    absolutes[(seq, d, ev, metric)] is not None for d in derainer_labels
                )
            ]
            if not valid:
                continue
            sums = {
                d: math.fsum(absolutes[(seq, d, ev, metric)] for seq in valid)
                for d in derainer_labels
            }
            base_sum = sums[baseline_label]
            for dlabel in derainer_labels:
                value = sums[dlabel] if average_mode == "sum" else sums[dlabel] / len(valid)
                if isinstance(value, float) and value.is_integer() and average_mode == "sum":
                    value = int(value)  # keep summed counts integral in the CSV
                if dlabel == baseline_label:
                    rows.append(
                        ReportRow(AVERAGE, dlabel, ev, BASELINE, metric, value, None, "")
                    )
                else:
                    rel, flags = _relative(base_sum, sums[dlabel])
                    rows.append(
                        ReportRow(AVERAGE, dlabel, ev, TREATED, metric, value, rel, flags)
                    )
    return rows


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------


def run_segmentation_eval(manifest: DatasetManifest, config: EvalConfig) -> EvalReport:
    """Score foreground segmentation on annotated frames, per derainer.

    Segmentation runs over every frame so temporal models warm up, but
    only annotated frames past burn-in contribute to the confusion
    sums. The sequence score is the F-measure of the summed counts.
    """
    if not config.segmenters:
        raise ConfigurationError("segmentation evaluation needs at least one segmenter")
    specs = []
    for spec in manifest:
        if spec.gt_masks_dir is not None and spec.gt_indices():
            specs.append(spec)
        else:
            log.warning("sequence %r has no annotations; skipping", spec.name)
    if not specs:
        raise ConfigurationError("no sequence in the manifest carries ground-truth masks")

    derainers = [(d.label, build_derainer(d)) for d in config.derainers]
    evaluators = [s.label for s in config.segmenters]

    def cell(job: Tuple[SequenceSpec, int]) -> List[Tuple[str, str, str, str, Value]]:
        spec, d_index = job
        dlabel, derain = derainers[d_index]
        frames = spec.load_frames()
        derained = derain(frames, spec)
        gt = spec.load_gt()
        position = {idx: k for k, (idx, _) in enumerate(list_frame_files(spec.frames_dir))}
        out = []
        for sspec in config.segmenters:
            result = build_segmenter(sspec, spec)(derained)
            total = None
            for idx, mask in sorted(gt.items()):
                pos = position[idx]
                if pos < result.burn_in:
                    continue
                try:
                    counts = confusion(result.masks[pos], mask)
                except ValueError as exc:
                    raise DataFormatError(f"sequence {spec.name!r}, frame {idx}: {exc}") from exc
                total = counts if total is None else total + counts
            score = f_measure(total) if total is not None else None
            out.append((spec.name, dlabel, sspec.label, "f_measure", score))
        return out

    jobs = [(spec, i) for spec in specs for i in range(len(derainers))]
    results = _parallel_map(cell, jobs, config.jobs)
    absolutes = {(s, d, e, m): v for chunk in results for (s, d, e, m, v) in chunk}

    rows = _assemble(
        absolutes,
        sorted(s.name for s in specs),
        [d.label for d in config.derainers],
        config.baseline.label,
        evaluators,
        ["f_measure"],
        average_mode="mean",
    )
    return EvalReport("segmentation", config.canonical_json(), tuple(rows))


# ---------------------------------------------------------------------------
# Tracking
# ---------------------------------------------------------------------------


def run_tracking_eval(manifest: DatasetManifest, config: EvalConfig) -> EvalReport:
    """Forward-backward feature tracking counts at each error margin."""
    specs = list(manifest)
    derainers = [(d.label, build_derainer(d)) for d in config.derainers]
    metrics = [f"within_{m:g}px" for m in config.tracking.margins]

    def cell(job: Tuple[SequenceSpec, int]) -> List[Tuple[str, str, str, str, Value]]:
        spec, d_index = job
        dlabel, derain = derainers[d_index]
        derained = derain(spec.load_frames(), spec)
        report = forward_backward_eval(derained, config.tracking)
        return [
            (spec.name, dlabel, "tracking", f"within_{m:g}px", report.within[m])
            for m in config.tracking.margins
        ]

    jobs = [(spec, i) for spec in specs for i in range(len(derainers))]
    results = _parallel_map(cell, jobs, config.jobs)
    absolutes = {(s, d, e, m): v for chunk in results for (s, d, e, m, v) in chunk}

    rows = _assemble(
        absolutes,
        sorted(s.name for s in specs),
        [d.label for d in config.derainers],
        config.baseline.label,
        ["tracking"],
        metrics,
        average_mode="sum",
    )
    return EvalReport("tracking", config.canonical_json(), tuple(rows))


# ---------------------------------------------------------------------------
# Restoration
# ---------------------------------------------------------------------------


def run_restoration_eval(manifest: DatasetManifest, config: EvalConfig) -> EvalReport:
    """PSNR/SSIM of derained frames against the clean counterparts."""
    specs = []
    for spec in manifest:
        if spec.clean_frames_dir is not None:
            specs.append(spec)
        else:
            log.warning("sequence %r has no clean frames; skipping", spec.name)
    if not specs:
        raise ConfigurationError("no sequence in the manifest carries clean frames")

    derainers = [(d.label, build_derainer(d)) for d in config.derainers]
    metrics = list(config.metrics)

    def cell(job: Tuple[SequenceSpec, int]) -> List[Tuple[str, str, str, str, Value]]:
        spec, d_index = job
        dlabel, derain = derainers[d_index]
        frames = spec.load_frames()
        clean = spec.load_clean()
        if len(clean) != len(frames):
            raise DataFormatError(
                f"sequence {spec.name!r}: {len(clean)} clean frames for "
                f"{len(frames)} rainy frames"
            )
        derained = derain(frames, spec)
        out = []
        for metric in metrics:
            if metric == "psnr":
                value = sequence_psnr(derained, clean)
            else:
                value = mean_ssim(derained, clean)
            out.append((spec.name, dlabel, "restoration", metric, value))
        return out

    jobs = [(spec, i) for spec in specs for i in range(len(derainers))]
    results = _parallel_map(cell, jobs, config.jobs)
    absolutes = {(s, d, e, m): v for chunk in results for (s, d, e, m, v) in chunk}

    rows = _assemble(
        absolutes,
        sorted(s.name for s in specs),
        [d.label for d in config.derainers],
        config.baseline.label,
        ["restoration"],
        metrics,
        average_mode="mean",
    )
    return EvalReport("restoration", config.canonical_json(), tuple(rows))
