"""Dataset ingestion, evaluation orchestration, and report generation."""

from .config import DerainerSpec, EvalConfig, SegmenterSpec, load_config
from .evaluate import (
    EvalReport,
    ReportRow,
    run_restoration_eval,
    run_segmentation_eval,
    run_tracking_eval,
)
from .figures import render_figures
from .manifest import DatasetManifest, SequenceSpec, load_manifest, save_manifest
from .report import read_csv, render_csv, render_markdown, write_csv, write_markdown
from .runners import build_derainer, build_segmenter

__all__ = [
    "DatasetManifest",
    "DerainerSpec",
    "EvalConfig",
    "EvalReport",
    "ReportRow",
    "SegmenterSpec",
    "SequenceSpec",
    "build_derainer",
    "build_segmenter",
    "load_config",
    "load_manifest",
    "read_csv",
    "render_csv",
    "render_figures",
    "render_markdown",
    "run_restoration_eval",
    "run_segmentation_eval",
    "run_tracking_eval",
    "save_manifest",
    "write_csv",
    "write_markdown",
]
