"""Figure rendering for evaluation reports.

One PNG per (evaluator, metric) group: bars give each derainer's
average change against the baseline, with the per-sequence values
overlaid as points so spread stays visible.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import AVERAGE, BASELINE, EvalReport
from .report import _ordered_unique


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text).strip("-") or "unnamed"


def render_figures(report: EvalReport, out_dir: Path | str) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    groups = _ordered_unique((r.evaluator, r.metric) for r in report.rows)
    for evaluator, metric in groups:
        rows = [
            r
            for r in report.rows
            if r.evaluator == evaluator and r.metric == metric and r.role != BASELINE
        ]
        per_seq: Dict[str, List[float]] = {}
        averages: Dict[str, float] = {}
        for r in rows:
            if r.relative_pct is None:
                continue
            if r.sequence == AVERAGE:
                averages[r.derainer] = r.relative_pct
            else:
                per_seq.setdefault(r.derainer, []).append(r.relative_pct)
        labels = _ordered_unique(list(averages) + list(per_seq))
        if not labels:
            continue

        heights = [
            averages.get(d, sum(per_seq[d]) / len(per_seq[d]) if per_seq.get(d) else 0.0)
            for d in labels
        ]
        fig, ax = plt.subplots(figsize=(1.0 + 1.2 * len(labels), 4.0))
        xs = range(len(labels))
        ax.bar(xs, heights, color="#4878cf", width=0.6, zorder=2)
        for i, d in enumerate(labels):
            pts = per_seq.get(d, [])
            ax.plot([i] * len(pts), pts, "o", color="#222222", markersize=4, zorder=3)
        ax.axhline(0.0, color="#444444", linewidth=0.8)
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, rotation=20, ha="right")
        ax.set_ylabel("change vs baseline (%)")
        ax.set_title(f"{report.kind}: {evaluator} ({metric})")
        ax.grid(axis="y", alpha=0.3, zorder=0)
        fig.tight_layout()

        path = out_dir / f"{_safe_name(report.kind)}_{_safe_name(evaluator)}_{_safe_name(metric)}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written
