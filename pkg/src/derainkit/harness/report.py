"""Report serialization: full-precision CSV and display-rounded markdown.

The CSV holds every value at machine precision (repr), so re-reading a
report and writing it again reproduces the file byte for byte. The
markdown view rounds for humans: F-measures and similarity scores to
two decimals, percentages to three significant figures, best treated
result per row in bold.
"""

from __future__ import annotations

import csv
import io
import math
from decimal import Decimal
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, TypeVar

from ..errors import DataFormatError
from .evaluate import AVERAGE, BASELINE, EvalReport, ReportRow

_T = TypeVar("_T")

MAGIC = "# derainkit report v1"
COLUMNS = ("sequence", "derainer", "evaluator", "role", "metric", "absolute", "relative_pct", "flags")


def _format_value(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(value)


def _parse_value(text: str) -> Optional[float]:
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as exc:
        raise DataFormatError(f"bad numeric field {text!r} in report") from exc


def render_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    buf.write(MAGIC + "\n")
    buf.write(f"# kind: {report.kind}\n")
    buf.write(f"# config: {report.config_json}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in report.rows:
        writer.writerow(
            [
                row.sequence,
                row.derainer,
                row.evaluator,
                row.role,
                row.metric,
                _format_value(row.absolute),
                _format_value(row.relative_pct),
                row.flags,
            ]
        )
    return buf.getvalue()


def write_csv(report: EvalReport, path: Path | str) -> Path:
    path = Path(path)
    path.write_text(render_csv(report))
    return path


def read_csv(path: Path | str) -> EvalReport:
    """Parse a report file back into the exact in-memory form."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read report {path}: {exc}") from exc
    lines = text.splitlines()
    if len(lines) < 4 or lines[0] != MAGIC:
        raise DataFormatError(f"{path} is not a report file (missing {MAGIC!r} header)")
    if not lines[1].startswith("# kind: "):
        raise DataFormatError(f"{path}: missing '# kind:' header line")
    kind = lines[1][len("# kind: ") :]
    if not lines[2].startswith("# config: "):
        raise DataFormatError(f"{path}: missing '# config:' header line")
    config_json = lines[2][len("# config: ") :]

    reader = csv.reader(lines[3:])
    header = next(reader)
    if tuple(header) != COLUMNS:
        raise DataFormatError(f"{path}: unexpected column header {header}")
    rows: List[ReportRow] = []
    for record in reader:
        if len(record) != len(COLUMNS):
            raise DataFormatError(f"{path}: row with {len(record)} fields, expected {len(COLUMNS)}")
        seq, derainer, evaluator, role, metric, absolute, relative, flags = record
        rows.append(
            ReportRow(
                seq,
                derainer,
                evaluator,
                role,
                metric,
                _parse_value(absolute),
                _parse_value(relative),
                flags,
            )
        )
    return EvalReport(kind, config_json, tuple(rows))


# ---------------------------------------------------------------------------
# Markdown rendering
# ---------------------------------------------------------------------------


def _sig3(x: float) -> str:
    """Three significant figures as a plain decimal (no exponent)."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    return format(Decimal(f"{x:.3g}"), "f")


def _display_absolute(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, int):
        return str(value)
    if math.isinf(value):
        return "inf"
    return f"{value:.2f}"


def _display_relative(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    return _sig3(value) + "%"


def _ordered_unique(items: Iterable[_T]) -> List[_T]:
    seen: Dict[_T, None] = {}
    for item in items:
        seen.setdefault(item)
    return list(seen)


def render_markdown(report: EvalReport) -> str:
    out = [f"# {report.kind.capitalize()} report", ""]
    out.append("Baseline columns show absolute values; other columns show the")
    out.append("change relative to the baseline. Best treated result per row in bold.")
    out.append("")

    groups = _ordered_unique((r.evaluator, r.metric) for r in report.rows)
    derainers = _ordered_unique(r.derainer for r in report.rows)
    for evaluator, metric in groups:
        rows = [r for r in report.rows if r.evaluator == evaluator and r.metric == metric]
        sequences = _ordered_unique([r.sequence for r in rows])
        cell: Dict[Tuple[str, str], ReportRow] = {(r.sequence, r.derainer): r for r in rows}

        out.append(f"## {evaluator}: {metric}")
        out.append("")
        out.append("| sequence | " + " | ".join(derainers) + " |")
        out.append("|---" * (len(derainers) + 1) + "|")
        for seq in sequences:
            best = max(
                (
                    r.relative_pct
                    for r in rows
                    if r.sequence == seq and r.role != BASELINE and r.relative_pct is not None
                ),
                default=None,
            )
            cells = []
            for derainer in derainers:
                row = cell.get((seq, derainer))
                if row is None:
                    cells.append("n/a")
                elif row.role == BASELINE:
                    cells.append(_display_absolute(row.absolute))
                else:
                    text = _display_relative(row.relative_pct)
                    if best is not None and row.relative_pct == best:
                        text = f"**{text}**"
                    cells.append(text)
            label = seq if seq != AVERAGE else "*average*"
            out.append(f"| {label} | " + " | ".join(cells) + " |")
        out.append("")
    return "\n".join(out)


def write_markdown(report: EvalReport, path: Path | str) -> Path:
    path = Path(path)
    path.write_text(render_markdown(report))
    return path
