# Layer: core — pure Python, zero file I/O.
#
# ReportExport: an evaluation report rendered into rows; the byte-level
# writing lives in infrastructure.save_service.

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .models import EvaluationReport

REPORT_COLUMNS = [
    "forward_fraction",
    "system_accuracy",
    "cost_saving",
    "threshold",
    "n_local",
    "n_remote",
]


@dataclass
class ReportExport:
    """Everything needed to write one curve to disk."""

    columns: list[str]
    rows: list[list[str]]  # already-stringified CSV rows
    json_lines: list[str]  # one CurvePoint object per line
    metadata: dict = field(default_factory=dict)


def _fixed(value: float) -> str:
    return f"{value:.6f}"


def build_report_export(report: EvaluationReport) -> ReportExport:
    """Render *report*; reals get six decimals in CSV, full precision in JSONL.

    The forward-everything threshold sits one ulp above the highest score,
    so at six decimals it prints like the row before it. The metadata
    names that row and keeps its exact threshold.
    """
    rows = [
        [
            _fixed(p.forward_fraction),
            _fixed(p.system_accuracy),
            _fixed(p.cost_saving),
            _fixed(p.threshold),
            str(p.n_local),
            str(p.n_remote),
        ]
        for p in report.curve
    ]
    json_lines = [json.dumps(p.to_dict()) for p in report.curve]
    metadata = {
        "trace_id": report.trace_id,
        "supervisor": report.supervisor_kind.value,
        "uniform_cost": report.uniform_cost,
        "local_only_accuracy": report.local_only_accuracy,
        "remote_only_accuracy": report.remote_only_accuracy,
        "points": len(report.curve),
        # 1-based data row, header excluded
        "forward_all_row": len(report.curve),
        "forward_all_threshold": report.curve[-1].threshold,
    }
    return ReportExport(list(REPORT_COLUMNS), rows, json_lines, metadata)
