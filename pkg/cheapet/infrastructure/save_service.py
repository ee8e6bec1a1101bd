# Layer: infrastructure — byte-level writer for evaluation reports.
# Formatting decisions live in core.export; this module only does I/O.

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Union

from ..core.exceptions import ValidationError
from ..core.export import ReportExport, build_report_export
from ..core.models import CurvePoint, EvaluationReport, SupervisorKind

_log = logging.getLogger(__name__)

FORMATS = ("csv", "jsonl")


def write_export(export: ReportExport, path: Path, fmt: str = "csv", sidecar: bool = True) -> Path:
    """Write *export* to *path* (+ adjacent ``*_MD.json`` sidecar).

    Low-level helper: *path* is used as given.
    """
    fmt = fmt.lower()
    if fmt not in FORMATS:
        raise ValidationError(f"unknown report format {fmt!r} (expected csv or jsonl)")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(export.columns)
            writer.writerows(export.rows)
        else:
            for line in export.json_lines:
                fh.write(line + "\n")

    if sidecar:
        meta_path = _sidecar_path(path)
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(export.metadata, fh, indent=2)

    _log.info("Saved %s report to %s", fmt, path)
    return path


def emit_report(
    report: EvaluationReport,
    path: Union[str, Path],
    fmt: str = "csv",
    sidecar: bool = True,
) -> Path:
    """Write the curve of *report* as CSV or JSONL."""
    return write_export(build_report_export(report), Path(path), fmt, sidecar)


def _sidecar_path(path: Path) -> Path:
    return path.parent / (path.stem + "_MD.json")


def read_report_jsonl(path: Union[str, Path]) -> EvaluationReport:
    """Rebuild the report written by ``emit_report(..., fmt="jsonl")``.

    Supervisor, trace id and cost mode come from the ``*_MD.json`` sidecar
    when present; without it the trace id is the file stem and the report
    is taken as an SM, uniform-cost curve. Endpoint accuracies are the
    first and last curve points.

    Raises:
        ValidationError: malformed line, sidecar or curve.
    """
    path = Path(path)
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                points.append(CurvePoint.from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {line_number}: {exc.msg}") from exc

    meta: dict = {}
    meta_path = _sidecar_path(path)
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{meta_path}: {exc.msg}") from exc
    if not points:
        raise ValidationError(f"{path}: report has no curve points")

    return EvaluationReport(
        curve=tuple(points),
        local_only_accuracy=points[0].system_accuracy,
        remote_only_accuracy=points[-1].system_accuracy,
        supervisor_kind=SupervisorKind.parse(meta.get("supervisor", "sm")),
        trace_id=meta.get("trace_id", path.stem),
        uniform_cost=bool(meta.get("uniform_cost", True)),
    )
