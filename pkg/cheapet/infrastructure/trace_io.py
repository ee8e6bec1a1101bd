# Layer: infrastructure — JSONL prediction traces.
#
# One JSON object per line:
#   {"id": str, "local_probs": [..], "activation": [..],
#    "true_label": int?, "remote_label": int?, "remote_cost_units": number?,
#    "features": [..]?, "local_label": int?}
# Unknown fields are kept on the record and written back unchanged.

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Iterable, Iterator, Union

from ..core.exceptions import TraceFormatError, ValidationError
from ..core.local_model import LocalModel, annotate_record
from ..core.models import PredictionRecord, predicted_class

_log = logging.getLogger(__name__)

KNOWN_FIELDS = (
    "id",
    "local_probs",
    "activation",
    "true_label",
    "remote_label",
    "remote_cost_units",
    "features",
)


def record_from_dict(data: Any, line_number: int = 0, strict: bool = True) -> PredictionRecord:
    """Validate one decoded trace object.

    In permissive mode (``strict=False``) a stored ``local_label`` that
    disagrees with the argmax of ``local_probs`` is repaired instead of
    rejected.
    """
    if not isinstance(data, dict):
        raise TraceFormatError("trace line is not a JSON object", line_number)
    for required in ("id", "local_probs", "activation"):
        if required not in data:
            raise TraceFormatError(f"missing field {required!r}", line_number)
    extras = {k: v for k, v in data.items() if k not in KNOWN_FIELDS}
    try:
        record = PredictionRecord(
            id=data["id"],
            local_probs=tuple(data["local_probs"]),
            activation=tuple(data["activation"]),
            true_label=data.get("true_label"),
            remote_label=data.get("remote_label"),
            remote_cost_units=data.get("remote_cost_units"),
            features=tuple(data["features"]) if data.get("features") is not None else None,
            extras=extras,
        )
    except (ValidationError, TypeError, ValueError) as exc:
        raise TraceFormatError(str(exc), line_number) from exc

    stored = extras.get("local_label")
    if stored is not None and stored != record.local_label:
        if strict:
            raise TraceFormatError(
                f"record {record.id!r}: local_label {stored!r} is not the argmax "
                f"{record.local_label} of local_probs",
                line_number,
            )
        _log.warning(
            "line %d: repairing local_label %r -> %d", line_number, stored, record.local_label
        )
        extras["local_label"] = predicted_class(record.local_probs)
    return record


def record_to_dict(record: PredictionRecord) -> dict:
    data: dict[str, Any] = {
        "id": record.id,
        "local_probs": list(record.local_probs),
        "activation": list(record.activation),
    }
    for name in ("true_label", "remote_label", "remote_cost_units"):
        value = getattr(record, name)
        if value is not None:
            data[name] = value
    if record.features is not None:
        data["features"] = list(record.features)
    data.update(record.extras)
    return data


def _json_lines(path: Path) -> Iterator[tuple[int, Any]]:
    """Decoded objects of a JSONL file with their 1-based line numbers.

    Lines are decoded one at a time so an encoding error names its line.
    """
    with open(path, "rb") as fh:
        for line_number, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise TraceFormatError(
                    f"invalid UTF-8 at byte {exc.start}: {exc.reason}", line_number
                ) from exc
            if not line.strip():
                continue
            try:
                yield line_number, json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(
                    f"invalid JSON at column {exc.colno}: {exc.msg}", line_number
                ) from exc


def read_trace(path: Union[str, Path], strict: bool = True) -> Iterator[PredictionRecord]:
    """Stream records from a JSONL trace in file order.

    Blank lines are skipped. Memory use does not grow with trace length.

    Raises:
        TraceFormatError: bad UTF-8, malformed JSON or an invalid record, with its line.
        OSError: the file cannot be opened.
    """
    path = Path(path)
    count = 0
    for line_number, data in _json_lines(path):
        count += 1
        yield record_from_dict(data, line_number, strict)
    _log.debug("Read %d records from %s", count, path)


def load_trace(path: Union[str, Path], strict: bool = True) -> list[PredictionRecord]:
    """Read a whole trace into memory (evaluation needs random access)."""
    records = list(read_trace(path, strict))
    _log.info("Loaded %d records from %s", len(records), path)
    return records


def read_inputs(path: Union[str, Path]) -> Iterator[dict]:
    """Stream ``{"id", "features", ...}`` objects from a JSONL input file."""
    for line_number, data in _json_lines(Path(path)):
        if not isinstance(data, dict) or "id" not in data or "features" not in data:
            raise TraceFormatError("input line needs 'id' and 'features'", line_number)
        data["_line"] = line_number
        yield data


def annotate_file(
    model: LocalModel, inputs_path: Union[str, Path], out_path: Union[str, Path]
) -> int:
    """Run the local model over an input file and write the resulting trace.

    Labels and remote costs present on the inputs are carried over.
    Returns the number of records written.
    """
    records = []
    for item in read_inputs(inputs_path):
        try:
            records.append(
                annotate_record(
                    model,
                    item["id"],
                    item["features"],
                    true_label=item.get("true_label"),
                    remote_label=item.get("remote_label"),
                    remote_cost_units=item.get("remote_cost_units"),
                )
            )
        except (ValidationError, TypeError) as exc:
            raise TraceFormatError(str(exc), item["_line"]) from exc
    write_trace(records, out_path)
    return len(records)


def write_trace(records: Iterable[PredictionRecord], path: Union[str, Path]) -> Path:
    """Write *records* as JSONL; ``read_trace`` reproduces them field-exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record)) + "\n")
            count += 1
    _log.info("Wrote %d records to %s", count, path)
    return path
