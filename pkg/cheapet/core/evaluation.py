# Layer: core — system accuracy and the cost/accuracy threshold sweep.
#
# System label: the local label where the supervisor trusts the local
# prediction (score >= threshold), the remote label everywhere else.

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import ValidationError
from .models import CurvePoint, EvaluationReport, PredictionRecord, SupervisorKind
from .routing import partition_thresholds

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SystemOutcome:
    accuracy: float
    forward_fraction: float
    cost_saving: float
    n_local: int
    n_remote: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "forward_fraction": self.forward_fraction,
            "cost_saving": self.cost_saving,
            "n_local": self.n_local,
            "n_remote": self.n_remote,
        }


@dataclass(frozen=True)
class OperatingPoint:
    """Best curve point within a forwarding budget."""

    point: CurvePoint
    accuracy_delta: float  # versus remote-only
    max_forward_fraction: float

    def to_dict(self) -> dict:
        return {
            "max_forward_fraction": self.max_forward_fraction,
            "accuracy_delta_vs_remote": self.accuracy_delta,
            **self.point.to_dict(),
        }


@dataclass(frozen=True)
class _Outcomes:
    local_correct: np.ndarray
    remote_correct: np.ndarray
    costs: np.ndarray
    scores: np.ndarray


def _outcomes(
    trace: Sequence[PredictionRecord],
    scores: Sequence[float],
    uniform_cost: bool,
    allow_missing_remote: bool,
) -> _Outcomes:
    score_arr = np.asarray(scores, dtype=np.float64)
    if len(trace) == 0:
        raise ValidationError("evaluation needs at least one record")
    if score_arr.ndim != 1 or score_arr.size != len(trace):
        raise ValidationError(
            f"{score_arr.size} scores for {len(trace)} records; lengths must match"
        )
    if not np.all(np.isfinite(score_arr)):
        raise ValidationError("trust scores must be finite")

    n = len(trace)
    local_correct = np.zeros(n, dtype=bool)
    remote_correct = np.zeros(n, dtype=bool)
    costs = np.zeros(n, dtype=np.float64)
    for i, record in enumerate(trace):
        if record.true_label is None:
            raise ValidationError(f"record {record.id!r} has no true_label")
        if record.remote_label is None and not allow_missing_remote:
            raise ValidationError(f"record {record.id!r} has no remote_label")
        local_correct[i] = record.local_label == record.true_label
        # A record without a remote answer counts as wrong once forwarded.
        remote_correct[i] = record.remote_label == record.true_label
        if not uniform_cost:
            if record.remote_cost_units is None and record.remote_label is not None:
                raise ValidationError(f"record {record.id!r} has no remote_cost_units")
            costs[i] = record.remote_cost_units or 0.0
    if not uniform_cost and not costs.sum() > 0.0:
        raise ValidationError("cost-weighted evaluation needs a positive total cost")
    return _Outcomes(local_correct, remote_correct, costs, score_arr)


def system_accuracy(
    trace: Sequence[PredictionRecord],
    scores: Sequence[float],
    threshold: float,
    uniform_cost: bool = True,
    allow_missing_remote: bool = False,
) -> SystemOutcome:
    """Accuracy, forward fraction and cost saving of routing at *threshold*.

    Raises:
        ValidationError: length mismatch, or a record without true_label /
            remote_label (the latter allowed with *allow_missing_remote*).
    """
    o = _outcomes(trace, scores, uniform_cost, allow_missing_remote)
    n = o.scores.size
    remote = o.scores < threshold
    n_remote = int(np.count_nonzero(remote))
    correct = int(np.count_nonzero(np.where(remote, o.remote_correct, o.local_correct)))
    fraction = n_remote / n
    if uniform_cost:
        saving = 1.0 - fraction
    else:
        saving = 1.0 - float(o.costs[remote].sum()) / float(o.costs.sum())
    return SystemOutcome(
        accuracy=correct / n,
        forward_fraction=fraction,
        cost_saving=saving,
        n_local=n - n_remote,
        n_remote=n_remote,
    )


def sweep_curve(
    trace: Sequence[PredictionRecord],
    scores: Sequence[float],
    uniform_cost: bool = True,
    supervisor_kind: "SupervisorKind | str" = SupervisorKind.SM,
    trace_id: str = "",
    allow_missing_remote: bool = False,
) -> EvaluationReport:
    """Evaluate every distinct routing partition of *trace*.

    Forwarding the k lowest-scored records for each reachable k gives N + 1
    points when scores are distinct (fewer with ties). Counts are integers
    until the final division, so the endpoints equal the local-only and
    remote-only accuracies exactly.
    """
    o = _outcomes(trace, scores, uniform_cost, allow_missing_remote)
    n = o.scores.size
    order = np.argsort(o.scores, kind="stable")
    sorted_scores = o.scores[order]

    local_prefix = np.concatenate(([0], np.cumsum(o.local_correct[order], dtype=np.int64)))
    remote_prefix = np.concatenate(([0], np.cumsum(o.remote_correct[order], dtype=np.int64)))
    cost_prefix = np.concatenate(([0.0], np.cumsum(o.costs[order])))
    local_total = int(local_prefix[-1])
    total_cost = float(cost_prefix[-1])

    curve = []
    for k, threshold in partition_thresholds(sorted_scores):
        correct = int(remote_prefix[k]) + local_total - int(local_prefix[k])
        fraction = k / n
        if uniform_cost:
            saving = 1.0 - fraction
        else:
            saving = 1.0 - float(cost_prefix[k]) / total_cost
        curve.append(
            CurvePoint(
                forward_fraction=fraction,
                system_accuracy=correct / n,
                cost_saving=saving,
                threshold=threshold,
                n_local=n - k,
                n_remote=k,
            )
        )

    report = EvaluationReport(
        curve=tuple(curve),
        local_only_accuracy=local_total / n,
        remote_only_accuracy=int(remote_prefix[-1]) / n,
        supervisor_kind=SupervisorKind.parse(supervisor_kind),
        trace_id=trace_id,
        uniform_cost=uniform_cost,
    )
    _log.info(
        "Swept %d partitions over %d records: local-only %.4f, remote-only %.4f, best %.4f",
        len(curve), n, report.local_only_accuracy, report.remote_only_accuracy,
        report.best_point.system_accuracy,
    )
    return report


def operating_point(
    report: EvaluationReport, max_forward_fraction: float
) -> OperatingPoint:
    """Best-accuracy point forwarding at most *max_forward_fraction* of inputs."""
    if not 0.0 <= max_forward_fraction <= 1.0:
        raise ValidationError("max_forward_fraction must lie in [0, 1]")
    eligible = [
        p for p in report.curve if p.forward_fraction <= max_forward_fraction + 1e-12
    ]
    best = max(eligible, key=lambda p: (p.system_accuracy, -p.forward_fraction))
    return OperatingPoint(
        point=best,
        accuracy_delta=best.system_accuracy - report.remote_only_accuracy,
        max_forward_fraction=max_forward_fraction,
    )


def curve_area(report: EvaluationReport) -> float:
    """Area under system accuracy over forward fraction (trapezoidal)."""
    x = np.array([p.forward_fraction for p in report.curve])
    y = np.array([p.system_accuracy for p in report.curve])
    return float(np.trapezoid(y, x))


def summarize(report: EvaluationReport, budgets: Optional[Sequence[float]] = None) -> dict:
    """Machine-readable summary: endpoints, notable points, curve area."""
    parity = report.remote_parity_point
    summary = {
        "trace_id": report.trace_id,
        "supervisor": report.supervisor_kind.value,
        "uniform_cost": report.uniform_cost,
        "points": len(report.curve),
        "local_only_accuracy": report.local_only_accuracy,
        "remote_only_accuracy": report.remote_only_accuracy,
        "best": report.best_point.to_dict(),
        "remote_parity": parity.to_dict() if parity is not None else None,
        "curve_area": curve_area(report),
    }
    if budgets:
        summary["operating_points"] = [
            operating_point(report, b).to_dict() for b in budgets
        ]
    return summary
