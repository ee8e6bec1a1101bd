# Layer: core — pure Python + numpy, zero HTTP/file I/O imports.

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np

from .exceptions import ValidationError

PROBABILITY_SUM_TOLERANCE = 1e-6


class SupervisorKind(str, Enum):
    """Supported supervisors: max softmax probability and Mahalanobis surprise."""

    SM = "sm"
    MDSA = "mdsa"

    @classmethod
    def parse(cls, value: "str | SupervisorKind") -> "SupervisorKind":
        if isinstance(value, SupervisorKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(
                f"unknown supervisor {value!r} (expected 'sm' or 'mdsa')"
            ) from None


class Route(str, Enum):
    LOCAL = "local"
    REMOTE = "remote"


def as_probability_vector(values: Sequence[float]) -> np.ndarray:
    """Validate *values* as a probability vector and widen to float64.

    Raises:
        ValidationError: naming the violated invariant (length, range, sum).
    """
    probs = np.asarray(values, dtype=np.float64)
    if probs.ndim != 1:
        raise ValidationError("probability vector must be one-dimensional")
    if probs.size < 2:
        raise ValidationError(
            f"probability vector needs at least 2 classes, got {probs.size}"
        )
    if not np.all(np.isfinite(probs)):
        raise ValidationError("probability vector contains non-finite entries")
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ValidationError("probability vector entry outside [0, 1]")
    total = float(probs.sum())
    if abs(total - 1.0) > PROBABILITY_SUM_TOLERANCE:
        raise ValidationError(
            f"probability vector sums to {total!r}, expected 1 within "
            f"{PROBABILITY_SUM_TOLERANCE}"
        )
    return probs


def as_activation_vector(values: Sequence[float]) -> np.ndarray:
    """Validate *values* as a finite, non-empty activation vector (float64)."""
    activation = np.asarray(values, dtype=np.float64)
    if activation.ndim != 1 or activation.size < 1:
        raise ValidationError("activation vector must be one-dimensional and non-empty")
    if not np.all(np.isfinite(activation)):
        raise ValidationError("activation vector contains non-finite entries")
    return activation


def predicted_class(probs: Sequence[float]) -> int:
    """Argmax of *probs*; the lowest class index wins ties."""
    # np.argmax returns the first occurrence of the maximum.
    return int(np.argmax(np.asarray(probs, dtype=np.float64)))


def _optional_label(value: Any, name: str) -> Optional[int]:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValidationError(f"{name} must be an integer class id, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class PredictionRecord:
    """One input's local outputs, labels and remote outcome.

    Vectors are stored as float tuples so records compare by value. Fields
    the trace format does not know about are carried in ``extras`` and
    written back unchanged.
    """

    id: str
    local_probs: tuple[float, ...]
    activation: tuple[float, ...]
    true_label: Optional[int] = None
    remote_label: Optional[int] = None
    remote_cost_units: Optional[float] = None
    features: Optional[tuple[float, ...]] = None
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.id, str):
            raise ValidationError(f"record id must be a string, got {self.id!r}")
        probs = as_probability_vector(self.local_probs)
        activation = as_activation_vector(self.activation)
        object.__setattr__(self, "local_probs", tuple(float(p) for p in probs))
        object.__setattr__(self, "activation", tuple(float(a) for a in activation))
        object.__setattr__(
            self, "true_label", _optional_label(self.true_label, "true_label")
        )
        object.__setattr__(
            self, "remote_label", _optional_label(self.remote_label, "remote_label")
        )
        if self.remote_cost_units is not None:
            cost = float(self.remote_cost_units)
            if not math.isfinite(cost) or cost < 0.0:
                raise ValidationError(
                    f"record {self.id!r}: remote_cost_units must be finite and >= 0"
                )
            object.__setattr__(self, "remote_cost_units", cost)
        if self.remote_label is not None and self.remote_cost_units is None:
            raise ValidationError(
                f"record {self.id!r}: remote_label present without remote_cost_units"
            )
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim != 1 or not np.all(np.isfinite(feats)):
                raise ValidationError(
                    f"record {self.id!r}: features must be a finite 1-D vector"
                )
            object.__setattr__(self, "features", tuple(float(v) for v in feats))

    @property
    def local_label(self) -> int:
        return predicted_class(self.local_probs)

    @property
    def num_classes(self) -> int:
        return len(self.local_probs)


@dataclass(frozen=True)
class AdaptationState:
    """Online threshold controller state.

    ``recent_scores`` is a bounded window used for the interquartile range
    that scales each threshold step.
    """

    ema_forward_rate: float
    ema_alpha: float = 0.02
    step_gain: float = 0.5
    decisions_seen: int = 0
    cold_start_decisions: int = 50
    score_window: int = 512
    recent_scores: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.ema_forward_rate <= 1.0:
            raise ValidationError("ema_forward_rate must lie in [0, 1]")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise ValidationError("ema_alpha must lie in (0, 1]")
        if not self.step_gain > 0.0:
            raise ValidationError("step_gain must be positive")
        if self.decisions_seen < 0:
            raise ValidationError("decisions_seen must be non-negative")
        if self.score_window < 1:
            raise ValidationError("score_window must be positive")


@dataclass(frozen=True)
class RoutingPolicy:
    supervisor_kind: SupervisorKind
    threshold: float
    target_forward_fraction: Optional[float] = None
    adaptation: Optional[AdaptationState] = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "supervisor_kind", SupervisorKind.parse(self.supervisor_kind)
        )
        if not math.isfinite(self.threshold):
            raise ValidationError(f"threshold must be finite, got {self.threshold!r}")
        target = self.target_forward_fraction
        if target is not None and not 0.0 <= target <= 1.0:
            raise ValidationError(
                f"target_forward_fraction must lie in [0, 1], got {target!r}"
            )


@dataclass(frozen=True)
class RoutingDecision:
    trusted: bool
    trust_score: float
    threshold_used: float
    route: Route

    def __post_init__(self) -> None:
        expected = self.trust_score >= self.threshold_used
        if self.trusted != expected or (self.route is Route.LOCAL) != self.trusted:
            raise ValidationError("inconsistent routing decision")


@dataclass(frozen=True)
class CalibrationResult:
    """Threshold chosen for a target forward fraction, with what it achieves."""

    threshold: float
    target_forward_fraction: float
    achieved_forward_fraction: float
    n_forwarded: int
    n: int

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "target_forward_fraction": self.target_forward_fraction,
            "achieved_forward_fraction": self.achieved_forward_fraction,
            "n_forwarded": self.n_forwarded,
            "n": self.n,
        }


@dataclass(frozen=True)
class CurvePoint:
    forward_fraction: float
    system_accuracy: float
    cost_saving: float
    threshold: float
    n_local: int
    n_remote: int

    def to_dict(self) -> dict:
        return {
            "forward_fraction": self.forward_fraction,
            "system_accuracy": self.system_accuracy,
            "cost_saving": self.cost_saving,
            "threshold": self.threshold,
            "n_local": self.n_local,
            "n_remote": self.n_remote,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CurvePoint":
        try:
            return cls(
                forward_fraction=float(data["forward_fraction"]),
                system_accuracy=float(data["system_accuracy"]),
                cost_saving=float(data["cost_saving"]),
                threshold=float(data["threshold"]),
                n_local=int(data["n_local"]),
                n_remote=int(data["n_remote"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed curve point: {exc}") from exc


@dataclass(frozen=True)
class EvaluationReport:
    """Cost/accuracy curve over one trace for one supervisor."""

    curve: tuple[CurvePoint, ...]
    local_only_accuracy: float
    remote_only_accuracy: float
    supervisor_kind: SupervisorKind
    trace_id: str = ""
    uniform_cost: bool = True

    def __post_init__(self) -> None:
        if len(self.curve) < 2:
            raise ValidationError("a report needs at least two curve points")
        first, last = self.curve[0], self.curve[-1]
        if first.forward_fraction != 0.0 or last.forward_fraction != 1.0:
            raise ValidationError("curve must span forward fractions 0 to 1")
        if first.system_accuracy != self.local_only_accuracy:
            raise ValidationError("first curve point must equal local-only accuracy")
        if last.system_accuracy != self.remote_only_accuracy:
            raise ValidationError("last curve point must equal remote-only accuracy")

    @property
    def best_point(self) -> CurvePoint:
        """Highest-accuracy point; the smallest forward fraction wins ties."""
        return max(self.curve, key=lambda p: (p.system_accuracy, -p.forward_fraction))

    @property
    def remote_parity_point(self) -> Optional[CurvePoint]:
        """Smallest forward fraction reaching remote-only accuracy."""
        for point in self.curve:
            if point.system_accuracy >= self.remote_only_accuracy:
                return point
        return None


@dataclass(frozen=True)
class RemoteEndpointConfig:
    base_url: str
    timeout_ms: float = 10_000
    max_retries: int = 3
    retry_backoff_base_ms: float = 100
    cost_per_kilotoken: float = 0.12
    max_backoff_ms: float = 10_000
    api_token: Optional[str] = None
    currency_unit: str = "USD"

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValidationError("remote base_url must not be empty")
        if not self.timeout_ms > 0:
            raise ValidationError("remote timeout must be positive")
        if not self.retry_backoff_base_ms > 0:
            raise ValidationError("retry_backoff_base must be positive")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be non-negative")
        if self.cost_per_kilotoken < 0:
            raise ValidationError("cost_per_kilotoken must be non-negative")


@dataclass(frozen=True)
class RemotePrediction:
    label: int
    cost_units: float
    latency_ms: float
    attempts: int
    probs: Optional[tuple[float, ...]] = None
    tokens: Optional[int] = None

    def to_wire(self) -> dict:
        body: dict[str, Any] = {"label": self.label, "cost_units": self.cost_units}
        if self.probs is not None:
            body["probs"] = list(self.probs)
        if self.tokens is not None:
            body["tokens"] = self.tokens
        return body


@dataclass(frozen=True)
class LedgerSnapshot:
    local_count: int = 0
    remote_count: int = 0
    remote_cost_total: float = 0.0
    currency_unit: str = "USD"

    @property
    def total(self) -> int:
        return self.local_count + self.remote_count

    @property
    def forward_rate(self) -> float:
        return self.remote_count / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "local_count": self.local_count,
            "remote_count": self.remote_count,
            "remote_cost_total": self.remote_cost_total,
            "currency_unit": self.currency_unit,
            "forward_rate": self.forward_rate,
        }
