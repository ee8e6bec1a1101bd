"""Gateway request orchestration.

Per request: local forward pass, trust score, routing decision, optional
forward to the remote model, ledger update. The controller holds no web
framework types so it can be driven directly from tests or other servers.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from typing import Any, Optional

from ..core.exceptions import RemoteError, UnknownClassError, ValidationError
from ..core.local_model import LocalModel, predict_local
from ..core.models import Route, SupervisorKind
from ..core.ports import RemoteModel
from ..core.routing import calibrate_threshold
from ..core.services import AdaptiveRouter, CostLedger
from ..core.supervision import MdsaModel, score, score_trace
from ..infrastructure.config import THRESHOLD_AUTO, GatewayConfig, policy_from_config
from ..infrastructure.model_store import load_mdsa
from ..infrastructure.trace_io import load_trace
from ..infrastructure.weights import load_weights

_log = logging.getLogger(__name__)

ROUTE_LOCAL_FALLBACK = "local_fallback"


class UpstreamFailure(Exception):
    """Remote failed while routing strictly; the app answers 502."""

    def __init__(self, cause: RemoteError) -> None:
        super().__init__(str(cause))
        self.cause = cause


@dataclass(frozen=True)
class GatewayReply:
    """One /v1/predict answer: the wire fields plus routing extensions."""

    label: int
    route: str
    trust_score: Optional[float]
    cost_units: float
    probs: Optional[tuple[float, ...]] = None
    tokens: Optional[int] = None

    def to_wire(self) -> dict:
        body: dict[str, Any] = {
            "label": self.label,
            "cost_units": self.cost_units,
            "route": self.route,
            "trust_score": self.trust_score,
        }
        if self.probs is not None:
            body["probs"] = list(self.probs)
        if self.tokens is not None:
            body["tokens"] = self.tokens
        return body


def as_feature_vector(payload: Any) -> list[float]:
    """Numeric features from a request ``input``.

    Raises:
        TypeError: the input is not an array (strings cannot feed the local engine).
        ValidationError: an array entry is not a finite number.
    """
    if not isinstance(payload, list):
        raise TypeError("input must be a number array for the local model")
    features = []
    for i, value in enumerate(payload):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"input[{i}] is not a number: {value!r}")
        if not math.isfinite(value):
            raise ValidationError(f"input[{i}] is not finite")
        features.append(float(value))
    return features


class GatewayController:
    """Local-first prediction with supervised forwarding.

    Args:
        model: Local surrogate.
        router: Holds the routing policy (and adaptation, if enabled).
        remote: Anything implementing ``request_remote``.
        ledger: Request and cost accounting.
        mdsa: Required when the policy uses the MDSA supervisor; its
            dimension must equal the local model's activation dimension.
        fallback: ``"local"`` answers with the local label when the remote
            fails; ``"strict"`` raises ``UpstreamFailure``.

    A request whose predicted class has no MDSA statistics cannot be
    scored. It is forwarded with ``trust_score`` None and does not count
    towards threshold adaptation.
    """

    def __init__(
        self,
        model: LocalModel,
        router: AdaptiveRouter,
        remote: RemoteModel,
        ledger: Optional[CostLedger] = None,
        mdsa: Optional[MdsaModel] = None,
        fallback: str = "local",
    ) -> None:
        kind = router.policy.supervisor_kind
        if kind is SupervisorKind.MDSA and mdsa is None:
            raise ValidationError("MDSA routing needs a fitted MDSA model")
        if mdsa is not None and mdsa.dimension != model.activation_dim:
            raise ValidationError(
                f"MDSA model dimension {mdsa.dimension} does not match local model "
                f"activation dimension {model.activation_dim} (tap layer {model.activation_tap})"
            )
        if fallback not in ("local", "strict"):
            raise ValidationError(f"unknown fallback mode {fallback!r}")
        self.model = model
        self.router = router
        self.remote = remote
        self.ledger = ledger or CostLedger()
        self.mdsa = mdsa
        self.fallback = fallback

    @classmethod
    def from_config(
        cls, config: GatewayConfig, remote: RemoteModel
    ) -> "GatewayController":
        """Load models named in *config*, calibrating the threshold when 'auto'."""
        model = load_weights(config.local_model_path)
        mdsa = None
        if config.supervisor_kind is SupervisorKind.MDSA:
            mdsa = load_mdsa(config.mdsa_model_path)

        threshold = config.threshold
        if threshold == THRESHOLD_AUTO:
            trace = load_trace(config.calibration_trace_path)
            scores = score_trace(trace, config.supervisor_kind, mdsa)
            result = calibrate_threshold(scores, config.target_forward_fraction)
            threshold = result.threshold
            _log.info(
                "Auto threshold %.6g from %s (achieved forward fraction %.4f)",
                threshold, config.calibration_trace_path, result.achieved_forward_fraction,
            )

        router = AdaptiveRouter(
            policy_from_config(config, threshold), config.adaptation_enabled
        )
        return cls(
            model,
            router,
            remote,
            CostLedger(config.remote.currency_unit),
            mdsa,
            config.fallback,
        )

    def handle(self, payload: Any, metadata: Optional[dict] = None) -> GatewayReply:
        """Answer one request.

        Raises:
            TypeError: non-array input.
            ValidationError: bad features for the local model.
            UpstreamFailure: remote failed and fallback is strict.
        """
        features = as_feature_vector(payload)
        probs, activation = predict_local(self.model, features)
        kind = self.router.policy.supervisor_kind
        local_label = int(probs.argmax())
        local_probs = tuple(float(p) for p in probs)

        try:
            trust: Optional[float] = score(kind, probs, activation, self.mdsa)
        except UnknownClassError as exc:
            _log.warning("Cannot score request, forwarding: %s", exc)
            return self._forward(payload, metadata, local_label, local_probs, None)

        decision = self.router.route(trust)
        if decision.route is Route.LOCAL:
            self.ledger.record_local()
            return GatewayReply(
                label=local_label,
                route=Route.LOCAL.value,
                trust_score=trust,
                cost_units=0.0,
                probs=local_probs,
            )
        return self._forward(payload, metadata, local_label, local_probs, trust)

    def _forward(
        self,
        payload: Any,
        metadata: Optional[dict],
        local_label: int,
        local_probs: tuple[float, ...],
        trust: Optional[float],
    ) -> GatewayReply:
        try:
            prediction = self.remote.request_remote(payload, metadata)
        except RemoteError as exc:
            if self.fallback == "strict":
                _log.error("Remote failed, strict mode: %s", exc)
                raise UpstreamFailure(exc) from exc
            _log.warning("Remote failed, answering locally: %s", exc)
            self.ledger.record_local()
            return GatewayReply(
                label=local_label,
                route=ROUTE_LOCAL_FALLBACK,
                trust_score=trust,
                cost_units=0.0,
                probs=local_probs,
            )

        self.ledger.record_remote(prediction.cost_units)
        return GatewayReply(
            label=prediction.label,
            route=Route.REMOTE.value,
            trust_score=trust,
            cost_units=prediction.cost_units,
            probs=prediction.probs,
            tokens=prediction.tokens,
        )


class LedgerReporter:
    """Background thread logging a ledger snapshot every *interval_s* seconds."""

    def __init__(self, ledger: CostLedger, interval_s: float) -> None:
        self._ledger = ledger
        self._interval_s = interval_s
        self._stop_event = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        if self._thread is not None or self._interval_s <= 0:
            return
        self._stop_event.clear()
        self._thread = threading.Thread(
            target=self._report_loop, name="ledger-reporter", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self._stop_event.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        self.report()

    def report(self) -> None:
        snap = self._ledger.snapshot()
        _log.info(
            "Ledger: local=%d remote=%d forward_rate=%.4f cost=%.6g %s",
            snap.local_count, snap.remote_count, snap.forward_rate,
            snap.remote_cost_total, snap.currency_unit,
        )

    def _report_loop(self) -> None:
        while not self._stop_event.wait(self._interval_s):
            self.report()
