# Layer: infrastructure/mocks — wire-compatible stub of the remote model.
#
# Serves POST /v1/predict with the same contract as a real provider.
# Correctness per request is decided by hashing the request id with the
# seed, so identical request sequences get identical answers.

from __future__ import annotations

import asyncio
import hashlib
import logging
import random
import threading
from dataclasses import dataclass
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

_log = logging.getLogger(__name__)

REPORT_MODES = ("tokens", "cost_units")


@dataclass(frozen=True)
class StubSettings:
    """Behaviour of the stub remote.

    Args:
        accuracy: Probability that the answer equals ``metadata.true_label``.
        latency_ms: Artificial delay before every answer.
        failure_rate: Probability of a 503 answer (seeded).
        seed: Seeds both the correctness hash and the failure draws.
        num_classes: Label range for wrong or label-less answers.
        fail_first: The first N requests answer 503.
        report: ``"tokens"`` or ``"cost_units"``.
        tokens_per_request: Reported tokens in ``tokens`` mode.
        cost_units: Reported cost in ``cost_units`` mode.
    """

    accuracy: float = 0.9
    latency_ms: float = 0.0
    failure_rate: float = 0.0
    seed: int = 0
    num_classes: int = 2
    fail_first: int = 0
    report: str = "tokens"
    tokens_per_request: int = 4000
    cost_units: float = 0.48

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")
        if not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError("failure_rate must lie in [0, 1]")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.report not in REPORT_MODES:
            raise ValueError(f"report must be one of {REPORT_MODES}")


def _unit_hash(seed: int, request_id: str) -> float:
    digest = hashlib.sha256(f"{seed}:{request_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


class StubRemote:
    """Request handling state, independent of the web framework."""

    def __init__(self, settings: StubSettings) -> None:
        self.settings = settings
        self._lock = threading.Lock()
        self._rng = random.Random(settings.seed)
        self._received = 0
        self.request_log: list[dict] = []

    @property
    def request_count(self) -> int:
        with self._lock:
            return self._received

    def label_for(self, request_id: str, true_label: Optional[int]) -> int:
        u = _unit_hash(self.settings.seed, request_id)
        k = self.settings.num_classes
        if true_label is None:
            return int(u * k) % k
        if u < self.settings.accuracy:
            return true_label
        return (true_label + 1) % k

    def handle(self, body: Any) -> tuple[int, dict]:
        """Return ``(status, json body)`` for one request."""
        with self._lock:
            self._received += 1
            sequence = self._received
            self.request_log.append(body if isinstance(body, dict) else {"raw": body})
            fail = sequence <= self.settings.fail_first or (
                self.settings.failure_rate > 0
                and self._rng.random() < self.settings.failure_rate
            )

        if fail:
            _log.debug("stub: request %d -> 503", sequence)
            return 503, {"error": "simulated outage"}
        if not isinstance(body, dict) or "input" not in body:
            return 400, {"error": "body must be an object with an 'input' field"}

        metadata = body.get("metadata") or {}
        if not isinstance(metadata, dict):
            return 400, {"error": "'metadata' must be an object"}
        true_label = metadata.get("true_label")
        if true_label is not None and (isinstance(true_label, bool) or not isinstance(true_label, int)):
            return 400, {"error": "'metadata.true_label' must be an integer"}
        request_id = str(metadata.get("id", sequence))

        answer: dict[str, Any] = {"label": self.label_for(request_id, true_label)}
        if self.settings.report == "tokens":
            answer["tokens"] = self.settings.tokens_per_request
        else:
            answer["cost_units"] = self.settings.cost_units
        return 200, answer


def create_stub_app(settings: Optional[StubSettings] = None) -> FastAPI:
    """FastAPI app serving the stub; ``app.state.stub`` exposes the request log."""
    stub = StubRemote(settings or StubSettings())
    app = FastAPI(title="cheapet stub remote")
    app.state.stub = stub

    @app.get("/")
    def health() -> dict:
        return {"status": "ok", "requests": stub.request_count}

    @app.post("/v1/predict")
    async def predict(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except ValueError:
            return JSONResponse({"error": "invalid JSON body"}, status_code=400)
        if stub.settings.latency_ms > 0:
            await asyncio.sleep(stub.settings.latency_ms / 1000.0)
        status, content = stub.handle(body)
        return JSONResponse(content, status_code=status)

    return app


def run_stub(host: str = "127.0.0.1", port: int = 8081, settings: Optional[StubSettings] = None) -> None:
    import uvicorn

    settings = settings or StubSettings()
    _log.info(
        "Stub remote on %s:%d (accuracy=%.3f, latency=%gms, failure_rate=%.3f, seed=%d)",
        host, port, settings.accuracy, settings.latency_ms, settings.failure_rate, settings.seed,
    )
    uvicorn.run(create_stub_app(settings), host=host, port=port, log_level="warning")
