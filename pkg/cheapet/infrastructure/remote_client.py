# Layer: infrastructure — HTTP client for the remote model service.
#
# Wire protocol: POST {base_url}/v1/predict
#   request  {"input": str | [number], "metadata": {...}?}
#   response {"label": int, "probs": [..]?, "cost_units": number?, "tokens": int?}
# 5xx, timeouts and connection errors are retried; 4xx never are.

from __future__ import annotations

import logging
import math
import random
import time
from typing import Any, Callable, Optional

import httpx

from ..core.exceptions import (
    ProtocolError,
    RemoteRequestError,
    RemoteUnavailableError,
    ValidationError,
)
from ..core.models import RemoteEndpointConfig, RemotePrediction, as_probability_vector
from ..core.retry import BackoffStrategy

_log = logging.getLogger(__name__)

PREDICT_PATH = "/v1/predict"


def tokens_to_cost(tokens: int, cost_per_kilotoken: float) -> float:
    """Billing estimate for *tokens* at a per-1000-token rate."""
    return cost_per_kilotoken * tokens / 1000


def parse_prediction(body: Any, cost_per_kilotoken: float) -> tuple[int, Optional[tuple[float, ...]], float, Optional[int]]:
    """Validate a response body; returns ``(label, probs, cost_units, tokens)``.

    Server-reported ``cost_units`` win over a token-based estimate.

    Raises:
        ProtocolError: missing/ill-typed fields or neither cost nor tokens.
    """
    if not isinstance(body, dict):
        raise ProtocolError("response body is not a JSON object")
    label = body.get("label")
    if isinstance(label, bool) or not isinstance(label, int):
        raise ProtocolError(f"response 'label' must be an integer, got {label!r}")

    probs = None
    if body.get("probs") is not None:
        try:
            probs = tuple(float(p) for p in as_probability_vector(body["probs"]))
        except (ValidationError, TypeError, ValueError) as exc:
            raise ProtocolError(f"response 'probs' invalid: {exc}") from exc

    tokens = body.get("tokens")
    if tokens is not None and (isinstance(tokens, bool) or not isinstance(tokens, int) or tokens < 0):
        raise ProtocolError(f"response 'tokens' must be a non-negative integer, got {tokens!r}")

    cost = body.get("cost_units")
    if cost is not None:
        if isinstance(cost, bool) or not isinstance(cost, (int, float)) or not math.isfinite(cost) or cost < 0:
            raise ProtocolError(f"response 'cost_units' must be a non-negative number, got {cost!r}")
        cost = float(cost)
    elif tokens is not None:
        cost = tokens_to_cost(tokens, cost_per_kilotoken)
    else:
        raise ProtocolError("response reports neither 'cost_units' nor 'tokens'")
    return label, probs, cost, tokens


class RemoteClient:
    """Synchronous client with retries, timeouts and connection reuse.

    Safe for concurrent use: the only shared state is the underlying
    ``httpx.Client`` connection pool. Each call builds its own backoff state.

    Args:
        config: Endpoint, timeout, retry and pricing settings.
        client: Pre-built ``httpx.Client`` (e.g. a test client); created from
            *config* when omitted.
        sleep: Called with seconds between attempts.
        rng: Source of jitter; seeded in tests.
    """

    def __init__(
        self,
        config: RemoteEndpointConfig,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ) -> None:
        self.config = config
        headers = {}
        if config.api_token:
            headers["Authorization"] = f"Bearer {config.api_token}"
        self._owns_client = client is None
        self._client = client or httpx.Client(timeout=config.timeout_ms / 1000.0)
        self._headers = headers
        self._sleep = sleep
        self._rng = rng or random.Random()

    @property
    def predict_url(self) -> str:
        return self.config.base_url.rstrip("/") + PREDICT_PATH

    def __enter__(self) -> "RemoteClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        if self._owns_client:
            self._client.close()

    def _backoff(self) -> BackoffStrategy:
        return BackoffStrategy(
            max_retries=self.config.max_retries,
            base_delay_ms=self.config.retry_backoff_base_ms,
            max_delay_ms=self.config.max_backoff_ms,
            rng=self._rng,
        )

    def request_remote(self, payload: Any, metadata: Optional[dict] = None) -> RemotePrediction:
        """Send one prediction request, retrying transient failures.

        Raises:
            RemoteUnavailableError: every attempt failed transiently.
            RemoteRequestError: the service answered 4xx.
            ProtocolError: the response violates the wire protocol.
        """
        body: dict[str, Any] = {"input": payload}
        if metadata is not None:
            body["metadata"] = metadata

        strategy = self._backoff()
        timeout = self.config.timeout_ms / 1000.0
        attempts = 0
        last_cause: object = None
        started = time.perf_counter()

        while True:
            attempts += 1
            try:
                response = self._client.post(
                    self.predict_url, json=body, headers=self._headers, timeout=timeout
                )
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                last_cause = exc
            else:
                if response.status_code >= 500:
                    last_cause = f"HTTP {response.status_code}"
                elif response.status_code >= 400:
                    raise RemoteRequestError(response.status_code, response.text[:200])
                elif response.status_code != 200:
                    raise ProtocolError(f"unexpected HTTP status {response.status_code}")
                else:
                    try:
                        parsed = response.json()
                    except ValueError as exc:
                        raise ProtocolError(f"response is not JSON: {exc}") from exc
                    label, probs, cost, tokens = parse_prediction(
                        parsed, self.config.cost_per_kilotoken
                    )
                    latency_ms = (time.perf_counter() - started) * 1000.0
                    _log.debug(
                        "Remote answered label=%d cost=%.6g after %d attempt(s)",
                        label, cost, attempts,
                    )
                    return RemotePrediction(
                        label=label,
                        cost_units=cost,
                        latency_ms=latency_ms,
                        attempts=attempts,
                        probs=probs,
                        tokens=tokens,
                    )

            if not strategy.should_retry():
                _log.error("Remote unavailable after %d attempt(s): %s", attempts, last_cause)
                raise RemoteUnavailableError(attempts, last_cause)
            delay_ms = strategy.get_next_delay_ms()
            _log.warning(
                "Remote attempt %d failed (%s); %s in %.0f ms",
                attempts, last_cause, strategy.get_attempt_info(), delay_ms,
            )
            self._sleep(delay_ms / 1000.0)

    def probe(self, timeout_ms: float = 2000.0) -> bool:
        """True when the service answers HTTP at all (any status)."""
        try:
            self._client.get(self.config.base_url, timeout=timeout_ms / 1000.0)
            return True
        except httpx.HTTPError as exc:
            _log.warning("Remote endpoint %s unreachable: %s", self.config.base_url, exc)
            return False
