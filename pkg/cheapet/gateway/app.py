"""FastAPI surface of the gateway.

POST /v1/predict speaks the remote model's wire protocol, so clients can
point at the gateway instead of the provider. GET /v1/ledger returns the
cost ledger.
"""

from __future__ import annotations

import logging
from contextlib import asynccontextmanager
from typing import Any, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..core.exceptions import NumericError, ValidationError
from ..infrastructure.config import GatewayConfig
from ..infrastructure.remote_client import RemoteClient
from .controller import GatewayController, LedgerReporter, UpstreamFailure

_log = logging.getLogger(__name__)


class PredictRequest(BaseModel):
    input: Any
    metadata: Optional[dict[str, Any]] = None


def create_app(
    controller: GatewayController, ledger_report_interval_s: float = 0.0
) -> FastAPI:
    """Build the gateway app around *controller*.

    A positive *ledger_report_interval_s* starts a reporter thread for the
    lifetime of the app.
    """
    reporter = LedgerReporter(controller.ledger, ledger_report_interval_s)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        reporter.start()
        try:
            yield
        finally:
            reporter.stop()

    app = FastAPI(title="cheapet gateway", lifespan=lifespan)
    app.state.controller = controller

    @app.get("/")
    def health() -> dict:
        return {"status": "ok"}

    # Sync: runs in FastAPI's worker threadpool.
    @app.post("/v1/predict")
    def predict(request: PredictRequest) -> JSONResponse:
        try:
            reply = controller.handle(request.input, request.metadata)
        except TypeError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        except (ValidationError, NumericError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        except UpstreamFailure as exc:
            return JSONResponse({"error": f"remote model failed: {exc}"}, status_code=502)
        return JSONResponse(reply.to_wire())

    @app.get("/v1/ledger")
    def ledger() -> dict:
        return controller.ledger.snapshot().to_dict()

    return app


def serve(config: GatewayConfig) -> None:
    """Run the gateway until interrupted; in-flight requests get the shutdown deadline."""
    import uvicorn

    with RemoteClient(config.remote) as remote:
        if not remote.probe(config.probe_timeout_ms):
            _log.warning(
                "Remote endpoint %s not reachable at startup; untrusted requests "
                "will use the %s fallback until it answers",
                config.remote.base_url, config.fallback,
            )
        controller = GatewayController.from_config(config, remote)
        app = create_app(controller, config.ledger_report_interval_s)
        policy = controller.router.policy
        _log.info(
            "Gateway listening on %s (supervisor=%s, threshold=%.6g, adaptation=%s)",
            config.listen_address, policy.supervisor_kind.value, policy.threshold,
            "on" if config.adaptation_enabled else "off",
        )
        uvicorn.run(
            app,
            host=config.host,
            port=config.port,
            timeout_graceful_shutdown=max(1, int(config.shutdown_deadline_s)),
            log_level="warning",
        )
