# Layer: core — structural interfaces the gateway depends on.
#
# RemoteModel lets the gateway forward requests without importing the HTTP
# client; infrastructure.remote_client.RemoteClient satisfies it.

from typing import Any, Optional, Protocol, runtime_checkable

from .models import RemotePrediction


@runtime_checkable
class RemoteModel(Protocol):
    """Anything that can answer a forwarded prediction request."""

    def request_remote(
        self, payload: Any, metadata: Optional[dict] = None
    ) -> RemotePrediction: ...  # noqa: E704
