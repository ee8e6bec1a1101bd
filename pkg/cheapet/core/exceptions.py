# Layer: core — pure Python, zero HTTP/file I/O imports.

from __future__ import annotations

from typing import Optional


class CheapetError(Exception):
    """Base exception for all cheapet errors."""


class ValidationError(CheapetError, ValueError):
    """Raised when an input violates a documented invariant."""


class InsufficientDataError(ValidationError):
    """Raised when a class has too few samples to fit a covariance."""

    def __init__(self, class_id: object, n_samples: int, required: int) -> None:
        super().__init__(
            f"class {class_id!r} has {n_samples} samples, at least {required} required"
        )
        self.class_id = class_id
        self.n_samples = n_samples
        self.required = required


class SingularityError(CheapetError):
    """Raised when a regularized covariance is not positive definite."""


class UnknownClassError(CheapetError, LookupError):
    """Raised when a class id is not present in a fitted model."""


class NumericError(CheapetError):
    """Raised when a forward pass produces a non-finite intermediate."""

    def __init__(self, layer: int, message: str = "non-finite values") -> None:
        super().__init__(f"layer {layer}: {message}")
        self.layer = layer


class ConfigurationError(CheapetError):
    """Raised for invalid or incomplete configuration."""


class TraceFormatError(ValidationError):
    """Raised for a malformed trace line."""

    def __init__(self, message: str, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class WeightFileError(ValidationError):
    """Raised when a weight file cannot be parsed or violates the layer chain."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ) -> None:
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.column = column


class RemoteError(CheapetError):
    """Base class for failures talking to the remote model."""


class RemoteUnavailableError(RemoteError):
    """Raised when every attempt at the remote model failed transiently."""

    def __init__(self, attempts: int, last_cause: object) -> None:
        super().__init__(
            f"remote model unavailable after {attempts} attempt(s): {last_cause}"
        )
        self.attempts = attempts
        self.last_cause = last_cause


class RemoteRequestError(RemoteError):
    """Raised for a permanent (4xx) rejection. Never retried."""

    def __init__(self, status_code: int, body: str = "") -> None:
        super().__init__(f"remote rejected request with HTTP {status_code}: {body}")
        self.status_code = status_code
        self.body = body


class ProtocolError(RemoteError):
    """Raised when a remote response violates the wire protocol."""
