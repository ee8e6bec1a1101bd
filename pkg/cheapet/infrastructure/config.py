"""Configuration loading: package defaults, gateway TOML file, environment.

Precedence (lowest first): ``cheapet/config.json`` defaults, the gateway
TOML file, ``CHEAPET_<SECTION>_<KEY>`` environment variables.
"""

from __future__ import annotations

import json
import logging
import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 fallback
    import tomli as tomllib
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from ..core.exceptions import ConfigurationError, ValidationError
from ..core.models import (
    AdaptationState,
    RemoteEndpointConfig,
    RoutingPolicy,
    SupervisorKind,
)

_log = logging.getLogger(__name__)

ENV_PREFIX = "CHEAPET_"
THRESHOLD_AUTO = "auto"


def import_config() -> dict:
    """Load the package defaults from config.json.

    File paths take precedence over the packaged resource so a working copy
    can be tuned without reinstalling.
    """
    possible_paths = [
        Path(__file__).parent.parent / "config.json",
        Path(__file__).parent.parent.parent / "config.json",
        Path("config.json"),
        Path(sys.prefix) / "config.json",
    ]
    for config_path in possible_paths:
        try:
            if config_path.exists():
                with open(config_path, "r", encoding="utf-8") as fh:
                    config = json.load(fh)
                _log.debug("Config loaded from: %s", config_path)
                return config
        except (OSError, json.JSONDecodeError):
            continue

    try:
        resource = files("cheapet").joinpath("config.json")
        config = json.loads(resource.read_text(encoding="utf-8"))
        _log.debug("Config loaded from package resources (fallback).")
        return config
    except Exception as exc:  # pylint: disable=broad-except
        _log.debug("Failed to load config from package resources: %s", exc)

    _log.error("config.json not found; falling back to built-in defaults")
    return {}


def get_config(section: str) -> dict:
    """One section of the package defaults (empty dict if absent)."""
    return dict(import_config().get(section, {}))


# Keys accepted in each TOML section, with the type used to coerce
# environment overrides.
_SCHEMA: dict[str, dict[str, Any]] = {
    "gateway": {
        "listen_address": str,
        "local_model_path": str,
        "fallback": str,
        "shutdown_deadline_s": float,
        "ledger_report_interval_s": float,
        "probe_timeout_ms": float,
    },
    "supervisor": {
        "kind": str,
        "mdsa_model_path": str,
    },
    "routing": {
        "threshold": "threshold",
        "target_forward_fraction": float,
        "calibration_trace_path": str,
        "adaptation_enabled": bool,
        "ema_alpha": float,
        "step_gain": float,
        "cold_start_decisions": int,
        "score_window": int,
    },
    "remote": {
        "base_url": str,
        "timeout_ms": float,
        "max_retries": int,
        "retry_backoff_base_ms": float,
        "max_backoff_ms": float,
        "cost_per_kilotoken": float,
        "api_token": str,
        "currency_unit": str,
    },
}


def _coerce(raw: str, kind: Any, name: str) -> Any:
    raw = raw.strip()
    try:
        if kind is bool:
            return raw.lower() in {"1", "true", "yes", "on"}
        if kind == "threshold":
            return THRESHOLD_AUTO if raw.lower() == THRESHOLD_AUTO else float(raw)
        if kind in (int, float):
            return kind(raw)
    except ValueError:
        raise ConfigurationError(f"{name}={raw!r} is not a valid {kind}") from None
    return raw


def _env_overrides(environ: Mapping[str, str]) -> dict[str, dict[str, Any]]:
    overrides: dict[str, dict[str, Any]] = {}
    for section, keys in _SCHEMA.items():
        for key, kind in keys.items():
            name = f"{ENV_PREFIX}{section.upper()}_{key.upper()}"
            if name in environ:
                overrides.setdefault(section, {})[key] = _coerce(environ[name], kind, name)
                _log.info("Config override from environment: %s", name)
    return overrides


@dataclass(frozen=True)
class GatewayConfig:
    """Assembled gateway settings; see ``cheapet/data/gateway.example.toml``."""

    local_model_path: Path
    remote: RemoteEndpointConfig
    listen_address: str = "127.0.0.1:8080"
    supervisor_kind: SupervisorKind = SupervisorKind.SM
    mdsa_model_path: Optional[Path] = None
    threshold: Union[float, str] = THRESHOLD_AUTO
    target_forward_fraction: Optional[float] = None
    calibration_trace_path: Optional[Path] = None
    adaptation_enabled: bool = False
    ema_alpha: float = 0.02
    step_gain: float = 0.5
    cold_start_decisions: int = 50
    score_window: int = 512
    fallback: str = "local"
    shutdown_deadline_s: float = 10.0
    ledger_report_interval_s: float = 60.0
    probe_timeout_ms: float = 2000.0

    def __post_init__(self) -> None:
        if self.threshold == THRESHOLD_AUTO:
            if self.target_forward_fraction is None or self.calibration_trace_path is None:
                raise ConfigurationError(
                    "threshold 'auto' needs target_forward_fraction and calibration_trace_path"
                )
        elif not isinstance(self.threshold, (int, float)):
            raise ConfigurationError(f"threshold must be a number or 'auto', got {self.threshold!r}")
        if self.supervisor_kind is SupervisorKind.MDSA and self.mdsa_model_path is None:
            raise ConfigurationError("MDSA supervisor needs mdsa_model_path")
        if self.adaptation_enabled and self.target_forward_fraction is None:
            raise ConfigurationError("adaptation needs target_forward_fraction")
        if self.target_forward_fraction is not None and not 0.0 <= self.target_forward_fraction <= 1.0:
            raise ConfigurationError("target_forward_fraction must lie in [0, 1]")
        if self.fallback not in ("local", "strict"):
            raise ConfigurationError(f"fallback must be 'local' or 'strict', got {self.fallback!r}")
        host, _, port = self.listen_address.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigurationError(f"listen_address must be host:port, got {self.listen_address!r}")

    @property
    def host(self) -> str:
        return self.listen_address.rpartition(":")[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rpartition(":")[2])


def _resolve(base: Path, value: Optional[str]) -> Optional[Path]:
    if not value:
        return None
    path = Path(value).expanduser()
    return path if path.is_absolute() else base / path


def build_gateway_config(
    sections: Mapping[str, Mapping[str, Any]], base_dir: Path = Path(".")
) -> GatewayConfig:
    """Assemble a GatewayConfig from merged section dicts."""
    defaults = import_config()
    merged: dict[str, dict[str, Any]] = {}
    for section in _SCHEMA:
        merged[section] = {**defaults.get(section, {}), **dict(sections.get(section, {}))}
        unknown = set(sections.get(section, {})) - set(_SCHEMA[section])
        if unknown:
            _log.warning("Ignoring unknown keys in [%s]: %s", section, sorted(unknown))

    gateway, supervisor = merged["gateway"], merged["supervisor"]
    routing, remote = merged["routing"], merged["remote"]

    if not gateway.get("local_model_path"):
        raise ConfigurationError("[gateway] local_model_path is required")
    if not remote.get("base_url"):
        raise ConfigurationError("[remote] base_url is required")

    try:
        remote_config = RemoteEndpointConfig(
            base_url=str(remote["base_url"]).rstrip("/"),
            timeout_ms=float(remote.get("timeout_ms", 10_000)),
            max_retries=int(remote.get("max_retries", 3)),
            retry_backoff_base_ms=float(remote.get("retry_backoff_base_ms", 100)),
            max_backoff_ms=float(remote.get("max_backoff_ms", 10_000)),
            cost_per_kilotoken=float(remote.get("cost_per_kilotoken", 0.12)),
            api_token=remote.get("api_token") or None,
            currency_unit=str(remote.get("currency_unit", "USD")),
        )
        kind = SupervisorKind.parse(supervisor.get("kind", "sm"))
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc

    threshold = routing.get("threshold", THRESHOLD_AUTO)
    if isinstance(threshold, str) and threshold.lower() != THRESHOLD_AUTO:
        threshold = _coerce(threshold, "threshold", "routing.threshold")
    target = routing.get("target_forward_fraction")

    return GatewayConfig(
        local_model_path=_resolve(base_dir, gateway["local_model_path"]),
        remote=remote_config,
        listen_address=str(gateway.get("listen_address", "127.0.0.1:8080")),
        supervisor_kind=kind,
        mdsa_model_path=_resolve(base_dir, supervisor.get("mdsa_model_path")),
        threshold=threshold.lower() if isinstance(threshold, str) else float(threshold),
        target_forward_fraction=None if target is None else float(target),
        calibration_trace_path=_resolve(base_dir, routing.get("calibration_trace_path")),
        adaptation_enabled=bool(routing.get("adaptation_enabled", False)),
        ema_alpha=float(routing.get("ema_alpha", 0.02)),
        step_gain=float(routing.get("step_gain", 0.5)),
        cold_start_decisions=int(routing.get("cold_start_decisions", 50)),
        score_window=int(routing.get("score_window", 512)),
        fallback=str(gateway.get("fallback", "local")),
        shutdown_deadline_s=float(gateway.get("shutdown_deadline_s", 10)),
        ledger_report_interval_s=float(gateway.get("ledger_report_interval_s", 60)),
        probe_timeout_ms=float(gateway.get("probe_timeout_ms", 2000)),
    )


def load_gateway_config(
    path: Union[str, Path], environ: Optional[Mapping[str, str]] = None
) -> GatewayConfig:
    """Read a gateway TOML file and apply ``CHEAPET_*`` overrides.

    Raises:
        OSError: the file cannot be read.
        ConfigurationError: TOML syntax errors or invalid settings.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            sections = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc

    for section, values in _env_overrides(os.environ if environ is None else environ).items():
        sections.setdefault(section, {}).update(values)
    config = build_gateway_config(sections, base_dir=path.parent)
    _log.info("Gateway config loaded from %s", path)
    return config


def policy_from_config(config: GatewayConfig, threshold: float) -> RoutingPolicy:
    """Routing policy for a resolved *threshold* (calibrated when 'auto')."""
    adaptation = None
    if config.target_forward_fraction is not None:
        adaptation = AdaptationState(
            ema_forward_rate=config.target_forward_fraction,
            ema_alpha=config.ema_alpha,
            step_gain=config.step_gain,
            cold_start_decisions=config.cold_start_decisions,
            score_window=config.score_window,
        )
    return RoutingPolicy(
        supervisor_kind=config.supervisor_kind,
        threshold=float(threshold),
        target_forward_fraction=config.target_forward_fraction,
        adaptation=adaptation,
    )


def policy_to_config(policy: RoutingPolicy) -> dict[str, dict[str, Any]]:
    """The ``[supervisor]`` and ``[routing]`` sections that reproduce *policy*."""
    routing: dict[str, Any] = {"threshold": policy.threshold}
    if policy.target_forward_fraction is not None:
        routing["target_forward_fraction"] = policy.target_forward_fraction
    if policy.adaptation is not None:
        routing.update(
            ema_alpha=policy.adaptation.ema_alpha,
            step_gain=policy.adaptation.step_gain,
            cold_start_decisions=policy.adaptation.cold_start_decisions,
            score_window=policy.adaptation.score_window,
        )
    return {"supervisor": {"kind": policy.supervisor_kind.value}, "routing": routing}
