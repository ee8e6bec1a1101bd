"""Tests for infrastructure/config.py — TOML, defaults and env overrides."""

import pytest

from cheapet.core.exceptions import ConfigurationError
from cheapet.core.models import SupervisorKind
from cheapet.infrastructure.config import (
    THRESHOLD_AUTO,
    get_config,
    import_config,
    load_gateway_config,
    policy_from_config,
    policy_to_config,
)
from tests.conftest import PACKAGE_DATA

MINIMAL = """
[gateway]
local_model_path = "model.json"

[routing]
threshold = 0.72

[remote]
base_url = "http://remote.example:9000/"
"""


def _write(tmp_path, text, name="gateway.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_package_defaults_are_loaded():
    config = import_config()
    assert config["application"]["name"] == "cheapet"
    assert get_config("remote")["max_retries"] == 3
    assert get_config("no-such-section") == {}


def test_minimal_file_fills_in_defaults(tmp_path):
    config = load_gateway_config(_write(tmp_path, MINIMAL), environ={})
    assert config.threshold == 0.72
    assert config.local_model_path == tmp_path / "model.json"
    assert config.remote.base_url == "http://remote.example:9000"
    assert config.remote.max_retries == 3
    assert config.remote.cost_per_kilotoken == 0.12
    assert config.supervisor_kind is SupervisorKind.SM
    assert config.fallback == "local"
    assert (config.host, config.port) == ("127.0.0.1", 8080)


def test_packaged_example_config_is_valid():
    config = load_gateway_config(PACKAGE_DATA / "gateway.example.toml", environ={})
    assert config.threshold == THRESHOLD_AUTO
    assert config.target_forward_fraction == 0.5
    assert config.calibration_trace_path == PACKAGE_DATA / "example_trace.jsonl"
    assert config.local_model_path.exists()


def test_environment_overrides_file(tmp_path):
    environ = {
        "CHEAPET_ROUTING_THRESHOLD": "0.25",
        "CHEAPET_REMOTE_MAX_RETRIES": "5",
        "CHEAPET_ROUTING_ADAPTATION_ENABLED": "yes",
        "CHEAPET_ROUTING_TARGET_FORWARD_FRACTION": "0.3",
        "CHEAPET_REMOTE_API_TOKEN": "secret",
    }
    config = load_gateway_config(_write(tmp_path, MINIMAL), environ=environ)
    assert config.threshold == 0.25
    assert config.remote.max_retries == 5
    assert config.adaptation_enabled
    assert config.target_forward_fraction == 0.3
    assert config.remote.api_token == "secret"


def test_invalid_environment_value(tmp_path):
    with pytest.raises(ConfigurationError, match="CHEAPET_REMOTE_MAX_RETRIES"):
        load_gateway_config(_write(tmp_path, MINIMAL), environ={"CHEAPET_REMOTE_MAX_RETRIES": "many"})


def test_auto_threshold_needs_target_and_trace(tmp_path):
    text = MINIMAL.replace("threshold = 0.72", 'threshold = "auto"')
    with pytest.raises(ConfigurationError, match="auto"):
        load_gateway_config(_write(tmp_path, text), environ={})
    text = MINIMAL.replace(
        "threshold = 0.72",
        'threshold = "auto"\ntarget_forward_fraction = 0.4\ncalibration_trace_path = "cal.jsonl"',
    )
    config = load_gateway_config(_write(tmp_path, text), environ={})
    assert config.calibration_trace_path == tmp_path / "cal.jsonl"


def test_mdsa_needs_model_path(tmp_path):
    text = MINIMAL + '\n[supervisor]\nkind = "mdsa"\n'
    with pytest.raises(ConfigurationError, match="mdsa_model_path"):
        load_gateway_config(_write(tmp_path, text), environ={})
    text = MINIMAL + '\n[supervisor]\nkind = "mdsa"\nmdsa_model_path = "/abs/mdsa.json"\n'
    config = load_gateway_config(_write(tmp_path, text), environ={})
    assert str(config.mdsa_model_path) == "/abs/mdsa.json"


@pytest.mark.parametrize(
    "replacement",
    [
        ('local_model_path = "model.json"', 'local_model_path = "model.json"\nfallback = "maybe"'),
        ('local_model_path = "model.json"', 'local_model_path = "model.json"\nlisten_address = "nope"'),
        ('base_url = "http://remote.example:9000/"', 'base_url = ""'),
        ("threshold = 0.72", 'threshold = "high"'),
        ("[routing]", "[routing"),
    ],
)
def test_invalid_settings_rejected(tmp_path, replacement):
    text = MINIMAL.replace(*replacement)
    with pytest.raises(ConfigurationError):
        load_gateway_config(_write(tmp_path, text), environ={})


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_gateway_config(tmp_path / "absent.toml", environ={})


def test_policy_round_trips_through_config_sections(tmp_path):
    text = MINIMAL.replace("threshold = 0.72", "threshold = 0.72\ntarget_forward_fraction = 0.3")
    config = load_gateway_config(_write(tmp_path, text), environ={})
    policy = policy_from_config(config, config.threshold)
    assert policy.adaptation.ema_forward_rate == 0.3
    sections = policy_to_config(policy)
    assert sections["supervisor"] == {"kind": "sm"}
    assert sections["routing"]["threshold"] == 0.72
    assert sections["routing"]["score_window"] == 512
