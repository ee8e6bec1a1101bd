"""Project-wide pytest fixtures and CLI options."""

from pathlib import Path

import pytest

from cheapet.core.local_model import LocalModel, make_layer
from cheapet.infrastructure.trace_io import load_trace

PACKAGE_DATA = Path(__file__).resolve().parent.parent / "cheapet" / "data"
TEST_DATA = Path(__file__).resolve().parent / "data"


def pytest_addoption(parser):
    parser.addoption(
        "--remote-url",
        default=None,
        metavar="URL",
        help="Base URL of a live remote model for remote-marked tests",
    )


@pytest.fixture(scope="session")
def remote_url(request):
    """Live endpoint for remote-only tests; skips if --remote-url not given."""
    url = request.config.getoption("--remote-url")
    if url is None:
        pytest.skip("No --remote-url specified; pass --remote-url http://... to run")
    return url


@pytest.fixture(scope="session")
def example_trace_path() -> Path:
    return PACKAGE_DATA / "example_trace.jsonl"


@pytest.fixture
def example_trace(example_trace_path):
    return load_trace(example_trace_path)


@pytest.fixture(scope="session")
def golden_sweep_path() -> Path:
    return TEST_DATA / "example_sweep.csv"


@pytest.fixture
def scalar_model() -> LocalModel:
    """1-d input, identity tap, softmax over logits (x, -x).

    P(class 0) = sigmoid(2x), so the SM score is monotone in |x|.
    """
    return LocalModel(
        layers=(
            make_layer([[1.0]], [0.0], "identity"),
            make_layer([[1.0], [-1.0]], [0.0, 0.0], "softmax"),
        ),
        activation_tap=0,
        input_dim=1,
        num_classes=2,
    )


