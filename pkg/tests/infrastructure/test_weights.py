"""Tests for infrastructure/weights.py — local model weight files."""

import json

import numpy as np
import pytest

from cheapet.core.exceptions import WeightFileError
from cheapet.core.local_model import predict_local
from cheapet.infrastructure.weights import load_weights, model_to_dict, save_weights
from tests.conftest import PACKAGE_DATA


def _doc(**overrides):
    doc = {
        "input_dim": 2,
        "num_classes": 2,
        "activation_tap": 0,
        "layers": [
            {"w": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], "b": [0.0, 0.0, 0.0], "nonlinearity": "relu"},
            {"w": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], "b": [0.0, 0.0], "nonlinearity": "softmax"},
        ],
    }
    doc.update(overrides)
    return doc


def _write(tmp_path, doc):
    path = tmp_path / "weights.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_load_packaged_example_model():
    model = load_weights(PACKAGE_DATA / "local_model.json")
    assert model.input_dim == 2
    assert model.num_classes == 2
    probs, activation = predict_local(model, [0.5, -0.5])
    assert probs[0] > 0.5
    np.testing.assert_array_equal(activation, [0.5, -0.5])


def test_load_valid_document(tmp_path):
    model = load_weights(_write(tmp_path, _doc()))
    assert model.activation_dim == 3
    assert len(model.layers) == 2


def test_syntax_error_reports_line_and_column(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "input_dim": 2,\n  "layers": [,]\n}', encoding="utf-8")
    with pytest.raises(WeightFileError) as info:
        load_weights(path)
    assert info.value.line == 3
    assert info.value.column is not None
    assert "line 3" in str(info.value)


def test_mismatched_dims_name_both_layers(tmp_path):
    doc = _doc()
    doc["layers"][1]["w"] = [[1.0, 0.0], [0.0, 1.0]]
    with pytest.raises(WeightFileError, match="layer 0.*layer 1"):
        load_weights(_write(tmp_path, doc))


def test_tap_on_final_layer_rejected(tmp_path):
    with pytest.raises(WeightFileError, match="activation_tap"):
        load_weights(_write(tmp_path, _doc(activation_tap=1)))


def test_missing_keys_and_layer_fields(tmp_path):
    doc = _doc()
    del doc["num_classes"]
    with pytest.raises(WeightFileError, match="num_classes"):
        load_weights(_write(tmp_path, doc))
    doc = _doc()
    del doc["layers"][0]["b"]
    with pytest.raises(WeightFileError, match="layer 0"):
        load_weights(_write(tmp_path, doc))


def test_ragged_weights_rejected(tmp_path):
    doc = _doc()
    doc["layers"][0]["w"] = [[1.0, 0.0], [0.0], [1.0, 1.0]]
    with pytest.raises(WeightFileError, match="layer 0"):
        load_weights(_write(tmp_path, doc))


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_weights(tmp_path / "nope.json")


def test_saved_model_loads_identically(tmp_path):
    model = load_weights(_write(tmp_path, _doc()))
    copy = load_weights(save_weights(model, tmp_path / "out" / "copy.json"))
    assert model_to_dict(copy) == model_to_dict(model)
