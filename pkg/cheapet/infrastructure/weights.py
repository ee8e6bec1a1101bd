# Layer: infrastructure — JSON weight files for the local MLP.
#
# {"input_dim": int, "num_classes": int, "activation_tap": int,
#  "layers": [{"w": [[..], ..] (out x in), "b": [..], "nonlinearity": "relu"|"identity"|"softmax"}]}

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Union

from ..core.exceptions import ValidationError, WeightFileError
from ..core.local_model import LocalModel, make_layer

_log = logging.getLogger(__name__)


def model_from_dict(data: Any) -> LocalModel:
    """Validate a decoded weight document and build the model."""
    if not isinstance(data, dict):
        raise WeightFileError("weight file must contain a JSON object")
    for key in ("input_dim", "num_classes", "activation_tap", "layers"):
        if key not in data:
            raise WeightFileError(f"missing key {key!r}")
    if not isinstance(data["layers"], list) or not data["layers"]:
        raise WeightFileError("'layers' must be a non-empty list")

    layers = []
    for index, spec in enumerate(data["layers"]):
        try:
            layers.append(make_layer(spec["w"], spec["b"], spec["nonlinearity"]))
        except (KeyError, TypeError) as exc:
            raise WeightFileError(f"layer {index}: missing or malformed {exc}") from exc
        except ValueError as exc:
            # ValidationError included; ragged rows surface as ValueError from numpy.
            raise WeightFileError(f"layer {index}: {exc}") from exc

    try:
        return LocalModel(
            layers=tuple(layers),
            activation_tap=int(data["activation_tap"]),
            input_dim=int(data["input_dim"]),
            num_classes=int(data["num_classes"]),
        )
    except (ValidationError, TypeError, ValueError) as exc:
        raise WeightFileError(str(exc)) from exc


def model_to_dict(model: LocalModel) -> dict:
    return {
        "input_dim": model.input_dim,
        "num_classes": model.num_classes,
        "activation_tap": model.activation_tap,
        "layers": [
            {
                "w": layer.weights.tolist(),
                "b": layer.bias.tolist(),
                "nonlinearity": layer.nonlinearity.value,
            }
            for layer in model.layers
        ],
    }


def load_weights(path: Union[str, Path]) -> LocalModel:
    """Load and validate a weight file.

    Raises:
        WeightFileError: JSON syntax errors (with line/column) or a broken
            layer chain / tap rule.
        OSError: the file cannot be read.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WeightFileError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    model = model_from_dict(data)
    _log.info(
        "Loaded local model from %s: %d layers, input_dim=%d, classes=%d, tap=%d",
        path, len(model.layers), model.input_dim, model.num_classes, model.activation_tap,
    )
    return model


def save_weights(model: LocalModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model), indent=2), encoding="utf-8")
    return path
