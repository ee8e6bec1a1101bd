# Layer: infrastructure — MDSA model files.
#
# JSON, floats written with repr precision so a save/load round trip is
# exact. Regularized covariances are stored and re-factored on load.

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Hashable, Union

import numpy as np

from ..core.exceptions import ValidationError
from ..core.supervision import GLOBAL_CLASS, ClassStatistics, MdsaModel

_log = logging.getLogger(__name__)

FORMAT_TAG = "cheapet-mdsa/1"


def _class_key(key: str) -> Hashable:
    if key == GLOBAL_CLASS:
        return key
    try:
        return int(key)
    except ValueError:
        return key


def mdsa_to_dict(model: MdsaModel) -> dict:
    return {
        "format": FORMAT_TAG,
        "class_conditional": model.class_conditional,
        "lambda_scale": model.lambda_scale,
        "classes": {
            str(class_id): {
                "mean": stats.mean.tolist(),
                "covariance": stats.covariance.tolist(),
                "precision": stats.precision.tolist(),
                "lambda": stats.regularization,
            }
            for class_id, stats in model.per_class.items()
        },
    }


def mdsa_from_dict(data: Any) -> MdsaModel:
    if not isinstance(data, dict) or data.get("format") != FORMAT_TAG:
        raise ValidationError(f"not a {FORMAT_TAG} model file")
    try:
        # Stored covariances are already regularized: refactor with lambda 0
        # and carry the recorded lambda over.
        base = MdsaModel.from_covariance(
            {_class_key(k): v["mean"] for k, v in data["classes"].items()},
            {_class_key(k): v["covariance"] for k, v in data["classes"].items()},
            lambda_scale=0.0,
            class_conditional=bool(data["class_conditional"]),
        )
        per_class = {}
        for key, entry in data["classes"].items():
            stats = base.per_class[_class_key(key)]
            precision = np.array(entry["precision"], dtype=np.float64)
            precision.setflags(write=False)
            per_class[_class_key(key)] = ClassStatistics(
                mean=stats.mean,
                covariance=stats.covariance,
                precision=precision,
                cholesky=stats.cholesky,
                regularization=float(entry["lambda"]),
            )
        return MdsaModel(per_class, float(data["lambda_scale"]), bool(data["class_conditional"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed MDSA model file: {exc}") from exc


def save_mdsa(model: MdsaModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(mdsa_to_dict(model)), encoding="utf-8")
    _log.info("Saved MDSA model (%d class(es)) to %s", len(model.per_class), path)
    return path


def load_mdsa(path: Union[str, Path]) -> MdsaModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    model = mdsa_from_dict(data)
    _log.info("Loaded MDSA model from %s (d=%d)", path, model.dimension)
    return model
