# Layer: core — feed-forward local surrogate engine (numpy only).

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .exceptions import NumericError, ValidationError
from .models import PredictionRecord


class Nonlinearity(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"
    SOFTMAX = "softmax"


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-subtraction)."""
    shifted = logits - np.max(logits)
    exp = np.exp(shifted)
    return exp / exp.sum()


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # out x in
    bias: np.ndarray  # out
    nonlinearity: Nonlinearity

    @property
    def in_dim(self) -> int:
        return int(self.weights.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weights.shape[0])

    def apply(self, x: np.ndarray, index: int) -> np.ndarray:
        z = self.weights @ x + self.bias
        if not np.all(np.isfinite(z)):
            raise NumericError(index, "non-finite pre-activation (overflow)")
        if self.nonlinearity is Nonlinearity.RELU:
            return np.maximum(z, 0.0)
        if self.nonlinearity is Nonlinearity.SOFTMAX:
            return softmax(z)
        return z


def make_layer(weights, bias, nonlinearity: "Nonlinearity | str") -> Layer:
    """Build a read-only float64 layer, checking its own shapes."""
    w = np.array(weights, dtype=np.float64)
    b = np.array(bias, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] == 0 or w.shape[1] == 0:
        raise ValidationError(f"weights must be a non-empty out x in matrix, got shape {w.shape}")
    if b.shape != (w.shape[0],):
        raise ValidationError(
            f"bias length {b.size} does not match weight rows {w.shape[0]}"
        )
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
        raise ValidationError("weights and biases must be finite")
    try:
        kind = Nonlinearity(str(nonlinearity).lower())
    except ValueError:
        raise ValidationError(f"unknown nonlinearity {nonlinearity!r}") from None
    w.setflags(write=False)
    b.setflags(write=False)
    return Layer(w, b, kind)


@dataclass(frozen=True)
class LocalModel:
    """Immutable MLP whose last layer is a softmax over ``num_classes``.

    The output of layer ``activation_tap`` (after its nonlinearity) is
    exported as the activation vector used by MDSA.
    """

    layers: tuple[Layer, ...]
    activation_tap: int
    input_dim: int
    num_classes: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValidationError("model needs at least one layer")
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.layers[0].in_dim != self.input_dim:
            raise ValidationError(
                f"layer 0 input dim {self.layers[0].in_dim} does not match "
                f"input_dim {self.input_dim}"
            )
        for i in range(len(self.layers) - 1):
            out_dim, in_dim = self.layers[i].out_dim, self.layers[i + 1].in_dim
            if out_dim != in_dim:
                raise ValidationError(
                    f"layer {i} output dim {out_dim} does not match "
                    f"layer {i + 1} input dim {in_dim}"
                )
        final = self.layers[-1]
        if final.nonlinearity is not Nonlinearity.SOFTMAX:
            raise ValidationError("final layer nonlinearity must be softmax")
        if final.out_dim != self.num_classes:
            raise ValidationError(
                f"final layer output dim {final.out_dim} does not match "
                f"num_classes {self.num_classes}"
            )
        if not 0 <= self.activation_tap < len(self.layers) - 1:
            raise ValidationError(
                f"activation_tap {self.activation_tap} must precede the final "
                f"softmax layer {len(self.layers) - 1}"
            )
        for i, layer in enumerate(self.layers[:-1]):
            if layer.nonlinearity is Nonlinearity.SOFTMAX:
                raise ValidationError(f"layer {i}: softmax is only allowed last")

    @property
    def activation_dim(self) -> int:
        return self.layers[self.activation_tap].out_dim


def predict_local(
    model: LocalModel, features: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Forward pass; returns ``(probabilities, tap activation)``.

    Raises:
        ValidationError: wrong input dimension or non-finite features.
        NumericError: a layer produced a non-finite value.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.input_dim:
        raise ValidationError(
            f"expected {model.input_dim} features, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise ValidationError("features contain non-finite entries")

    activation = None
    for index, layer in enumerate(model.layers):
        x = layer.apply(x, index)
        if not np.all(np.isfinite(x)):
            raise NumericError(index)
        if index == model.activation_tap:
            activation = x.copy()
    return x, activation


def annotate_record(
    model: LocalModel,
    record_id: str,
    features: Sequence[float],
    true_label: Optional[int] = None,
    remote_label: Optional[int] = None,
    remote_cost_units: Optional[float] = None,
) -> PredictionRecord:
    """Run the local model on *features* and wrap the outputs as a trace record."""
    probs, activation = predict_local(model, features)
    return PredictionRecord(
        id=record_id,
        local_probs=tuple(probs),
        activation=tuple(activation),
        true_label=true_label,
        remote_label=remote_label,
        remote_cost_units=remote_cost_units,
        features=tuple(float(v) for v in features),
    )
