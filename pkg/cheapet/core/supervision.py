# Layer: core — supervisors that turn local outputs into trust scores.
#
# Trust scores are oriented so that higher always means more trustworthy:
# SM reports the max softmax probability, MDSA the negated Mahalanobis
# distance of the tap-layer activation to the training activations.

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Hashable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import linalg

from .exceptions import (
    ConfigurationError,
    InsufficientDataError,
    SingularityError,
    UnknownClassError,
    ValidationError,
)
from .models import (
    PredictionRecord,
    SupervisorKind,
    as_activation_vector,
    as_probability_vector,
    predicted_class,
)

_log = logging.getLogger(__name__)

GLOBAL_CLASS = "global"
DEFAULT_LAMBDA_SCALE = 1e-6
LAMBDA_FLOOR = 1e-12
SYMMETRY_TOLERANCE = 1e-9


def softmax_confidence(probs: Sequence[float]) -> float:
    """Max softmax probability of a validated probability vector."""
    return float(np.max(as_probability_vector(probs)))


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class ClassStatistics:
    """Mean and regularized covariance of one class's activations.

    ``covariance`` already includes the ``regularization`` term on its
    diagonal; ``cholesky`` is its lower factor and ``precision`` its inverse.
    """

    mean: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    cholesky: np.ndarray
    regularization: float

    @property
    def dimension(self) -> int:
        return int(self.mean.shape[0])


def _regularized_statistics(
    class_id: Hashable,
    mean: np.ndarray,
    covariance: np.ndarray,
    lambda_scale: float,
    lambda_floor: float = LAMBDA_FLOOR,
) -> ClassStatistics:
    d = covariance.shape[0]
    if lambda_scale < 0:
        raise ValidationError(f"lambda_scale must be non-negative, got {lambda_scale}")
    if lambda_scale == 0:
        lam = 0.0
    else:
        lam = max(lambda_scale * float(np.trace(covariance)) / d, lambda_floor)
    regularized = covariance + lam * np.eye(d)
    if not np.allclose(regularized, regularized.T, rtol=0.0, atol=SYMMETRY_TOLERANCE):
        raise ValidationError(f"class {class_id!r}: covariance is not symmetric")
    try:
        factor = linalg.cholesky(regularized, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularityError(
            f"class {class_id!r}: covariance is not positive definite after "
            f"regularization (lambda={lam!r})"
        ) from exc
    if not np.all(np.diag(factor) > 0):
        raise SingularityError(f"class {class_id!r}: non-positive Cholesky pivot")
    precision = linalg.cho_solve((factor, True), np.eye(d))
    precision = 0.5 * (precision + precision.T)
    return ClassStatistics(
        mean=_readonly(mean),
        covariance=_readonly(regularized),
        precision=_readonly(precision),
        cholesky=_readonly(factor),
        regularization=lam,
    )


@dataclass(frozen=True)
class MdsaModel:
    """Fitted activation statistics per class (or one global entry).

    Immutable after construction: the arrays are flagged read-only.
    """

    per_class: Mapping[Hashable, ClassStatistics]
    lambda_scale: float
    class_conditional: bool = True

    def __post_init__(self) -> None:
        if not self.per_class:
            raise ValidationError("an MDSA model needs at least one class")
        dims = {stats.dimension for stats in self.per_class.values()}
        if len(dims) != 1:
            raise ValidationError(f"class means have differing dimensions {sorted(dims)}")
        if not self.class_conditional and set(self.per_class) != {GLOBAL_CLASS}:
            raise ValidationError(
                f"a global MDSA model holds exactly one {GLOBAL_CLASS!r} entry"
            )
        object.__setattr__(self, "per_class", dict(self.per_class))

    @property
    def dimension(self) -> int:
        return next(iter(self.per_class.values())).dimension

    @property
    def classes(self) -> list[Hashable]:
        return list(self.per_class)

    def statistics_for(self, class_id: Hashable) -> ClassStatistics:
        if not self.class_conditional:
            return self.per_class[GLOBAL_CLASS]
        try:
            return self.per_class[class_id]
        except KeyError:
            raise UnknownClassError(
                f"class {class_id!r} not in MDSA model (known: {self.classes})"
            ) from None

    @classmethod
    def from_covariance(
        cls,
        means: Mapping[Hashable, Sequence[float]],
        covariances: Mapping[Hashable, Any],
        lambda_scale: float = 0.0,
        class_conditional: bool = True,
    ) -> "MdsaModel":
        """Build a model from known (unregularized) moments."""
        per_class = {}
        for class_id, mean in means.items():
            mean_arr = as_activation_vector(mean)
            cov = np.atleast_2d(np.asarray(covariances[class_id], dtype=np.float64))
            if cov.shape != (mean_arr.size, mean_arr.size):
                raise ValidationError(
                    f"class {class_id!r}: covariance shape {cov.shape} does not "
                    f"match mean dimension {mean_arr.size}"
                )
            per_class[class_id] = _regularized_statistics(
                class_id, mean_arr, cov, lambda_scale
            )
        return cls(per_class, lambda_scale, class_conditional)


def fit_mdsa(
    activations: Iterable[Sequence[float]],
    labels: Optional[Sequence[Hashable]] = None,
    class_conditional: bool = True,
    lambda_scale: float = DEFAULT_LAMBDA_SCALE,
) -> MdsaModel:
    """Fit per-class (or global) activation means and regularized precisions.

    Covariances use the n-1 denominator and are regularized as
    ``cov + lambda * I`` with ``lambda = lambda_scale * trace(cov) / d``
    (floored at ``LAMBDA_FLOOR`` unless ``lambda_scale`` is 0).

    Raises:
        ValidationError: ragged or non-finite activations, label mismatch.
        InsufficientDataError: a fitted class has fewer than d + 1 samples.
        SingularityError: Cholesky fails after regularization.
    """
    try:
        data = np.asarray(list(activations), dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"activations must share one dimension: {exc}") from exc
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
        raise ValidationError("activations must be a non-empty list of vectors")
    if not np.all(np.isfinite(data)):
        raise ValidationError("activations contain non-finite entries")
    n, d = data.shape

    if class_conditional:
        if labels is None or len(labels) != n:
            raise ValidationError("class-conditional fit needs one label per activation")
        label_arr = np.asarray(labels)
        groups = {
            (cid.item() if hasattr(cid, "item") else cid): data[label_arr == cid]
            for cid in np.unique(label_arr)
        }
    else:
        groups = {GLOBAL_CLASS: data}

    per_class = {}
    for class_id, rows in groups.items():
        if rows.shape[0] < d + 1:
            raise InsufficientDataError(class_id, rows.shape[0], d + 1)
        mean = rows.mean(axis=0)
        cov = np.atleast_2d(np.cov(rows, rowvar=False, ddof=1))
        per_class[class_id] = _regularized_statistics(class_id, mean, cov, lambda_scale)
        _log.debug(
            "MDSA class %r: n=%d, lambda=%g", class_id, rows.shape[0],
            per_class[class_id].regularization,
        )

    _log.info(
        "Fitted MDSA model on %d activations (d=%d, %d class(es), %s)",
        n, d, len(per_class), "class-conditional" if class_conditional else "global",
    )
    return MdsaModel(per_class, lambda_scale, class_conditional)


def mdsa_distance(
    model: MdsaModel, activation: Sequence[float], predicted: Hashable
) -> float:
    """Mahalanobis distance of *activation* to the statistics of *predicted*.

    Evaluated as ``||L^-1 (x - mu)||`` with the stored Cholesky factor, which
    equals ``sqrt((x - mu)^T P (x - mu))`` for the stored precision P.
    """
    x = as_activation_vector(activation)
    stats = model.statistics_for(predicted)
    if x.shape[0] != stats.dimension:
        raise ValidationError(
            f"activation dimension {x.shape[0]} does not match model dimension "
            f"{stats.dimension}"
        )
    diff = x - stats.mean
    if not np.any(diff):
        return 0.0
    z = linalg.solve_triangular(stats.cholesky, diff, lower=True)
    return float(math.sqrt(float(z @ z)))


def score(
    supervisor_kind: "SupervisorKind | str",
    local_probs: Optional[Sequence[float]],
    activation: Optional[Sequence[float]] = None,
    mdsa: Optional[MdsaModel] = None,
) -> float:
    """Trust score from raw local outputs; higher means more trustworthy."""
    kind = SupervisorKind.parse(supervisor_kind)
    if local_probs is None:
        raise ConfigurationError(f"{kind.value} supervisor needs local probabilities")
    if kind is SupervisorKind.SM:
        return softmax_confidence(local_probs)
    if activation is None:
        raise ConfigurationError("MDSA supervisor needs an activation vector")
    if mdsa is None:
        raise ConfigurationError("MDSA supervisor needs a fitted MDSA model")
    return -mdsa_distance(mdsa, activation, predicted_class(local_probs))


def trust_score(
    supervisor_kind: "SupervisorKind | str",
    record: PredictionRecord,
    mdsa: Optional[MdsaModel] = None,
) -> float:
    """Orientation-normalized trust score for one trace record."""
    return score(
        supervisor_kind,
        getattr(record, "local_probs", None),
        getattr(record, "activation", None),
        mdsa,
    )


def score_trace(
    records: Sequence[PredictionRecord],
    supervisor_kind: "SupervisorKind | str",
    mdsa: Optional[MdsaModel] = None,
) -> np.ndarray:
    """Trust scores for every record of a trace, in trace order."""
    return np.array(
        [trust_score(supervisor_kind, record, mdsa) for record in records],
        dtype=np.float64,
    )
