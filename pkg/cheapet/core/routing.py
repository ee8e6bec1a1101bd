# Layer: core — trust-score routing, threshold calibration, online adaptation.
#
# Boundary rule: a score equal to the threshold is trusted (>=). Calibration
# and the evaluation sweep both rely on it.

from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .exceptions import ConfigurationError, ValidationError
from .models import (
    AdaptationState,
    CalibrationResult,
    Route,
    RoutingDecision,
    RoutingPolicy,
)

_log = logging.getLogger(__name__)

# ceil(target * N) must not jump a whole record because of representation
# error, e.g. 0.3 * 10 == 3.0000000000000004.
_CEIL_SLACK = 1e-9


def decide(score: float, policy: RoutingPolicy) -> RoutingDecision:
    """Route LOCAL when ``score >= policy.threshold``, REMOTE otherwise."""
    if not math.isfinite(score):
        raise ValidationError(f"trust score must be finite, got {score!r}")
    trusted = score >= policy.threshold
    return RoutingDecision(
        trusted=trusted,
        trust_score=float(score),
        threshold_used=policy.threshold,
        route=Route.LOCAL if trusted else Route.REMOTE,
    )


def _validated_scores(scores: Sequence[float]) -> np.ndarray:
    values = np.asarray(scores, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValidationError("calibration needs a non-empty list of scores")
    if np.any(np.isnan(values)):
        raise ValidationError("calibration scores contain NaN")
    if not np.all(np.isfinite(values)):
        raise ValidationError("calibration scores must be finite")
    return values


def partition_thresholds(sorted_scores: np.ndarray) -> list[tuple[int, float]]:
    """Every distinct routing partition of an ascending score array.

    Returns ``(n_forwarded, threshold)`` pairs ordered by ``n_forwarded``.
    Forwarding the k lowest scores needs a threshold strictly above them and
    at most the next score, so only group boundaries between distinct values
    are reachable when scores tie.
    """
    n = sorted_scores.size
    pairs = [(0, float(sorted_scores[0]) - 1.0)]
    for k in range(1, n):
        if sorted_scores[k] != sorted_scores[k - 1]:
            pairs.append((k, float(sorted_scores[k])))
    pairs.append((n, float(np.nextafter(sorted_scores[-1], np.inf))))
    return pairs


def calibrate_threshold(
    scores: Sequence[float], target_forward_fraction: float
) -> CalibrationResult:
    """Pick the threshold that forwards *target_forward_fraction* of *scores*.

    With distinct scores, ``ceil(target * N)`` of the lowest scores are
    forwarded, so ``|achieved - target| <= 1/N``. When ties make that count
    unreachable, the largest reachable count not exceeding ``target * N`` is
    used instead; the achieved fraction is reported either way.

    Raises:
        ValidationError: empty scores, NaN/infinite scores, target outside [0, 1].
    """
    values = _validated_scores(scores)
    target = float(target_forward_fraction)
    if not 0.0 <= target <= 1.0:
        raise ValidationError(f"target forward fraction must lie in [0, 1], got {target}")

    sorted_scores = np.sort(values, kind="stable")
    n = sorted_scores.size
    desired = min(n, max(0, math.ceil(target * n - _CEIL_SLACK)))
    reachable = dict(partition_thresholds(sorted_scores))

    if desired in reachable:
        k = desired
    else:
        budget = target * n
        k = max(count for count in reachable if count <= budget + _CEIL_SLACK)
        _log.info(
            "Tied scores: %d forwarded requested, %d reachable within target %.4f",
            desired, k, target,
        )

    result = CalibrationResult(
        threshold=reachable[k],
        target_forward_fraction=target,
        achieved_forward_fraction=k / n,
        n_forwarded=k,
        n=n,
    )
    _log.info(
        "Calibrated threshold %.6g: target %.4f, achieved %.4f over %d scores",
        result.threshold, target, result.achieved_forward_fraction, n,
    )
    return result


def forward_fraction(scores: Sequence[float], threshold: float) -> float:
    """Share of *scores* that would be routed REMOTE at *threshold*."""
    values = np.asarray(scores, dtype=np.float64)
    return float(np.count_nonzero(values < threshold)) / values.size


def initial_adaptation(
    target_forward_fraction: float,
    ema_alpha: float = 0.02,
    step_gain: float = 0.5,
    cold_start_decisions: int = 50,
    score_window: int = 512,
) -> AdaptationState:
    """Fresh controller state whose EMA starts at the target."""
    return AdaptationState(
        ema_forward_rate=float(target_forward_fraction),
        ema_alpha=ema_alpha,
        step_gain=step_gain,
        cold_start_decisions=cold_start_decisions,
        score_window=score_window,
    )


def score_scale(recent_scores: Sequence[float]) -> float:
    """Interquartile range of recent scores; 1.0 until it becomes positive."""
    if len(recent_scores) < 2:
        return 1.0
    q1, q3 = np.percentile(np.asarray(recent_scores, dtype=np.float64), [25, 75])
    iqr = float(q3 - q1)
    return iqr if iqr > 0.0 else 1.0


def adapt(
    state: AdaptationState,
    policy: RoutingPolicy,
    decision: RoutingDecision,
) -> tuple[AdaptationState, RoutingPolicy]:
    """One controller step; returns the new state and policy.

    The EMA tracks the forwarding rate. Once past the cold start, the
    threshold moves against the error: forwarding too much lowers it,
    forwarding too little raises it, in steps scaled by the score IQR.

    Raises:
        ConfigurationError: the policy has no target forward fraction.
    """
    target: Optional[float] = policy.target_forward_fraction
    if target is None:
        raise ConfigurationError("adaptation needs a target forward fraction")

    alpha = state.ema_alpha
    forwarded = 1.0 if decision.route is Route.REMOTE else 0.0
    ema = (1.0 - alpha) * state.ema_forward_rate + alpha * forwarded
    ema = min(1.0, max(0.0, ema))

    window = (state.recent_scores + (decision.trust_score,))[-state.score_window :]
    seen = state.decisions_seen + 1

    threshold = policy.threshold
    if seen > state.cold_start_decisions:
        step = state.step_gain * (ema - target) * score_scale(window)
        threshold = threshold - step

    new_state = replace(
        state, ema_forward_rate=ema, decisions_seen=seen, recent_scores=window
    )
    return new_state, replace(policy, threshold=threshold, adaptation=new_state)
