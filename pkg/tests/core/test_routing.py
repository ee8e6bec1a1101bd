"""Tests for core/routing.py — decide, calibrate_threshold, adapt."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cheapet.core.exceptions import ConfigurationError, ValidationError
from cheapet.core.models import Route, RoutingDecision, RoutingPolicy, SupervisorKind
from cheapet.core.routing import (
    adapt,
    calibrate_threshold,
    decide,
    forward_fraction,
    initial_adaptation,
    partition_thresholds,
    score_scale,
)
from cheapet.core.services import AdaptiveRouter


def _policy(threshold, target=None, adaptation=None, kind=SupervisorKind.SM):
    return RoutingPolicy(kind, threshold, target, adaptation)


# ---------------------------------------------------------------------------
# decide


def test_decide_above_threshold_is_local():
    d = decide(0.9, _policy(0.8))
    assert d.trusted and d.route is Route.LOCAL
    assert d.threshold_used == 0.8


def test_decide_boundary_is_inclusive():
    d = decide(0.8, _policy(0.8))
    assert d.trusted and d.route is Route.LOCAL


def test_decide_mdsa_scores():
    d = decide(-3.0, _policy(-2.5, kind=SupervisorKind.MDSA))
    assert not d.trusted and d.route is Route.REMOTE


def test_decide_rejects_non_finite():
    with pytest.raises(ValidationError):
        decide(float("nan"), _policy(0.5))
    with pytest.raises(ValidationError):
        decide(float("-inf"), _policy(0.5))


def test_decide_monotone_in_threshold():
    thresholds = np.linspace(-1.0, 1.0, 41)
    for s in (-0.7, 0.0, 0.33, 0.9):
        routes = [decide(s, _policy(float(t))).route for t in thresholds]
        first_remote = routes.index(Route.REMOTE) if Route.REMOTE in routes else len(routes)
        assert all(r is Route.REMOTE for r in routes[first_remote:])


def test_decide_invariant_under_increasing_transform():
    rng = np.random.default_rng(1)
    scores = rng.uniform(-2.0, 2.0, size=200)
    threshold = 0.3
    plain = [decide(float(s), _policy(threshold)).route for s in scores]
    warped = [decide(math.exp(s), _policy(math.exp(threshold))).route for s in scores]
    assert plain == warped


def test_inconsistent_decision_rejected():
    with pytest.raises(ValidationError):
        RoutingDecision(trusted=True, trust_score=0.1, threshold_used=0.5, route=Route.LOCAL)


# ---------------------------------------------------------------------------
# calibrate_threshold


def test_calibrate_forwards_lowest_half():
    scores = [0.1, 0.2, 0.3, 0.4]
    result = calibrate_threshold(scores, 0.5)
    forwarded = [s for s in scores if decide(s, _policy(result.threshold)).route is Route.REMOTE]
    assert forwarded == [0.1, 0.2]
    assert result.achieved_forward_fraction == 0.5
    assert result.n_forwarded == 2 and result.n == 4


def test_calibrate_target_zero_forwards_nothing():
    scores = [0.4, -1.0, 3.5, 0.0]
    result = calibrate_threshold(scores, 0.0)
    assert result.threshold < min(scores)
    assert forward_fraction(scores, result.threshold) == 0.0


def test_calibrate_target_one_forwards_everything():
    scores = [0.4, -1.0, 3.5, 0.0]
    result = calibrate_threshold(scores, 1.0)
    assert result.threshold > max(scores)
    assert forward_fraction(scores, result.threshold) == 1.0
    assert result.achieved_forward_fraction == 1.0


def test_calibrate_representation_error_does_not_overshoot():
    # 0.3 * 10 == 3.0000000000000004 in binary floating point.
    result = calibrate_threshold([float(i) for i in range(10)], 0.3)
    assert result.n_forwarded == 3


@settings(max_examples=150, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        min_size=1,
        max_size=60,
        unique=True,
    ),
    st.sampled_from([i / 10 for i in range(11)]),
)
def test_calibrate_distinct_scores_within_one_over_n(scores, target):
    result = calibrate_threshold(scores, target)
    n = len(scores)
    assert abs(result.achieved_forward_fraction - target) <= 1.0 / n + 1e-12
    assert forward_fraction(scores, result.threshold) == result.achieved_forward_fraction


def test_calibrate_ties_never_overspend():
    scores = [0.5] * 4 + [0.7] * 4
    low = calibrate_threshold(scores, 0.25)
    assert low.achieved_forward_fraction == 0.0
    assert forward_fraction(scores, low.threshold) == 0.0

    half = calibrate_threshold(scores, 0.5)
    assert half.achieved_forward_fraction == 0.5
    assert forward_fraction(scores, half.threshold) == 0.5

    # Six forwarded records are unreachable; four is the largest count within budget.
    most = calibrate_threshold(scores, 0.75)
    assert most.achieved_forward_fraction == 0.5
    assert most.target_forward_fraction == 0.75


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(min_value=0, max_value=5), min_size=1, max_size=40),
    st.sampled_from([i / 10 for i in range(11)]),
)
def test_calibrate_with_ties_reports_reachable_fraction(values, target):
    scores = [float(v) for v in values]
    n = len(scores)
    result = calibrate_threshold(scores, target)
    assert forward_fraction(scores, result.threshold) == result.achieved_forward_fraction
    assert result.n_forwarded <= math.ceil(target * n - 1e-9)
    reachable = [k for k, _ in partition_thresholds(np.sort(scores))]
    assert result.n_forwarded in reachable


def test_calibrate_rejects_bad_input():
    with pytest.raises(ValidationError):
        calibrate_threshold([], 0.5)
    with pytest.raises(ValidationError):
        calibrate_threshold([0.1, float("nan")], 0.5)
    with pytest.raises(ValidationError):
        calibrate_threshold([0.1, 0.2], 1.5)


def test_forward_fraction_is_non_decreasing_step_function():
    scores = [0.3, 0.1, 0.1, 0.9, 0.5]
    grid = np.linspace(-1.0, 2.0, 61)
    fractions = [forward_fraction(scores, float(t)) for t in grid]
    assert fractions[0] == 0.0 and fractions[-1] == 1.0
    assert all(a <= b for a, b in zip(fractions, fractions[1:]))


# ---------------------------------------------------------------------------
# adapt


def _decision(route: Route, score: float = 0.5, threshold: float = 0.5) -> RoutingDecision:
    if route is Route.LOCAL:
        return RoutingDecision(True, threshold + abs(score), threshold, Route.LOCAL)
    return RoutingDecision(False, threshold - abs(score) - 0.1, threshold, Route.REMOTE)


def test_adapt_full_weight_update():
    state = initial_adaptation(0.2, ema_alpha=1.0)
    policy = _policy(0.5, 0.2, state)
    new_state, _ = adapt(state, policy, _decision(Route.REMOTE))
    assert new_state.ema_forward_rate == 1.0
    assert new_state.decisions_seen == 1


def test_adapt_frozen_during_cold_start():
    state = initial_adaptation(0.2)
    policy = _policy(0.5, 0.2, state)
    for _ in range(50):
        state, policy = adapt(state, policy, _decision(Route.REMOTE))
    assert policy.threshold == 0.5
    state, policy = adapt(state, policy, _decision(Route.REMOTE))
    assert policy.threshold < 0.5


def test_adapt_constant_remote_lowers_threshold():
    state = initial_adaptation(0.2, cold_start_decisions=0)
    policy = _policy(0.5, 0.2, state)
    previous = policy.threshold
    for i in range(200):
        state, policy = adapt(state, policy, _decision(Route.REMOTE, score=0.01 * (i % 7)))
        assert policy.threshold < previous
        previous = policy.threshold


def test_adapt_constant_local_raises_threshold():
    state = initial_adaptation(0.5, cold_start_decisions=0)
    policy = _policy(0.5, 0.5, state)
    for _ in range(20):
        state, policy = adapt(state, policy, _decision(Route.LOCAL))
    assert policy.threshold > 0.5


def test_adapt_equilibrium_drift_is_bounded():
    alpha, gain = 0.02, 0.5
    state = initial_adaptation(0.5, ema_alpha=alpha, step_gain=gain, cold_start_decisions=0)
    policy = _policy(0.5, 0.5, state)
    rng = np.random.default_rng(4)
    for i in range(400):
        route = Route.REMOTE if i % 2 == 0 else Route.LOCAL
        before = policy.threshold
        state, policy = adapt(state, policy, _decision(route, score=float(rng.uniform(0, 1))))
        bound = gain * alpha * score_scale(state.recent_scores)
        assert abs(policy.threshold - before) <= bound + 1e-15


def test_adapt_keeps_ema_in_unit_interval_and_window_bounded():
    state = initial_adaptation(0.5, cold_start_decisions=0, score_window=16)
    policy = _policy(0.5, 0.5, state)
    for i in range(100):
        state, policy = adapt(state, policy, _decision(Route.REMOTE if i % 3 else Route.LOCAL))
        assert 0.0 <= state.ema_forward_rate <= 1.0
    assert len(state.recent_scores) == 16
    assert policy.adaptation == state


def test_adapt_needs_target():
    state = initial_adaptation(0.5)
    with pytest.raises(ConfigurationError):
        adapt(state, _policy(0.5), _decision(Route.LOCAL))


def test_score_scale_falls_back_to_one():
    assert score_scale([]) == 1.0
    assert score_scale([0.3]) == 1.0
    assert score_scale([0.3, 0.3, 0.3]) == 1.0
    assert score_scale([0.0, 1.0, 2.0, 3.0, 4.0]) == pytest.approx(2.0)


@pytest.mark.parametrize("target", [0.2, 0.5, 0.8])
def test_adaptation_converges_on_stationary_stream(target):
    rng = np.random.default_rng(42)
    policy = _policy(0.5, target, initial_adaptation(target))
    router = AdaptiveRouter(policy, adaptation_enabled=True)
    routes = [router.route(float(s)).route for s in rng.uniform(0.0, 1.0, size=1000)]
    forwarded = [r is Route.REMOTE for r in routes]
    assert abs(np.mean(forwarded) - target) <= 0.05
    assert router.snapshot().adaptation.decisions_seen == 1000
