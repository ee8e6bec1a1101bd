"""Tests for core/evaluation.py — system accuracy and the threshold sweep."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cheapet.core.evaluation import (
    curve_area,
    operating_point,
    summarize,
    sweep_curve,
    system_accuracy,
)
from cheapet.core.exceptions import ValidationError
from cheapet.core.models import CurvePoint, EvaluationReport, PredictionRecord, SupervisorKind
from cheapet.core.supervision import score_trace
from tests.trace_factory import make_record, outcome_record


def _random_trace(rng: np.random.Generator, n: int, distinct: bool = True):
    if distinct:
        scores = rng.permutation(np.linspace(0.5, 1.0, n + 2)[1:-1])
    else:
        scores = rng.choice([0.6, 0.7, 0.8], size=n)
    local = rng.random(n) < 0.6
    remote = rng.random(n) < 0.8
    costs = rng.uniform(0.1, 2.0, size=n)
    trace = [
        outcome_record(f"r{i}", float(scores[i]), bool(local[i]), bool(remote[i]), float(costs[i]))
        for i in range(n)
    ]
    return trace, score_trace(trace, "sm")


def _prefix_oracle(trace, scores, k):
    """Accuracy and cost saving when exactly the k lowest-scored records are forwarded."""
    order = sorted(range(len(trace)), key=lambda i: scores[i])
    forwarded = set(order[:k])
    correct = sum(
        (r.remote_label if i in forwarded else r.local_label) == r.true_label
        for i, r in enumerate(trace)
    )
    total_cost = sum(r.remote_cost_units for r in trace)
    spent = sum(trace[i].remote_cost_units for i in forwarded)
    return Fraction(correct, len(trace)), 1.0 - spent / total_cost


# ---------------------------------------------------------------------------
# system_accuracy


def test_toy_trace_routes_high_scores_locally():
    trace = [
        outcome_record("1", 0.9, local_correct=True, remote_correct=False),
        outcome_record("2", 0.8, local_correct=True, remote_correct=True),
        outcome_record("3", 0.7, local_correct=False, remote_correct=True),
        outcome_record("4", 0.6, local_correct=False, remote_correct=True),
    ]
    outcome = system_accuracy(trace, [0.9, 0.8, 0.3, 0.2], 0.5)
    assert outcome.accuracy == 1.0
    assert outcome.forward_fraction == 0.5
    assert outcome.cost_saving == 0.5
    assert (outcome.n_local, outcome.n_remote) == (2, 2)


def test_threshold_below_all_scores_is_local_only(example_trace):
    scores = score_trace(example_trace, "sm")
    outcome = system_accuracy(example_trace, scores, -10.0)
    assert outcome.accuracy == 0.5
    assert outcome.forward_fraction == 0.0
    assert outcome.cost_saving == 1.0


def test_threshold_above_all_scores_is_remote_only(example_trace):
    scores = score_trace(example_trace, "sm")
    outcome = system_accuracy(example_trace, scores, 10.0)
    assert outcome.accuracy == 0.75
    assert outcome.forward_fraction == 1.0
    assert outcome.cost_saving == 0.0


def test_missing_labels_name_the_record():
    record = PredictionRecord(id="no-truth", local_probs=(0.7, 0.3), activation=(0.0,))
    with pytest.raises(ValidationError, match="no-truth"):
        system_accuracy([record], [0.7], 0.5)
    unlabeled_remote = PredictionRecord(
        id="no-remote", local_probs=(0.7, 0.3), activation=(0.0,), true_label=0
    )
    with pytest.raises(ValidationError, match="no-remote"):
        system_accuracy([unlabeled_remote], [0.7], 0.5)


def test_missing_remote_counts_wrong_when_allowed():
    trace = [
        PredictionRecord(id="a", local_probs=(0.9, 0.1), activation=(0.0,), true_label=0),
        make_record("b", 0.6, true_label=1, remote_label=1),
    ]
    everything_remote = system_accuracy(trace, [0.9, 0.6], 1.0, allow_missing_remote=True)
    assert everything_remote.accuracy == 0.5
    nothing_remote = system_accuracy(trace, [0.9, 0.6], 0.0, allow_missing_remote=True)
    assert nothing_remote.accuracy == 0.5


def test_length_mismatch_rejected(example_trace):
    with pytest.raises(ValidationError):
        system_accuracy(example_trace, [0.5] * 3, 0.5)


def test_cost_weighted_saving():
    trace = [make_record("a", 0.9, cost=3.0), make_record("b", 0.6, cost=1.0)]
    outcome = system_accuracy(trace, [0.9, 0.6], 0.7, uniform_cost=False)
    assert outcome.forward_fraction == 0.5
    assert outcome.cost_saving == pytest.approx(0.75)


# ---------------------------------------------------------------------------
# sweep_curve


def test_example_trace_curve(example_trace):
    report = sweep_curve(example_trace, score_trace(example_trace, "sm"), trace_id="example")
    accuracies = [p.system_accuracy for p in report.curve]
    assert accuracies == [0.5, 0.625, 0.625, 0.625, 0.75, 0.875, 0.875, 0.75, 0.75]
    assert report.remote_parity_point.forward_fraction == 0.5
    assert report.best_point.forward_fraction == 0.625
    assert report.best_point.system_accuracy == 0.875


def test_distinct_scores_give_n_plus_one_points():
    rng = np.random.default_rng(0)
    trace, scores = _random_trace(rng, 25)
    report = sweep_curve(trace, scores)
    assert len(report.curve) == 26
    assert [p.n_remote for p in report.curve] == list(range(26))
    assert all(p.n_local + p.n_remote == 25 for p in report.curve)


def test_agreeing_models_give_constant_curve():
    trace = [outcome_record(str(i), 0.5 + i / 40, i % 3 == 0, i % 3 == 0) for i in range(12)]
    report = sweep_curve(trace, score_trace(trace, "sm"))
    assert len({p.system_accuracy for p in report.curve}) == 1


def test_complementary_trace_beats_both_endpoints():
    n = 10
    trace = [
        outcome_record(str(i), 0.5 + (i + 1) / 25, local_correct=i >= n // 2, remote_correct=i < n // 2)
        for i in range(n)
    ]
    report = sweep_curve(trace, score_trace(trace, "sm"))
    assert report.local_only_accuracy == 0.5
    assert report.remote_only_accuracy == 0.5
    best = report.best_point
    assert best.system_accuracy == 1.0
    assert 0.0 < best.forward_fraction < 1.0
    assert best.forward_fraction == 0.5


def test_endpoints_are_exact_on_random_traces():
    rng = np.random.default_rng(99)
    for _ in range(100):
        n = int(rng.integers(1, 201))
        trace, scores = _random_trace(rng, n, distinct=bool(rng.integers(0, 2)))
        report = sweep_curve(trace, scores)
        local = sum(r.local_label == r.true_label for r in trace) / n
        remote = sum(r.remote_label == r.true_label for r in trace) / n
        assert report.curve[0].system_accuracy == local
        assert report.curve[-1].system_accuracy == remote
        assert report.curve[0].forward_fraction == 0.0
        assert report.curve[-1].forward_fraction == 1.0


def test_curve_matches_prefix_enumeration():
    rng = np.random.default_rng(12)
    for n in range(1, 13):
        for _ in range(20):
            trace, scores = _random_trace(rng, n)
            for uniform in (True, False):
                report = sweep_curve(trace, scores, uniform_cost=uniform)
                assert len(report.curve) == n + 1
                for point in report.curve:
                    accuracy, weighted_saving = _prefix_oracle(trace, scores, point.n_remote)
                    assert point.system_accuracy == float(accuracy)
                    if uniform:
                        assert point.cost_saving == 1.0 - point.forward_fraction
                    else:
                        assert point.cost_saving == pytest.approx(weighted_saving, abs=1e-12)
                    # The point's own threshold reproduces the partition.
                    check = system_accuracy(trace, scores, point.threshold, uniform)
                    assert check.n_remote == point.n_remote
                    assert check.accuracy == point.system_accuracy


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=40), st.integers(min_value=0, max_value=2**31))
def test_curve_is_permutation_invariant(n, seed):
    rng = np.random.default_rng(seed)
    trace, scores = _random_trace(rng, n, distinct=bool(seed % 2))
    order = rng.permutation(n)
    shuffled = sweep_curve([trace[i] for i in order], scores[order])
    assert shuffled.curve == sweep_curve(trace, scores).curve


def test_curve_shape_properties():
    rng = np.random.default_rng(8)
    for uniform in (True, False):
        trace, scores = _random_trace(rng, 60, distinct=False)
        report = sweep_curve(trace, scores, uniform_cost=uniform)
        n = len(trace)
        fractions = [p.forward_fraction for p in report.curve]
        savings = [p.cost_saving for p in report.curve]
        assert fractions == sorted(fractions)
        assert all(a >= b for a, b in zip(savings, savings[1:]))
        for a, b in zip(report.curve, report.curve[1:]):
            assert 0.0 <= b.system_accuracy <= 1.0
            steps = b.n_remote - a.n_remote
            assert abs(b.system_accuracy - a.system_accuracy) <= steps / n + 1e-12
        if uniform:
            assert all(p.cost_saving + p.forward_fraction == 1.0 for p in report.curve)


def test_ties_collapse_partitions():
    trace = [make_record(str(i), p) for i, p in enumerate([0.6, 0.6, 0.8, 0.8, 0.8])]
    report = sweep_curve(trace, score_trace(trace, "sm"))
    assert [p.n_remote for p in report.curve] == [0, 2, 5]


# ---------------------------------------------------------------------------
# report helpers


def _point(ff, acc, n_remote, n=4):
    return CurvePoint(ff, acc, 1.0 - ff, 0.0, n - n_remote, n_remote)


def test_report_rejects_short_or_open_curves():
    with pytest.raises(ValidationError):
        EvaluationReport((), 0.5, 0.5, SupervisorKind.SM)
    with pytest.raises(ValidationError):
        EvaluationReport((_point(0.0, 0.5, 0),), 0.5, 0.5, SupervisorKind.SM)
    with pytest.raises(ValidationError):
        EvaluationReport(
            (_point(0.0, 0.5, 0), _point(0.5, 0.6, 2)), 0.5, 0.6, SupervisorKind.SM
        )


def test_operating_point_respects_budget(example_trace):
    report = sweep_curve(example_trace, score_trace(example_trace, "sm"))
    op = operating_point(report, 0.3)
    assert op.point.forward_fraction == 0.125
    assert op.accuracy_delta == pytest.approx(0.625 - 0.75)
    assert operating_point(report, 1.0).point.system_accuracy == 0.875


def test_curve_area_of_constant_curve():
    report = EvaluationReport(
        (_point(0.0, 0.8, 0), _point(0.5, 0.8, 2), _point(1.0, 0.8, 4)), 0.8, 0.8, SupervisorKind.SM
    )
    assert curve_area(report) == pytest.approx(0.8)


def test_summarize_lists_notable_points(example_trace):
    report = sweep_curve(example_trace, score_trace(example_trace, "sm"), trace_id="example")
    summary = summarize(report, [0.5])
    assert summary["trace_id"] == "example"
    assert summary["points"] == 9
    assert summary["best"]["forward_fraction"] == 0.625
    assert summary["remote_parity"]["forward_fraction"] == 0.5
    assert summary["operating_points"][0]["system_accuracy"] == 0.75
