import itertools

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from nclf.evaluation import (
    FoldPlan,
    GridPoint,
    UndefinedMetricError,
    auc,
    cross_validate,
    kfold_evaluate,
    l1_error,
    l2_error,
    std_error,
)
from nclf.models import UsageError, logistic
from nclf.synthetic import generator_model, sample_events
from nclf.training import TrainConfig


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_auc_examples():
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.3] * 5, [1, 0, 1, 0, 0]) == 0.5
    assert auc([0.8, 0.6, 0.4], [1, 0, 1]) == 0.5


def test_auc_single_class_is_undefined():
    with pytest.raises(UndefinedMetricError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), min_size=2, max_size=40))
def test_auc_matches_pairwise_count(rows):
    scores, labels = zip(*rows)
    if len(set(labels)) < 2:
        return
    assert auc(scores, labels) == pytest.approx(brute_auc(scores, labels), abs=1e-12)


def test_auc_invariant_under_monotone_transform():
    rng = np.random.default_rng(0)
    x = rng.normal(size=500)
    y = (rng.random(500) < logistic(x)).astype(int)
    assert auc(x, y) == auc(logistic(x), y) == auc(np.exp(x), y)


def test_l1_l2_examples():
    y = np.array([1.0, 0.0, 1.0])
    assert l1_error(y, y) == 0 and l2_error(y, y) == 0
    assert l1_error([0.5] * 3, y) == 0.5 and l2_error([0.5] * 3, y) == 0.5
    assert l1_error([0.9, 0.2], [1, 0]) == pytest.approx(0.15)
    assert l2_error([0.9, 0.2], [1, 0]) == pytest.approx(0.1581, abs=1e-4)
    with pytest.raises(UsageError):
        l1_error([], [])
    with pytest.raises(UsageError):
        l2_error([1.5], [1])


def test_std_error_examples():
    assert std_error([0.3, 0.3, 0.3]) == 0.0
    assert std_error([0.0, 1.0]) == pytest.approx(0.5)
    x = np.array([0.1, 0.5, 0.2, 0.9])
    assert std_error(3 * x) == pytest.approx(3 * std_error(x))
    with pytest.raises(UsageError):
        std_error([1.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(30, 300), st.integers(0, 1000))
def test_fold_plan_partitions(k, n, seed):
    plan = FoldPlan.make(n, k, seed)
    sizes = np.bincount(plan.assignment, minlength=k)
    assert sizes.sum() == n and sizes.max() - sizes.min() <= 1
    seen = []
    for f in range(k):
        train, test = plan.split(f)
        assert not set(train) & set(test)
        assert len(train) + len(test) == n
        seen.extend(test)
    assert sorted(seen) == list(range(n))


def test_fold_plan_errors():
    with pytest.raises(UsageError):
        FoldPlan.make(5, 6)
    with pytest.raises(UsageError):
        FoldPlan.make(5, 1)


@pytest.fixture(scope="module")
def synthetic():
    gen = generator_model("nclf", (15, 15, 15), seed=2, scale=0.6)
    data, _ = sample_events(gen, 6000, 0.4, seed=3)
    return data


FAST = TrainConfig(epochs=8)


def test_single_point_grid_is_plain_kfold(synthetic):
    point = GridPoint.of(1.0)
    res = cross_validate("nclf", synthetic, [point], FAST, outer_folds=3, seed=4)
    plain = kfold_evaluate("nclf", synthetic, point, FAST, FoldPlan.make(len(synthetic), 3, 4))
    assert res.chosen == point and not res.selection
    assert res.summary.to_dict() == plain.to_dict()


def test_duplicate_grid_points_select_the_same(synthetic):
    kw = dict(inner_folds=3, outer_folds=3, seed=5, inner_folds_used=1)
    a = cross_validate("cp", synthetic, [(0.1, 2), (100.0, 2)], FAST, **kw)
    b = cross_validate("cp", synthetic, [(0.1, 2), (0.1, 2), (100.0, 2), (0.1, 2)], FAST, **kw)
    assert a.chosen == b.chosen
    assert a.summary.auc == b.summary.auc


def test_nclf_beats_bias_only_on_nclf_data(synthetic):
    bias = cross_validate("bias", synthetic, [GridPoint.of(0.0)], FAST, outer_folds=3, seed=6)
    nclf = cross_validate("nclf", synthetic, [GridPoint.of(3.0)], FAST, outer_folds=3, seed=6)
    assert nclf.summary.auc > bias.summary.auc


def test_cross_validation_is_reproducible(synthetic):
    kw = dict(inner_folds=3, outer_folds=3, seed=7, inner_folds_used=2)
    a = cross_validate("cp", synthetic, [(1.0, 2), (10.0, 2)], FAST, **kw)
    b = cross_validate("cp", synthetic, [(1.0, 2), (10.0, 2)], FAST, **kw)
    assert a.chosen == b.chosen and a.selection == b.selection
    assert a.summary.to_dict() == b.summary.to_dict()


def test_parallel_folds_match_serial(synthetic):
    point = GridPoint.of(1.0, 2)
    plan = FoldPlan.make(len(synthetic), 3, 8)
    serial = kfold_evaluate("cp", synthetic, point, FAST, plan)
    parallel = kfold_evaluate("cp", synthetic, point, FAST, plan, jobs=2)
    assert serial.to_dict() == parallel.to_dict()


def test_summary_row_layout(synthetic):
    s = kfold_evaluate("bias", synthetic, GridPoint.of(0.0), FAST, FoldPlan.make(len(synthetic), 4, 0))
    row = s.row("Bias only")
    assert list(row) == ["method", "AUC", "dAUC", "L1", "dL1", "L2", "dL2"]
    assert 0 <= s.auc <= 1 and s.d_auc >= 0 and s.l1 >= 0 and s.l2 >= 0
    assert row["dAUC"] == round(s.d_auc * 1e4, 1)
