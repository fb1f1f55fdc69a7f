import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from parboruta.data import INFORMATIVE_FEATURES, DataError, DataMatrix, SyntheticSpec, TaskKind, generate_synthetic
from parboruta.evaluation import (
    BenchmarkRecord,
    benchmark,
    benchmark_csv,
    classification_metrics,
    cross_validate,
    regression_metrics,
)
from parboruta.forest import ForestParams


def test_regression_metrics_examples():
    m = regression_metrics([0, 1], [1, 0])
    assert (m.mse, m.mae, m.r2) == (1.0, 1.0, -3.0)
    y = np.array([1.0, 2.0, 4.0])
    assert regression_metrics(y, y) == regression_metrics(y, y.copy())
    perfect = regression_metrics(y, y)
    assert (perfect.mse, perfect.mae, perfect.r2) == (0.0, 0.0, 1.0)
    assert regression_metrics(y, np.full(3, y.mean())).r2 == pytest.approx(0.0, abs=1e-15)


def test_regression_metrics_constant_target():
    m = regression_metrics([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    assert math.isnan(m.r2)
    assert m.to_dict()["r2"] is None
    with pytest.raises(ValueError):
        regression_metrics([1.0], [1.0])
    with pytest.raises(ValueError):
        regression_metrics([1.0, 2.0], [1.0])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(2, 30), elements=st.floats(-100, 100)), st.data())
def test_regression_metric_properties(y, data):
    pred = data.draw(arrays(np.float64, y.shape, elements=st.floats(-100, 100)))
    m = regression_metrics(y, pred)
    assert m.mse >= 0 and m.mae >= 0
    assert m.mae**2 <= m.mse * (1 + 1e-12) + 1e-300
    if not math.isnan(m.r2):
        assert m.r2 <= 1.0
        if np.array_equal(y, pred):
            assert m.r2 == 1.0
        sst = np.sum((y - y.mean()) ** 2)
        if m.mse * y.size / sst > 1e-12:
            assert m.r2 < 1.0


def _confusion(tp, fp, fn, tn):
    y_true = [1] * tp + [0] * fp + [1] * fn + [0] * tn
    y_pred = [1] * tp + [1] * fp + [0] * fn + [0] * tn
    return y_true, y_pred


def test_classification_confusion_example():
    m = classification_metrics(*_confusion(9, 1, 2, 8))
    assert m.precision == pytest.approx(0.9)
    assert m.recall == pytest.approx(9 / 11)
    assert m.f1 == pytest.approx(2 * 0.9 * (9 / 11) / (0.9 + 9 / 11))
    assert m.accuracy == pytest.approx(17 / 20)
    assert not m.zero_division


def test_classification_perfect_and_zero_division():
    perfect = classification_metrics([0, 1, 1, 0], [0, 1, 1, 0])
    assert (perfect.accuracy, perfect.recall, perfect.precision, perfect.f1) == (1, 1, 1, 1)
    none = classification_metrics([1, 1, 0, 0], [0, 0, 0, 0])
    assert (none.recall, none.precision, none.f1) == (0.0, 0.0, 0.0)
    assert none.zero_division and none.accuracy == 0.5
    with pytest.raises(ValueError):
        classification_metrics([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50))
def test_classification_metric_properties(pairs):
    y_true, y_pred = map(np.array, zip(*pairs))
    m = classification_metrics(y_true, y_pred)
    assert m.accuracy == pytest.approx(np.mean(y_true == y_pred))
    for v in (m.accuracy, m.recall, m.precision, m.f1):
        assert 0.0 <= v <= 1.0
    if m.precision + m.recall:
        assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall))
    else:
        assert m.f1 == 0.0


def test_cross_validate_no_leakage_and_deterministic():
    x = np.arange(40.0)
    data = DataMatrix(x[:, None], 2 * x)
    params = ForestParams(num_trees=5)
    avg, folds, per_fold = cross_validate(data, None, params, k=2, seed=1, return_folds=True)
    assert len(per_fold) == 2
    for train, test in folds:
        assert np.intersect1d(train, test).size == 0
    assert math.isfinite(avg.mse) and math.isfinite(avg.r2)
    assert avg == cross_validate(data, None, params, k=2, seed=1)


def test_cross_validate_subset_by_name_and_errors():
    data = generate_synthetic(SyntheticSpec(300, seed=1))
    params = ForestParams(num_trees=10)
    by_name = cross_validate(data, ["feature-14", "feature-27"], params, k=3)
    by_index = cross_validate(data, [13, 26], params, k=3)
    assert by_name == by_index
    with pytest.raises(ValueError):
        cross_validate(data, [], params)
    with pytest.raises(ValueError):
        cross_validate(data, None, params, k=1)
    with pytest.raises(DataError, match="feature-99"):
        cross_validate(data, ["feature-99"], params)


def test_cross_validate_classification(rng):
    X = rng.random((120, 3))
    data = DataMatrix(X, (X[:, 0] > 0.5).astype(float), task=TaskKind.classification(2))
    m = cross_validate(data, None, ForestParams(num_trees=10), k=4)
    assert m.accuracy > 0.9


def test_informative_subset_matches_all_features():
    data = generate_synthetic(SyntheticSpec(2000, seed=0))
    params = ForestParams(num_trees=30)
    full = cross_validate(data, None, params, k=5)
    subset = cross_validate(data, [i - 1 for i in INFORMATIVE_FEATURES], params, k=5)
    assert full.r2 > 0.9 - 0.05 and subset.r2 >= full.r2 - 0.05


def test_benchmark_smoke():
    benchmark([(20, 2)], ForestParams(num_trees=2), repeats=1)  # JIT compilation happens once per process
    start = time.perf_counter()
    records = benchmark([(100, 5)], ForestParams(num_trees=10), method="permut", repeats=1)
    assert time.perf_counter() - start < 1.0
    (r,) = records
    assert (r.n, r.p, r.num_trees) == (100, 5, 10)
    assert r.fit_time >= 0 and r.importance_time >= 0
    assert r.total_time == pytest.approx(r.fit_time + r.importance_time)
    lines = benchmark_csv(records).splitlines()
    assert lines[0] == ",".join(BenchmarkRecord.CSV_COLUMNS) == "n,p,trees,avg_depth,fit_s,importance_s,total_s"
    assert len(lines) == 2
    with pytest.raises(ValueError):
        benchmark([(10, 2)], method="shap")
