import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parboruta.data import (
    COLLINEAR_COMBINATIONS,
    INFORMATIVE_FEATURES,
    DataError,
    DataMatrix,
    SyntheticSpec,
    TaskKind,
    generate_synthetic,
    kfold_split,
    load_csv,
    select_columns,
    write_csv,
)

MADELON = Path(__file__).parent / "data" / "madelon_train.csv"


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_structure(tmp_path):
    path = _write(tmp_path, "a,b,c,y\n1,2,3,0.5\n4,5,6,1.5\n7,8,9,2.5\n")
    data = load_csv(path, "y", TaskKind.regression())
    assert data.shape == (3, 3)
    assert data.feature_names == ("a", "b", "c")
    np.testing.assert_array_equal(data.values[:, 1], [2, 5, 8])
    np.testing.assert_array_equal(data.target, [0.5, 1.5, 2.5])


def test_load_csv_target_by_index_keeps_feature_order(tmp_path):
    path = _write(tmp_path, "y,a,b\n1,2,3\n0,5,6\n")
    data = load_csv(path, 0, TaskKind.classification(2))
    assert data.feature_names == ("a", "b")
    np.testing.assert_array_equal(data.target, [1, 0])


def test_load_csv_maps_labels_to_contiguous_range(tmp_path):
    path = _write(tmp_path, "a,label\n0.1,-1\n0.2,1\n0.3,-1\n")
    data = load_csv(path, "label", TaskKind.classification(2))
    np.testing.assert_array_equal(data.target, [0, 1, 0])


def test_load_csv_na_cell_names_row_and_column(tmp_path):
    path = _write(tmp_path, "a,b,y\n1,2,3\n4,NA,6\n")
    with pytest.raises(DataError, match=r"'NA' at row 2, column 'b'"):
        load_csv(path, "y", TaskKind.regression())


@pytest.mark.parametrize(
    "text, target, message",
    [
        ("a,y\n", "y", "no data rows"),
        ("", "y", "empty file"),
        ("a,b\n1,2\n", "y", "not in header"),
        ("a,y\n1,2,3\n", "y", "fields"),
        ("a,y\n1,inf\n", "y", "non-finite"),
    ],
)
def test_load_csv_errors(tmp_path, text, target, message):
    with pytest.raises(DataError, match=message):
        load_csv(_write(tmp_path, text), target, TaskKind.regression())


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "nope.csv", "y", TaskKind.regression())


def test_csv_round_trip_is_exact(tmp_path):
    data = generate_synthetic(SyntheticSpec(25, seed=3))
    path = tmp_path / "s.csv"
    write_csv(data, path)
    back = load_csv(path, "y", TaskKind.regression())
    assert back.equals(data)


@pytest.mark.skipif(not MADELON.exists(), reason="MADELON files are not shipped")
def test_madelon_dimensions():
    data = load_csv(MADELON, -1, TaskKind.classification(2))
    assert data.shape == (2000, 500)


def test_datamatrix_invariants():
    with pytest.raises(DataError):
        DataMatrix(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(DataError, match="non-finite"):
        DataMatrix(np.array([[1.0, np.nan]]), np.zeros(1))
    with pytest.raises(DataError, match="labels"):
        DataMatrix(np.zeros((2, 1)), [0, 2], task=TaskKind.classification(2))
    with pytest.raises(ValueError):
        TaskKind.classification(1)


def test_datamatrix_is_read_only():
    data = DataMatrix(np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        data.values[0, 0] = 1.0


def test_synthetic_direct_shape_and_names():
    data = generate_synthetic(SyntheticSpec(10000, seed=1))
    assert data.shape == (10000, 50)
    assert data.feature_names[0] == "feature-1"
    assert data.feature_names[-1] == "feature-50"
    # uniform columns centre on 0.5
    assert np.all(np.abs(data.values.mean(axis=0) - 0.5) < 0.02)
    assert data.values.min() >= 0.0 and data.values.max() < 1.0


def test_synthetic_target_uses_exactly_the_informative_columns():
    data = generate_synthetic(SyntheticSpec(10000, seed=1))
    X, y = data.values, data.target
    informative = {i - 1 for i in INFORMATIVE_FEATURES}
    assert len(informative) == 10
    # changing a noise column never moves the noise-free target
    from parboruta.data import synthetic_target

    base = synthetic_target(X)
    for j in range(50):
        Z = X.copy()
        Z[:, j] = np.random.default_rng(j).random(X.shape[0])
        moved = not np.allclose(synthetic_target(Z), base)
        assert moved == (j in informative), j
    # and the stated noise is tiny
    assert np.std(y - base) < 1e-4


def test_synthetic_target_hand_value():
    from parboruta.data import synthetic_target

    X = np.full((1, 50), 0.5)
    expected = (5 * 0.125 + 4 * 0.25 + 5 * 0.25 + 1.0 - 1.25 + 3.5 * 0.5 ** (1 / 3)
                + math.exp(0.5) + 2 * math.sin(1.57) + 5 * math.cos(1.57))
    assert synthetic_target(X)[0] == pytest.approx(expected, rel=1e-12)


def test_synthetic_is_bitwise_reproducible():
    a = generate_synthetic(SyntheticSpec(100, seed=42))
    b = generate_synthetic(SyntheticSpec(100, seed=42))
    assert a.values.tobytes() == b.values.tobytes()
    assert a.target.tobytes() == b.target.tobytes()
    c = generate_synthetic(SyntheticSpec(100, seed=43))
    assert not np.array_equal(a.values, c.values)


def test_biased_variant_overwrites_exact_count():
    spec = SyntheticSpec(10000, seed=5, variant="biased")
    data = generate_synthetic(spec)
    col = data.values[:, 19]
    assert np.sum(col == -1.0) == math.floor(0.99 * 10000)
    direct = generate_synthetic(SyntheticSpec(10000, seed=5))
    np.testing.assert_array_equal(np.delete(data.values, 19, axis=1),
                                  np.delete(direct.values, 19, axis=1))
    np.testing.assert_array_equal(data.target, direct.target)


def _collinear_corr_oracle(weights, sigma):
    # corr(L + e, L) = sd(L) / sd(L + e) with Var(U(0,1)) = 1/12
    var_l = sum(w * w for w in weights) / 12.0
    return math.sqrt(var_l / (var_l + sigma**2))


def test_multicollinear_x13_correlation():
    data = generate_synthetic(SyntheticSpec(10000, seed=2, variant="multicollinear"))
    X = data.values
    combo = 0.1 * X[:, 13] + 0.2 * X[:, 39] + 0.3 * X[:, 6] + 0.4 * X[:, 41]
    r = np.corrcoef(X[:, 12], combo)[0, 1]
    expected = _collinear_corr_oracle((0.1, 0.2, 0.3, 0.4), 0.01)
    assert expected == pytest.approx(0.998, abs=1e-3)
    assert r > 0.95
    assert r == pytest.approx(expected, abs=2e-3)


def test_multicollinear_leaves_other_columns_untouched():
    spec = SyntheticSpec(500, seed=9, variant="multicollinear")
    data = generate_synthetic(spec)
    direct = generate_synthetic(SyntheticSpec(500, seed=9))
    changed = sorted(COLLINEAR_COMBINATIONS)
    assert changed == [4, 5, 9, 13, 38]
    keep = [j for j in range(50) if j + 1 not in changed]
    np.testing.assert_array_equal(data.values[:, keep], direct.values[:, keep])
    np.testing.assert_array_equal(data.target, direct.target)
    for col, (sources, weights) in COLLINEAR_COMBINATIONS.items():
        mix = sum(w * direct.values[:, s - 1] for s, w in zip(sources, weights))
        resid = data.values[:, col - 1] - mix
        assert abs(resid.std() - 0.01) < 0.002


@pytest.mark.parametrize("kwargs", [
    {"n_samples": 0}, {"n_samples": 5, "variant": "other"}, {"n_samples": 5, "noise_sigma1": -1},
    {"n_samples": 5, "bias_fraction": 1.5}, {"n_samples": 5, "seed": -1},
])
def test_synthetic_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SyntheticSpec(**kwargs)


def test_kfold_sizes():
    folds = kfold_split(10, 5, seed=0)
    assert [len(t) for _, t in folds] == [2] * 5
    folds = kfold_split(11, 5, seed=0)
    assert sorted(len(t) for _, t in folds) == [2, 2, 2, 2, 3]


def test_kfold_deterministic_and_seed_dependent():
    a = kfold_split(50, 5, seed=1)
    b = kfold_split(50, 5, seed=1)
    c = kfold_split(50, 5, seed=2)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    assert not all(np.array_equal(x[1], y[1]) for x, y in zip(a, c))


@pytest.mark.parametrize("k", [1, 0, 12])
def test_kfold_range(k):
    with pytest.raises(ValueError):
        kfold_split(11, k)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 200), data=st.data())
def test_kfold_partition_property(n, data):
    k = data.draw(st.integers(2, n))
    seed = data.draw(st.integers(0, 2**32))
    folds = kfold_split(n, k, seed)
    tests = np.concatenate([t for _, t in folds])
    assert np.array_equal(np.sort(tests), np.arange(n))
    sizes = [len(t) for _, t in folds]
    assert max(sizes) - min(sizes) <= 1
    for train, test in folds:
        assert np.intersect1d(train, test).size == 0
        assert len(train) + len(test) == n


def test_select_columns():
    data = DataMatrix(np.arange(12.0).reshape(4, 3), np.arange(4.0), ("a", "b", "c"))
    assert select_columns(data, [0, 1, 2]).equals(data)
    sub = select_columns(data, [2, 0])
    assert sub.feature_names == ("c", "a")
    np.testing.assert_array_equal(sub.values, data.values[:, [2, 0]])
    np.testing.assert_array_equal(sub.target, data.target)
    mask = select_columns(data, np.array([False, True, False]))
    assert mask.feature_names == ("b",)
    with pytest.raises(ValueError):
        select_columns(data, [])
    with pytest.raises(IndexError):
        select_columns(data, [3])
