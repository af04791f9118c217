import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wolcecoc.dataset import (Dataset, DatasetError, densify_labels, load_builtin, load_dataset,
                              normalize_split, normalize_unit_range, stratified_folds)


def write(tmp_path, text, name="d.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_labels_densified_in_sorted_order(tmp_path):
    ds = load_dataset(write(tmp_path, "1.0,2.0,7\n3.0,4.0,7\n5.0,6.0,9\n"))
    assert ds.class_count == 2
    assert ds.labels.tolist() == [1, 1, 2]
    assert ds.original_labels == ("7", "9")


def test_densify_is_input_order_independent():
    a, _ = densify_labels(["9", "7", "10"])
    assert a.tolist() == [2, 1, 3]  # numeric, not lexicographic, order


def test_whitespace_and_comments(tmp_path):
    ds = load_dataset(write(tmp_path, "# header\n\n1 2 a\n3 4 b\n"))
    assert ds.features.tolist() == [[1, 2], [3, 4]]


def test_label_column_first(tmp_path):
    ds = load_dataset(write(tmp_path, "2,1.5,0.5\n1,2.5,1.5\n"), label_column=0)
    assert ds.labels.tolist() == [2, 1]
    assert ds.features[0].tolist() == [1.5, 0.5]


def test_sparse_index_format(tmp_path):
    ds = load_dataset(write(tmp_path, "1 1:0.5 3:2\n2 2:1\n"), format="sparse-index")
    assert ds.features.tolist() == [[0.5, 0, 2], [0, 1, 0]]
    assert ds.labels.tolist() == [1, 2]


@pytest.mark.parametrize("text, where", [
    ("1,2,a\n3,x,b\n", "line 2, column 2"),
    ("1,2,a\n3,b\n", "line 2"),
    ("1,?,a\n3,4,b\n", "missing"),
])
def test_parse_errors_name_the_location(tmp_path, text, where):
    with pytest.raises(DatasetError, match=where):
        load_dataset(write(tmp_path, text))


def test_empty_file(tmp_path):
    with pytest.raises(DatasetError, match="no data"):
        load_dataset(write(tmp_path, "# nothing\n"))


def test_dataset_rejects_empty_class():
    with pytest.raises(DatasetError, match="no examples"):
        Dataset(np.zeros((3, 1)), [1, 1, 3], 3)


def test_builtin_shapes():
    iris = load_builtin("iris")
    assert (iris.n, iris.feature_count, iris.class_count) == (150, 4, 3)
    glass = load_builtin("glass")
    assert (glass.n, glass.feature_count) == (214, 9)
    assert glass.class_count == 6
    wine = load_builtin("wine")
    assert (wine.n, wine.feature_count, wine.class_count) == (178, 13, 3)


@pytest.mark.parametrize("col, want", [
    ([2, 4, 6], [0, 0.5, 1]),
    ([5, 5, 5], [0, 0, 0]),
    ([-1, 0, 3], [0, 0.25, 1]),
])
def test_unit_range(col, want):
    ds = Dataset(np.array(col, dtype=float)[:, None], [1, 2, 2], 2)
    assert np.allclose(normalize_unit_range(ds).features[:, 0], want)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), min_size=2, max_size=20))
def test_normalization_idempotent_and_in_range(rows):
    X = np.array(rows)
    ds = Dataset(X, [1] + [2] * (len(rows) - 1), 2)
    once = normalize_unit_range(ds)
    twice = normalize_unit_range(once)
    assert once.features.min() >= 0 and once.features.max() <= 1
    assert np.allclose(once.features, twice.features)


def test_fold_local_scaling_uses_training_range():
    Xtr = np.array([[0.0], [10.0]])
    Xte = np.array([[5.0], [20.0]])
    a, b = normalize_split(Xtr, Xte)
    assert a[:, 0].tolist() == [0, 1]
    assert b[:, 0].tolist() == [0.5, 2.0]


def fold_counts(ds, plan):
    return np.array([[np.sum((plan.assignments == f) & (ds.labels == c))
                      for c in range(1, ds.class_count + 1)] for f in range(plan.fold_count)])


def test_folds_two_balanced_classes():
    ds = Dataset(np.arange(10.0)[:, None], [1] * 5 + [2] * 5, 2)
    plan = stratified_folds(ds, 2, seed=1)
    counts = fold_counts(ds, plan)
    assert counts.sum(axis=1).tolist() == [5, 5]
    assert counts.max() <= 3


def test_folds_iris_divisible():
    ds = load_builtin("iris")
    counts = fold_counts(ds, stratified_folds(ds, 10, seed=3))
    assert (counts == 5).all()


def test_folds_seven_of_one_class():
    ds = Dataset(np.arange(9.0)[:, None], [1] * 7 + [2] * 2, 2)
    counts = fold_counts(ds, stratified_folds(ds, 3, seed=0))
    assert set(counts[:, 0]) <= {2, 3}


def test_folds_reproducible_and_seed_sensitive():
    ds = load_builtin("glass")
    a = stratified_folds(ds, 10, 5).assignments
    assert a.tobytes() == stratified_folds(ds, 10, 5).assignments.tobytes()
    assert not np.array_equal(a, stratified_folds(ds, 10, 6).assignments)


def test_too_many_folds():
    ds = Dataset(np.zeros((3, 1)), [1, 2, 2], 2)
    with pytest.raises(ValueError):
        stratified_folds(ds, 4)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=6, max_size=60), st.integers(2, 6),
       st.integers(0, 2**32))
def test_stratification_bound_property(raw, k, seed):
    labels, keys = densify_labels(raw)
    if len(raw) < k:
        return
    ds = Dataset(np.zeros((len(raw), 1)), labels, len(keys))
    plan = stratified_folds(ds, k, seed)
    counts = fold_counts(ds, plan)
    ideal = ds.class_counts() / k
    assert np.all(np.abs(counts - ideal[None, :]) <= 1)
    # folds partition the examples
    assert sorted(np.concatenate([plan.test_indices(f) for f in range(k)]).tolist()) == \
        list(range(ds.n))
