import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modkit.data import (
    Dataset,
    FactorColumn,
    FeatureColumn,
    FeatureKind,
    normalize_relative,
    partition,
    stratify,
    train_size,
)
from modkit.errors import (
    DegenerateSplit,
    InputError,
    LengthMismatch,
    MissingValue,
    NegativeFeature,
    SchemaMismatch,
    UnknownCategory,
    UnknownFactor,
    UnknownFeature,
    ZeroRowSum,
)


def make_ds(n=8, labels=None):
    labels = labels if labels is not None else ["A", "B"] * (n // 2)
    return Dataset([FactorColumn.from_labels("diet", labels)],
                   [FeatureColumn("x", np.arange(n, dtype=float)),
                    FeatureColumn("y", np.arange(n, dtype=float) ** 2)])


def test_categories_in_first_appearance_order():
    col = FactorColumn.from_labels("cancer", ["WM47", "A375", "WM47"])
    assert col.categories == ("WM47", "A375")
    np.testing.assert_array_equal(col.values, [0, 1, 0])
    assert col.labels == ["WM47", "A375", "WM47"]


def test_explicit_categories_may_be_absent():
    col = FactorColumn.from_labels("f", ["b"], categories=["a", "b"])
    assert col.n_present == 1
    np.testing.assert_array_equal(col.counts(), [0, 1])
    with pytest.raises(UnknownCategory):
        FactorColumn.from_labels("f", ["c"], categories=["a", "b"])


def test_feature_column_validation():
    with pytest.raises(NegativeFeature) as info:
        FeatureColumn("x", [1.0, -0.5])
    assert (info.value.row, info.value.col) == (1, "x")
    with pytest.raises(MissingValue):
        FeatureColumn("x", [1.0, np.nan])


def test_columns_are_read_only():
    ds = make_ds()
    with pytest.raises(ValueError):
        ds.features[0].values[0] = 3.0


def test_dataset_validation():
    with pytest.raises(LengthMismatch):
        Dataset([FactorColumn("f", [0, 0], ("a",))], [FeatureColumn("x", [1.0])])
    with pytest.raises(SchemaMismatch):
        Dataset([FactorColumn("x", [0], ("a",))], [FeatureColumn("x", [1.0])])
    with pytest.raises(InputError):
        Dataset([], [])


def test_lookups():
    ds = make_ds()
    assert ds.n_samples == 8 and ds.n_features == 2
    assert ds.feature_index("y") == 1
    np.testing.assert_array_equal(ds.feature_matrix(["y", "x"])[2], [4.0, 2.0])
    with pytest.raises(UnknownFactor):
        ds.factor("dieet")
    with pytest.raises(UnknownFeature):
        ds.feature("z")
    assert ds.select_features(["y"]).feature_names == ["y"]


# -- partition ------------------------------------------------------------------

def test_partition_sizes():
    part = partition(make_ds(8), 0.75, np.random.default_rng(0))
    assert part.train_indices.size == 6 and part.test_indices.size == 2
    assert sorted(np.concatenate([part.train_indices, part.test_indices])) == list(range(8))


def test_partition_too_small():
    # round(1.5) = 2 leaves no test rows
    with pytest.raises(DegenerateSplit):
        partition(make_ds(2), 0.75, 0)


def test_train_size_rounds_half_to_even():
    assert train_size(10, 0.25) == 2   # 2.5 -> 2
    assert train_size(14, 0.25) == 4   # 3.5 -> 4
    with pytest.raises(InputError):
        train_size(10, 1.0)


def test_partition_deterministic():
    ds = make_ds(100)
    assert partition(ds, 0.75, 42) == partition(ds, 0.75, 42)
    assert partition(ds, 0.75, 42) != partition(ds, 0.75, 43)


@settings(max_examples=50, deadline=None)
@given(st.integers(4, 200), st.floats(0.1, 0.9), st.integers(0, 2**32))
def test_partition_is_disjoint_and_exhaustive(n, frac, seed):
    ds = make_ds(n - n % 2 or 2)
    try:
        part = partition(ds, frac, seed)
    except DegenerateSplit:
        return
    both = np.concatenate([part.train_indices, part.test_indices])
    assert np.array_equal(np.sort(both), np.arange(ds.n_samples))
    assert part.train_indices.size == round(ds.n_samples * frac)


def test_stratified_partition_keeps_proportions():
    ds = make_ds(40, labels=["A"] * 30 + ["B"] * 10)
    part = partition(ds, 0.75, 3, stratify_by="diet")
    train_labels = ds.factor("diet").values[part.train_indices]
    # 22.5 / 7.5: equal remainders, the extra row goes to the first category
    assert np.bincount(train_labels).tolist() == [23, 7]
    assert part.train_indices.size == 30


# -- stratify / normalize ----------------------------------------------------------

def test_stratify():
    ds = Dataset([FactorColumn.from_labels("cancer", ["A375"] * 10 + ["WM47"] * 6)],
                 [FeatureColumn("x", np.ones(16))])
    assert stratify(ds, "cancer", "A375").n_samples == 10
    with pytest.raises(UnknownFactor):
        stratify(ds, "dieet", "A375")
    with pytest.raises(UnknownCategory):
        stratify(ds, "cancer", "WM3000")


def test_normalize_relative():
    ds = Dataset([FactorColumn("f", [0], ("a",))],
                 [FeatureColumn("a", [2.0]), FeatureColumn("b", [3.0]), FeatureColumn("c", [5.0])])
    np.testing.assert_allclose(normalize_relative(ds).feature_matrix()[0], [0.2, 0.3, 0.5])
    single = Dataset([], [FeatureColumn("a", [4.0])])
    np.testing.assert_array_equal(normalize_relative(single).feature_matrix(), [[1.0]])
    zeros = Dataset([], [FeatureColumn("a", [0.0]), FeatureColumn("b", [0.0])])
    with pytest.raises(ZeroRowSum):
        normalize_relative(zeros)


def test_normalize_only_selected_kinds():
    ds = Dataset([], [FeatureColumn("bug1", [1.0, 3.0], FeatureKind.BACTERIAL_ABUNDANCE),
                      FeatureColumn("bug2", [1.0, 1.0], "BacterialAbundance"),
                      FeatureColumn("serum", [7.0, 9.0], FeatureKind.SERUM_METABOLITE)])
    out = normalize_relative(ds, FeatureKind.BACTERIAL_ABUNDANCE)
    np.testing.assert_allclose(out.feature_matrix(), [[0.5, 0.5, 7.0], [0.75, 0.25, 9.0]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(0.01, 1e6), min_size=3, max_size=3), min_size=1, max_size=20))
def test_normalized_rows_sum_to_one(rows):
    m = np.array(rows)
    ds = Dataset([], [FeatureColumn(f"x{j}", m[:, j]) for j in range(3)])
    np.testing.assert_allclose(normalize_relative(ds).feature_matrix().sum(axis=1), 1.0, atol=1e-12)
