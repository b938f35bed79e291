import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modkit.data import Dataset, FactorColumn, FeatureColumn
from modkit.errors import DimensionMismatch, EmptyNode, NoFeatures, SerializationError, SingleSample
from modkit.forest import (
    Forest,
    ForestParams,
    Internal,
    Leaf,
    SplitRule,
    Tree,
    best_split,
    forest_from_dict,
    forest_to_dict,
    gini_impurity,
    majority_vote,
    predict,
    train_forest,
)


def labelled(x, y, categories=("A", "B")):
    x = np.asarray(x, dtype=float)
    cols = x.T if x.ndim == 2 else [x]
    return Dataset([FactorColumn("y", y, categories)],
                   [FeatureColumn(f"x{j}", c) for j, c in enumerate(cols)])


def naive_best_split(X, y, rows, cands, n_classes):
    """Enumerate every midpoint of every candidate; lowest weighted Gini wins."""
    def gini(idx):
        c = np.bincount(y[idx], minlength=n_classes) / len(idx)
        return 1 - np.sum(c ** 2)

    parent = gini(rows)
    best = None
    for f in sorted(cands):
        vals = np.unique(X[rows, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = lo + (hi - lo) / 2
            left, right = rows[X[rows, f] <= thr], rows[X[rows, f] > thr]
            w = (len(left) * gini(left) + len(right) * gini(right)) / len(rows)
            if best is None or w < best[2] - 1e-12:
                best = (f, thr, w)
    if best is None:
        return None
    return best[0], best[1], parent - best[2]


# -- impurity and split search -----------------------------------------------------

@pytest.mark.parametrize("counts, expected", [((5, 0), 0.0), ((5, 5), 0.5), ((1, 1, 1, 1), 0.75)])
def test_gini_examples(counts, expected):
    assert gini_impurity(counts) == pytest.approx(expected, abs=1e-15)


def test_gini_empty_node():
    with pytest.raises(EmptyNode):
        gini_impurity((0, 0))


def test_best_split_two_rows():
    rule, dec = best_split([0, 1], [0, 1], [[0.0], [1.0]], [0])
    assert rule == SplitRule(0, 0.5)
    assert dec == pytest.approx(0.5)  # parent 0.5, both children pure


def test_best_split_four_rows():
    rule, dec = best_split([0, 1, 2, 3], [0, 0, 1, 1], [[0.0], [1.0], [2.0], [3.0]], [0])
    assert rule.threshold == 1.5
    assert dec == pytest.approx(0.5, abs=1e-15)


def test_best_split_pure_or_constant_node():
    assert best_split([0, 1, 2], [1, 1, 1], [[0.0], [1.0], [2.0]], [0]) is None
    assert best_split([0, 1], [0, 1], [[3.0], [3.0]], [0]) is None


def test_tie_goes_to_lower_feature_index():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    rule, _ = best_split([0, 1], [0, 1], X, [1, 0])
    assert rule.feature_index == 0


@settings(max_examples=120, deadline=None)
@given(st.integers(2, 30), st.integers(1, 4), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_best_split_matches_enumeration(n, d, k, seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(n, d)).astype(float)
    y = rng.integers(0, k, n)
    rows = np.arange(n)
    got = best_split(rows, y, X, range(d), n_classes=k)
    want = naive_best_split(X, y, rows, range(d), k)
    if len(np.unique(y)) < 2:
        assert got is None
        return
    if want is None or want[2] <= 1e-12:
        assert got is None or got[1] == pytest.approx(want[2] if want else 0, abs=1e-9)
        return
    rule, dec = got
    assert dec == pytest.approx(want[2], abs=1e-12)
    assert (rule.feature_index, rule.threshold) == (want[0], want[1])


# -- training --------------------------------------------------------------------

def test_separable_single_tree_is_a_stump():
    ds = labelled([0.1, 0.2, 0.3, 0.7, 0.8, 0.9], [0, 0, 0, 1, 1, 1])
    forest = train_forest(ds, "y", ForestParams(n_trees=1, bootstrap=False), seed=0)
    assert forest.trees[0].depth() == 1
    assert np.array_equal(forest.predict_dataset(ds), [0, 0, 0, 1, 1, 1])


def test_same_seed_same_forest():
    rng = np.random.default_rng(1)
    ds = labelled(rng.random((60, 5)), rng.integers(0, 2, 60))
    a = train_forest(ds, "y", ForestParams(n_trees=15), seed=9)
    b = train_forest(ds, "y", ForestParams(n_trees=15), seed=9)
    c = train_forest(ds, "y", ForestParams(n_trees=15), seed=9, n_jobs=4)
    assert a.structurally_equal(b) and a.structurally_equal(c)
    assert not a.structurally_equal(train_forest(ds, "y", ForestParams(n_trees=15), seed=10))


def test_single_class_gives_single_leaves():
    ds = labelled(np.arange(10.0), np.ones(10, dtype=int))
    forest = train_forest(ds, "y", ForestParams(n_trees=5), seed=0)
    assert all(t.n_nodes == 1 and t.leaf_class[0] == 1 for t in forest.trees)


def test_training_errors():
    with pytest.raises(SingleSample):
        train_forest(labelled([1.0], [0]), "y")
    ds = Dataset([FactorColumn("y", [0, 1], ("A", "B"))], [])
    with pytest.raises(NoFeatures):
        train_forest(ds, "y")


def test_every_split_decreases_impurity():
    rng = np.random.default_rng(4)
    ds = labelled(rng.random((80, 6)), rng.integers(0, 3, 80), ("A", "B", "C"))
    forest = train_forest(ds, "y", ForestParams(n_trees=10), seed=3)
    for tree in forest.trees:
        internal = tree.internal_nodes()
        assert np.all(tree.impurity_decrease[internal] > 0)
        # children partition the parent's samples
        np.testing.assert_array_equal(tree.counts[internal],
                                      tree.counts[tree.left[internal]] + tree.counts[tree.right[internal]])


def test_max_depth_and_min_samples_split():
    rng = np.random.default_rng(2)
    ds = labelled(rng.random((100, 3)), rng.integers(0, 2, 100))
    shallow = train_forest(ds, "y", ForestParams(n_trees=5, max_depth=2), seed=0)
    assert max(t.depth() for t in shallow.trees) <= 2
    coarse = train_forest(ds, "y", ForestParams(n_trees=5, min_samples_split=40), seed=0)
    for t in coarse.trees:
        assert np.all(t.counts[t.internal_nodes()].sum(axis=1) >= 40)


def test_params_validation_and_resolution():
    assert ForestParams().resolve_max_features(500) == 23  # ceil(sqrt(500))
    assert ForestParams(max_features=None).resolve_max_features(7) == 7
    assert ForestParams.from_dict(ForestParams(n_trees=3, max_depth=4).to_dict()) == ForestParams(3, max_depth=4)


# -- prediction ------------------------------------------------------------------

def leaf_tree(counts):
    return Tree.from_node(Leaf(tuple(counts)))


def forest_of(trees, n_classes=3):
    return Forest(tuple(trees), ForestParams(n_trees=len(trees)), tuple("ABC"[:n_classes]), ("x",), 0)


def test_predict_examples():
    assert predict(forest_of([leaf_tree((5, 0, 0))] * 3), [0.0]) == 0
    assert predict(forest_of([leaf_tree((0, 4, 0)), leaf_tree((0, 0, 4))]), [0.0]) == 1
    assert predict(forest_of([leaf_tree((3, 7))], 2), [0.0]) == 1


def test_leaf_tie_goes_to_lowest_class():
    assert predict(forest_of([leaf_tree((0, 2, 2))]), [1.0]) == 1


def test_majority_vote_ties():
    votes = np.array([[2, 0], [1, 1], [1, 0], [2, 1]])
    np.testing.assert_array_equal(majority_vote(votes, 3), [1, 0])


def test_predict_dimension_check():
    with pytest.raises(DimensionMismatch):
        predict(forest_of([leaf_tree((1, 0, 0))]), [0.0, 1.0])


# -- serialization -----------------------------------------------------------------

def test_node_view_round_trip():
    root = Internal(SplitRule(0, 0.5), Leaf((2, 0)),
                    Internal(SplitRule(1, 2.5), Leaf((0, 1)), Leaf((1, 3)), 0.1), 0.2)
    tree = Tree.from_node(root)
    assert tree.to_node() == root
    assert predict(Forest((tree,), ForestParams(n_trees=1), ("A", "B"), ("a", "b"), 0), [0.7, 3.0]) == 1


def test_forest_json_round_trip():
    rng = np.random.default_rng(8)
    ds = labelled(rng.random((50, 4)), rng.integers(0, 2, 50))
    forest = train_forest(ds, "y", ForestParams(n_trees=7), seed=1)
    again = forest_from_dict(json.loads(json.dumps(forest_to_dict(forest))))
    assert again.structurally_equal(forest)
    np.testing.assert_array_equal(again.predict_dataset(ds), forest.predict_dataset(ds))
    with pytest.raises(SerializationError):
        forest_from_dict({"format": "other"})
