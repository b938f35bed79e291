"""Random-forest classifier grown from scratch.

Trees are CART classifiers: binary splits ``x[f] <= threshold`` chosen to
minimise the size-weighted Gini impurity of the two children.  Each tree is
grown on a bootstrap resample of the training rows and considers a fresh
random subset of ``ceil(sqrt(d))`` features at every node.  There is no
pruning; growth stops when a node is pure, too small to split, at
``max_depth``, or when no candidate split lowers the impurity.

Determinism
-----------
Tree ``t`` of a forest trained with seed ``s`` draws all of its randomness
from :func:`modkit.rng.stream` ``(s, TREE, t)``: first the bootstrap indices
(``integers(0, n, n)``), then a block of uniforms consumed ``max_features``
at a time by a partial Fisher-Yates shuffle at each node that attempts a
split.  Nodes are expanded depth first, left child before right.  Equal
impurity decreases are resolved towards the lower feature index, then the
lower threshold.

The node kernels are compiled with numba and release the GIL, so trees can
be grown on a thread pool without changing the result.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numba
import numpy as np

from . import rng as rng_mod
from .errors import (
    DimensionMismatch,
    EmptyNode,
    InputError,
    NoFeatures,
    SerializationError,
    SingleSample,
    UnknownFeature,
)

FOREST_FORMAT = "modkit.forest"
FOREST_VERSION = 1

_TIE_RTOL = 1e-12
_MIN_DECREASE = 1e-12


# -- kernels ----------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _best_split_kernel(X, y, rows, start, end, candidates, n_classes, counts):
    """Best Gini split of ``rows[start:end]`` over ``candidates``.

    ``counts`` are the node's class counts.  Returns ``(feature, threshold,
    decrease)``; feature is -1 when no threshold separates the rows.
    """
    m = end - start
    parent_sumsq = 0.0
    for c in range(n_classes):
        parent_sumsq += counts[c] * counts[c]
    best_score = -1.0
    best_feature = -1
    best_threshold = 0.0
    vals = np.empty(m)
    labels = np.empty(m, dtype=np.int64)
    cl = np.zeros(n_classes, dtype=np.int64)
    cr = np.zeros(n_classes, dtype=np.int64)
    for f in candidates:
        for i in range(m):
            vals[i] = X[rows[start + i], f]
        order = np.argsort(vals, kind="mergesort")
        for i in range(m):
            labels[i] = y[rows[start + order[i]]]
        for c in range(n_classes):
            cl[c] = 0
            cr[c] = counts[c]
        sumsq_l = 0.0
        sumsq_r = parent_sumsq
        for i in range(m - 1):
            c = labels[i]
            sumsq_l += 2.0 * cl[c] + 1.0
            cl[c] += 1
            sumsq_r -= 2.0 * cr[c] - 1.0
            cr[c] -= 1
            a = vals[order[i]]
            b = vals[order[i + 1]]
            if a < b:
                score = sumsq_l / (i + 1) + sumsq_r / (m - i - 1)
                if score > best_score + _TIE_RTOL * abs(best_score):
                    best_score = score
                    best_feature = f
                    thr = 0.5 * a + 0.5 * b
                    if thr >= b or thr < a:
                        thr = a
                    best_threshold = thr
    if best_feature < 0:
        return -1, 0.0, 0.0
    decrease = (best_score - parent_sumsq / m) / m
    return best_feature, best_threshold, decrease


@numba.njit(cache=True, nogil=True)
def _grow_kernel(X, y, rows, n_classes, max_features, min_samples_split, max_depth, uniforms):
    m = rows.size
    d = X.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    counts = np.zeros((cap, n_classes), dtype=np.int64)
    decrease = np.zeros(cap)
    rows = rows.copy()
    buf = np.empty(m, dtype=np.int64)
    perm = np.empty(d, dtype=np.int64)

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    u = 0

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        size = end - start
        for i in range(start, end):
            counts[node, y[rows[i]]] += 1
        pure = False
        for c in range(n_classes):
            if counts[node, c] == size:
                pure = True
        if pure or size < min_samples_split or (max_depth >= 0 and depth >= max_depth):
            continue

        for j in range(d):
            perm[j] = j
        for i in range(max_features):
            j = i + int(uniforms[u] * (d - i))
            u += 1
            if j >= d:
                j = d - 1
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        candidates = np.sort(perm[:max_features])

        f, thr, dec = _best_split_kernel(X, y, rows, start, end, candidates, n_classes, counts[node])
        if f < 0 or dec <= _MIN_DECREASE:
            continue

        # stable in-place partition of rows[start:end]
        nl = 0
        nr = 0
        for i in range(start, end):
            r = rows[i]
            if X[r, f] <= thr:
                rows[start + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for i in range(nr):
            rows[start + nl + i] = buf[i]

        feature[node] = f
        threshold[node] = thr
        decrease[node] = dec
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        # push right first so the left subtree is expanded first
        st_node[top] = rid
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lid
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy(), decrease[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _predict_kernel(feature, threshold, left, right, leaf_class, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf_class[node]
    return out


# -- public types -----------------------------------------------------------

@dataclass(frozen=True)
class SplitRule:
    """Samples with ``x[feature_index] <= threshold`` go left."""

    feature_index: int
    threshold: float


@dataclass(frozen=True)
class Leaf:
    class_counts: tuple

    @property
    def prediction(self):
        return int(np.argmax(self.class_counts))


@dataclass(frozen=True)
class Internal:
    rule: SplitRule
    left: object
    right: object
    impurity_decrease: float = 0.0


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat array form of one decision tree; node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    impurity_decrease: np.ndarray
    leaf_class: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "counts", "impurity_decrease"):
            getattr(self, name).setflags(write=False)
        lc = np.argmax(self.counts, axis=1).astype(np.int64)
        lc.setflags(write=False)
        object.__setattr__(self, "leaf_class", lc)

    @property
    def n_nodes(self):
        return self.feature.size

    @property
    def n_classes(self):
        return self.counts.shape[1]

    def is_leaf(self, node):
        return self.feature[node] < 0

    def internal_nodes(self):
        return np.flatnonzero(self.feature >= 0)

    def used_features(self):
        return set(int(f) for f in self.feature[self.feature >= 0])

    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def n_training_samples(self):
        return int(self.counts[0].sum())

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict_kernel(self.feature, self.threshold, self.left, self.right, self.leaf_class, X)

    def to_node(self, node=0):
        """Nested :class:`Internal` / :class:`Leaf` view of the subtree at ``node``."""
        if self.feature[node] < 0:
            return Leaf(tuple(int(c) for c in self.counts[node]))
        return Internal(
            SplitRule(int(self.feature[node]), float(self.threshold[node])),
            self.to_node(int(self.left[node])),
            self.to_node(int(self.right[node])),
            float(self.impurity_decrease[node]),
        )

    @classmethod
    def from_node(cls, root):
        """Inverse of :meth:`to_node`; node ids follow the grower's order."""
        nodes = [root]
        feature, threshold, left, right, dec = [-1], [0.0], [-1], [-1], [0.0]
        stack = [0]
        while stack:
            i = stack.pop()
            node = nodes[i]
            if isinstance(node, Leaf):
                continue
            li = len(nodes)
            nodes += [node.left, node.right]
            feature += [-1, -1]
            threshold += [0.0, 0.0]
            left += [-1, -1]
            right += [-1, -1]
            dec += [0.0, 0.0]
            feature[i] = node.rule.feature_index
            threshold[i] = node.rule.threshold
            dec[i] = node.impurity_decrease
            left[i], right[i] = li, li + 1
            stack += [li + 1, li]
        n_classes = len(next(n.class_counts for n in nodes if isinstance(n, Leaf)))
        counts = np.zeros((len(nodes), n_classes), dtype=np.int64)
        for i in range(len(nodes) - 1, -1, -1):
            if isinstance(nodes[i], Leaf):
                counts[i] = nodes[i].class_counts
            else:
                counts[i] = counts[left[i]] + counts[right[i]]
        return cls(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                   np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                   counts, np.array(dec, dtype=np.float64))

    def structurally_equal(self, other):
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("feature", "threshold", "left", "right", "counts"))


@dataclass(frozen=True)
class ForestParams:
    """Forest hyper-parameters.

    ``max_features`` is ``"sqrt"`` (ceil of the square root of the number of
    features), an int, or ``None`` for all features.
    """

    n_trees: int = 100
    max_features: object = "sqrt"
    min_samples_split: int = 2
    max_depth: int = None
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise InputError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_samples_split < 2:
            raise InputError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise InputError("max_depth must be >= 0")
        if not (self.max_features in ("sqrt", None) or
                (isinstance(self.max_features, int) and self.max_features >= 1)):
            raise InputError(f"bad max_features {self.max_features!r}")

    def resolve_max_features(self, n_features):
        if self.max_features is None:
            return n_features
        if self.max_features == "sqrt":
            return min(math.ceil(math.sqrt(n_features)), n_features)
        if self.max_features > n_features:
            raise InputError(f"max_features={self.max_features} exceeds {n_features} features")
        return self.max_features

    def to_dict(self):
        return {"n_trees": self.n_trees, "max_features": self.max_features,
                "min_samples_split": self.min_samples_split, "max_depth": self.max_depth,
                "bootstrap": self.bootstrap}

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple
    params: ForestParams
    categories: tuple
    feature_names: tuple
    train_seed: int
    target_factor: str = ""

    @property
    def n_features(self):
        return len(self.feature_names)

    @property
    def n_classes(self):
        return len(self.categories)

    def _matrix(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def tree_predictions(self, X):
        """``(n_trees, n_samples)`` array of per-tree class votes."""
        X = self._matrix(X)
        return np.stack([t.predict(X) for t in self.trees])

    def predict_many(self, X):
        return majority_vote(self.tree_predictions(X), self.n_classes)

    def matrix_for(self, ds):
        """Feature matrix of ``ds`` in this forest's column order."""
        try:
            return np.ascontiguousarray(ds.feature_matrix(list(self.feature_names)))
        except UnknownFeature as exc:
            raise DimensionMismatch(f"dataset lacks a feature the forest uses: {exc}") from None

    def predict_dataset(self, ds):
        return self.predict_many(self.matrix_for(ds))

    def structurally_equal(self, other):
        return (len(self.trees) == len(other.trees) and self.categories == other.categories
                and self.feature_names == other.feature_names
                and all(a.structurally_equal(b) for a, b in zip(self.trees, other.trees)))


def majority_vote(tree_preds, n_classes):
    """Column-wise vote count; ties go to the lowest class id."""
    n = tree_preds.shape[1]
    votes = np.zeros((n, n_classes), dtype=np.int64)
    for row in tree_preds:
        votes[np.arange(n), row] += 1
    return np.argmax(votes, axis=1)


# -- operations -------------------------------------------------------------

def gini_impurity(class_counts):
    """``1 - sum((c_i / n)^2)`` for a node with the given class counts."""
    counts = np.asarray(class_counts, dtype=np.float64)
    n = counts.sum()
    if n < 1:
        raise EmptyNode("Gini impurity of an empty node")
    return float(1.0 - np.sum((counts / n) ** 2))


def best_split(rows, labels, features, candidate_features, n_classes=None):
    """Best Gini split of ``rows``.

    ``labels`` are integer class ids and ``features`` the full sample by
    feature matrix; both are indexed by ``rows``.  Thresholds are midpoints
    between consecutive distinct values.  Returns ``(SplitRule,
    impurity_decrease)`` or ``None`` when the node is pure or no candidate
    feature varies.
    """
    rows = np.asarray(rows, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    X = np.ascontiguousarray(features, dtype=np.float64)
    if rows.size < 2:
        raise InputError("best_split needs at least 2 rows")
    cands = np.sort(np.asarray(list(candidate_features), dtype=np.int64))
    if cands.size == 0:
        raise InputError("no candidate features")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    counts = np.bincount(labels[rows], minlength=n_classes).astype(np.int64)
    if np.count_nonzero(counts) < 2:
        return None
    f, thr, dec = _best_split_kernel(X, labels, rows, 0, rows.size, cands, n_classes, counts)
    if f < 0:
        return None
    return SplitRule(int(f), float(thr)), float(dec)


def grow_tree(X, y, n_classes, params, rng, max_features=None):
    """Grow a single tree on ``(X, y)`` using generator ``rng``."""
    n, d = X.shape
    k = params.resolve_max_features(d) if max_features is None else max_features
    if params.bootstrap:
        rows = rng.integers(0, n, size=n).astype(np.int64)
    else:
        rows = np.arange(n, dtype=np.int64)
    uniforms = rng.random((2 * n + 1) * k)
    max_depth = -1 if params.max_depth is None else params.max_depth
    arrays = _grow_kernel(X, y, rows, n_classes, k, params.min_samples_split, max_depth, uniforms)
    return Tree(*arrays)


def _fit_arrays(ds, target_factor, features=None):
    if ds.n_samples < 2:
        raise SingleSample(f"need at least 2 samples to train, got {ds.n_samples}")
    names = list(ds.feature_names if features is None else features)
    if not names:
        raise NoFeatures("no feature columns to train on")
    target = ds.factor(target_factor)
    X = np.ascontiguousarray(ds.feature_matrix(names), dtype=np.float64)
    y = np.ascontiguousarray(target.values, dtype=np.int64)
    return X, y, target, names


def train_forest(ds, target_factor, params=None, seed=0, features=None, n_jobs=1):
    """Train a forest predicting ``target_factor`` from the feature columns.

    ``features`` optionally restricts (and orders) the feature columns.
    ``n_jobs`` grows trees on a thread pool; the result does not depend on it.
    """
    params = params or ForestParams()
    X, y, target, names = _fit_arrays(ds, target_factor, features)
    n_classes = len(target.categories)
    k = params.resolve_max_features(len(names))

    def one(t):
        return grow_tree(X, y, n_classes, params, rng_mod.stream(seed, rng_mod.TREE, t), k)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(one, range(params.n_trees)))
    else:
        trees = [one(t) for t in range(params.n_trees)]
    return Forest(tuple(trees), params, target.categories, tuple(names), int(seed), target_factor)


def predict(forest, sample):
    """Class id predicted for one feature vector."""
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim != 1 or x.size != forest.n_features:
        raise DimensionMismatch(f"expected {forest.n_features} features, got shape {x.shape}")
    return int(forest.predict_many(x[None, :])[0])


# -- serialization ----------------------------------------------------------

def _node_to_dict(node):
    if isinstance(node, Leaf):
        return {"leaf": list(node.class_counts)}
    return {"feature": node.rule.feature_index, "threshold": node.rule.threshold,
            "decrease": node.impurity_decrease,
            "left": _node_to_dict(node.left), "right": _node_to_dict(node.right)}


def _node_from_dict(doc):
    if "leaf" in doc:
        return Leaf(tuple(int(c) for c in doc["leaf"]))
    return Internal(SplitRule(int(doc["feature"]), float(doc["threshold"])),
                    _node_from_dict(doc["left"]), _node_from_dict(doc["right"]),
                    float(doc.get("decrease", 0.0)))


def forest_to_dict(forest):
    return {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "target_factor": forest.target_factor,
        "categories": list(forest.categories),
        "feature_names": list(forest.feature_names),
        "train_seed": forest.train_seed,
        "params": forest.params.to_dict(),
        "trees": [_node_to_dict(t.to_node()) for t in forest.trees],
    }


def forest_from_dict(doc):
    if doc.get("format") != FOREST_FORMAT:
        raise SerializationError(f"not a forest document: format={doc.get('format')!r}")
    if doc.get("version") != FOREST_VERSION:
        raise SerializationError(f"unsupported forest version {doc.get('version')!r}")
    trees = tuple(Tree.from_node(_node_from_dict(t)) for t in doc["trees"])
    return Forest(trees, ForestParams.from_dict(doc["params"]), tuple(doc["categories"]),
                  tuple(doc["feature_names"]), int(doc["train_seed"]), doc.get("target_factor", ""))
