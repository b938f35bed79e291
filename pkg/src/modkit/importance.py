"""Permutation importance and selection of a small informative feature subset.

The importance of a feature is the drop in forest accuracy after its
column is randomly shuffled.  :func:`rank_features` trains a batch of
forests on random training splits, measures every feature's drop several
times per forest and ranks features by the mean drop; the top ``m`` form
the selected subset.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
import math

import numpy as np

from . import rng as rng_mod
from .data import partition
from .errors import BadSubsetSize, InputError, SubsetSearchTooLarge, UnknownFeature
from .evaluation import accuracy
from .forest import ForestParams, train_forest

RANKING_FORMAT = "modkit.ranking"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PermutationResult:
    feature_name: str
    baseline_accuracy: float
    drops: tuple

    @property
    def mean_drop(self):
        return math.fsum(self.drops) / len(self.drops)


@dataclass(frozen=True)
class ImportanceEntry:
    feature_name: str
    mean_accuracy_drop: float
    std: float
    n_measurements: int


@dataclass(frozen=True)
class ImportanceRanking:
    entries: tuple
    baseline_accuracy: float
    n_forests: int
    n_permutations: int
    target_factor: str = ""
    seed: int = 0
    held_out: bool = False

    def __len__(self):
        return len(self.entries)

    @property
    def names(self):
        return [e.feature_name for e in self.entries]

    def entry(self, name):
        for e in self.entries:
            if e.feature_name == name:
                return e
        raise UnknownFeature(f"feature {name!r} not in ranking")

    def to_dict(self):
        return {
            "format": RANKING_FORMAT,
            "version": SCHEMA_VERSION,
            "target_factor": self.target_factor,
            "seed": self.seed,
            "n_forests": self.n_forests,
            "n_permutations": self.n_permutations,
            "held_out": self.held_out,
            "baseline_accuracy": self.baseline_accuracy,
            "entries": [{"feature": e.feature_name, "mean_drop": e.mean_accuracy_drop,
                         "std": e.std, "n": e.n_measurements} for e in self.entries],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != RANKING_FORMAT:
            raise InputError(f"not an importance ranking: {doc.get('format')!r}")
        entries = tuple(ImportanceEntry(e["feature"], e["mean_drop"], e["std"], e["n"])
                        for e in doc["entries"])
        return cls(entries, doc["baseline_accuracy"], doc["n_forests"], doc["n_permutations"],
                   doc["target_factor"], doc["seed"], doc["held_out"])


def _sorted_entries(entries):
    return tuple(sorted(entries, key=lambda e: (-e.mean_accuracy_drop, e.feature_name)))


class _VoteCache:
    """Per-tree predictions and vote totals for one forest on one matrix.

    Re-scoring after shuffling column ``j`` only re-runs the trees that
    split on ``j``; every other tree's vote is unchanged.
    """

    def __init__(self, forest, X, truth):
        self.forest = forest
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.truth = np.asarray(truth)
        self.tree_preds = forest.tree_predictions(self.X)
        n = self.X.shape[0]
        self.votes = np.zeros((n, forest.n_classes), dtype=np.int64)
        for row in self.tree_preds:
            self.votes[np.arange(n), row] += 1
        self.baseline = float(np.mean(np.argmax(self.votes, axis=1) == self.truth))
        self.users = {}
        for t, tree in enumerate(forest.trees):
            for f in tree.used_features():
                self.users.setdefault(f, []).append(t)

    def drops(self, j, n_permutations, rng):
        trees = self.users.get(j)
        if not trees:
            return (0.0,) * n_permutations
        n = self.X.shape[0]
        rows = np.arange(n)
        out = []
        Xp = self.X.copy()
        for _ in range(n_permutations):
            Xp[:, j] = self.X[rng.permutation(n), j]
            votes = self.votes.copy()
            for t in trees:
                votes[rows, self.tree_preds[t]] -= 1
                votes[rows, self.forest.trees[t].predict(Xp)] += 1
            acc = float(np.mean(np.argmax(votes, axis=1) == self.truth))
            out.append(self.baseline - acc)
        return tuple(out)


def permutation_importance(forest, ds, feature_name, n_permutations=10, rng=None):
    """Accuracy drops of ``forest`` on ``ds`` when ``feature_name`` is shuffled.

    The shuffle is a uniform random permutation of the column across all rows
    of ``ds``.
    """
    if feature_name not in forest.feature_names:
        raise UnknownFeature(f"forest was not trained on feature {feature_name!r}")
    if n_permutations < 1:
        raise InputError("n_permutations must be >= 1")
    cache = _VoteCache(forest, forest.matrix_for(ds), ds.factor(forest.target_factor).values)
    drops = cache.drops(forest.feature_names.index(feature_name), n_permutations, rng_mod.as_generator(rng))
    return PermutationResult(feature_name, cache.baseline, drops)


def _canonical_order(X):
    """Column order that depends only on column contents."""
    return np.lexsort(X[::-1]) if X.shape[0] else np.arange(X.shape[1])


def rank_features(ds, target_factor, params=None, M_forests=100, n_permutations=10, master_seed=0,
                  train_fraction=0.75, held_out=False, n_jobs=1):
    """Permutation-importance ranking over ``M_forests`` forests.

    Forest ``i`` is trained on the training side of partition
    ``(master_seed, PARTITION, i)`` using every feature, then each feature is
    shuffled ``n_permutations`` times and the accuracy drop recorded.  Drops
    are measured on the whole of ``ds`` (or on the held-out side only with
    ``held_out=True``).

    Columns are internally ordered by content, and the permutations of a
    column come from stream ``(master_seed, PERMUTE, i, position)``, so
    renaming or reordering features does not change any feature's scores.
    """
    params = params or ForestParams()
    if M_forests < 1:
        raise InputError("M_forests must be >= 1")
    names = ds.feature_names
    order = _canonical_order(ds.feature_matrix())
    canon = [names[i] for i in order]
    truth_all = ds.factor(target_factor).values

    def one(i):
        part = partition(ds, train_fraction, rng_mod.stream(master_seed, rng_mod.PARTITION, i))
        forest = train_forest(ds.take(part.train_indices), target_factor, params,
                              seed=rng_mod.derive_seed(master_seed, rng_mod.TRAIN, i), features=canon)
        rows = part.test_indices if held_out else np.arange(ds.n_samples)
        cache = _VoteCache(forest, ds.feature_matrix(canon)[rows], truth_all[rows])
        drops = [cache.drops(j, n_permutations, rng_mod.stream(master_seed, rng_mod.PERMUTE, i, j))
                 for j in range(len(canon))]
        return cache.baseline, drops

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(one, range(M_forests)))
    else:
        results = [one(i) for i in range(M_forests)]

    entries = []
    for j, name in enumerate(canon):
        values = [d for _, drops in results for d in drops[j]]
        entries.append(ImportanceEntry(name, math.fsum(values) / len(values),
                                       float(np.std(values)), len(values)))
    baseline = math.fsum(b for b, _ in results) / len(results)
    return ImportanceRanking(_sorted_entries(entries), baseline, M_forests, n_permutations,
                             target_factor, int(master_seed), held_out)


def select_optimal_subset(ranking, m=4):
    """Names of the ``m`` features with the largest mean drop."""
    if not 1 <= m <= len(ranking.entries):
        raise BadSubsetSize(f"subset size {m} outside 1..{len(ranking.entries)}")
    return [e.feature_name for e in _sorted_entries(ranking.entries)[:m]]


def elbow_subset_size(ranking):
    """Subset size at the largest gap between consecutive sorted mean drops.

    A heuristic for picking ``m``; no statistical justification is implied.
    """
    drops = [e.mean_accuracy_drop for e in _sorted_entries(ranking.entries)]
    if len(drops) < 2:
        return len(drops)
    gaps = np.diff(drops) * -1
    return int(np.argmax(gaps)) + 1


def exhaustive_optimal_subset(ds, target_factor, params=None, M=10, master_seed=0, max_size=None,
                              train_fraction=0.75, cap=12):
    """Brute-force search for the subset with the best mean test accuracy.

    Every non-empty subset (up to ``max_size`` features) is scored on the same
    ``M`` partitions and forest seeds.  Only feasible for small ``d``; used to
    check the ranking heuristic on synthetic data.  Returns ``(subset,
    mean_accuracy, scores)`` where ``scores`` maps each subset to its mean.
    Ties prefer smaller subsets, then lexicographic order.
    """
    params = params or ForestParams()
    names = ds.feature_names
    if len(names) > cap:
        raise SubsetSearchTooLarge(f"{len(names)} features exceeds the exhaustive cap of {cap}")
    max_size = len(names) if max_size is None else max_size
    target = ds.factor(target_factor).values
    splits = [partition(ds, train_fraction, rng_mod.stream(master_seed, rng_mod.PARTITION, i)) for i in range(M)]
    scores = {}
    for size in range(1, max_size + 1):
        for subset in combinations(sorted(names), size):
            accs = []
            for i, part in enumerate(splits):
                forest = train_forest(ds.take(part.train_indices), target_factor, params,
                                      seed=rng_mod.derive_seed(master_seed, rng_mod.TRAIN, i), features=subset)
                pred = forest.predict_dataset(ds.take(part.test_indices))
                accs.append(accuracy(pred, target[part.test_indices]))
            scores[subset] = math.fsum(accs) / M
    best = min(scores, key=lambda s: (-scores[s], len(s), s))
    return list(best), scores[best], scores
