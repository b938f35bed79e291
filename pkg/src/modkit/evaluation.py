"""Accuracy, F1, the constant prior baseline and the repeated-split harness.

A factor set is declared an *empirical modulator* when a trained forest
predicts it more accurately than the constant classifier that always
answers the most frequent training class.  :func:`repeated_evaluation`
repeats the train/test split ``M`` times and bases the verdict on the median
accuracy ratio; F1 ratios are reported alongside.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from . import rng as rng_mod
from .data import partition, stratify
from .errors import (
    Empty,
    EmptyLabels,
    InputError,
    InvariantViolation,
    LengthMismatch,
    SingleClassStratum,
)
from .forest import ForestParams, train_forest

REPORT_FORMAT = "modkit.evaluation"
TRANSFER_FORMAT = "modkit.transfer"
SCHEMA_VERSION = 1

EMPIRICAL_MODULATOR = "EmpiricalModulator"
NOT_DETECTED = "NotDetected"


class ZeroSupportWarning(UserWarning):
    """F1 requested for a class with no true or predicted instances."""


# -- metrics ----------------------------------------------------------------

def _pair(predictions, truths):
    p = np.asarray(predictions)
    t = np.asarray(truths)
    if p.shape != t.shape or p.ndim != 1:
        raise LengthMismatch(f"predictions {p.shape} vs truths {t.shape}")
    if p.size == 0:
        raise Empty("no samples to score")
    return p, t


def accuracy(predictions, truths):
    p, t = _pair(predictions, truths)
    return float(np.mean(p == t))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def binary_confusion(predictions, truths, positive):
    p, t = _pair(predictions, truths)
    pp, tp_ = p == positive, t == positive
    return ConfusionCounts(int(np.sum(pp & tp_)), int(np.sum(pp & ~tp_)),
                           int(np.sum(~pp & ~tp_)), int(np.sum(~pp & tp_)))


def confusion_matrix(predictions, truths, n_classes):
    """``K x K`` counts with rows = truth, columns = prediction."""
    p, t = _pair(predictions, truths)
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (t, p), 1)
    return out


def _f1_from_counts(tp, fp, fn):
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0, True
    return 2 * tp / denom, False


def f1_score(predictions, truths, positive=1, return_flag=False):
    """``2TP / (2TP + FP + FN)`` for class ``positive``.

    With no true and no predicted positives the score is 0.0 and a
    :class:`ZeroSupportWarning` is issued (or the flag returned when
    ``return_flag`` is set).
    """
    c = binary_confusion(predictions, truths, positive)
    score, zero = _f1_from_counts(c.tp, c.fp, c.fn)
    if return_flag:
        return score, zero
    if zero:
        warnings.warn(f"no support for class {positive}; F1 set to 0.0", ZeroSupportWarning, stacklevel=2)
    return score


def macro_f1(predictions, truths, n_classes=None, return_flag=False):
    """Unweighted mean of one-vs-rest F1 over classes ``0..n_classes-1``."""
    p, t = _pair(predictions, truths)
    if n_classes is None:
        n_classes = int(max(p.max(), t.max())) + 1
    scores, any_zero = [], False
    for k in range(n_classes):
        c = binary_confusion(p, t, k)
        s, zero = _f1_from_counts(c.tp, c.fp, c.fn)
        scores.append(s)
        any_zero |= zero
    score = float(np.mean(scores))
    if return_flag:
        return score, any_zero
    if any_zero:
        warnings.warn("a class has no support; its F1 counted as 0.0", ZeroSupportWarning, stacklevel=2)
    return score


def _f1(pred, truth, n_classes, positive):
    if n_classes == 2:
        return f1_score(pred, truth, positive, return_flag=True)
    return macro_f1(pred, truth, n_classes, return_flag=True)


@dataclass(frozen=True)
class PriorEstimator:
    """Constant classifier answering the modal training class."""

    label: int

    def predict(self, n):
        return np.full(n, self.label, dtype=np.int64)


def prior_estimator(train_labels):
    labels = np.asarray(train_labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyLabels("prior estimator needs at least one label")
    return PriorEstimator(int(np.argmax(np.bincount(labels))))


def ratio(model, baseline):
    """``model / baseline`` with 0/0 read as 1 and x/0 as infinity."""
    if baseline == 0:
        return 1.0 if model == 0 else math.inf
    return model / baseline


# -- repeated evaluation ----------------------------------------------------

@dataclass(frozen=True)
class RepetitionRecord:
    repetition: int
    f1_model: float
    f1_baseline: float
    acc_model: float
    acc_baseline: float
    n_test: int
    zero_support: bool = False

    @property
    def acc_ratio(self):
        return ratio(self.acc_model, self.acc_baseline)

    @property
    def f1_ratio(self):
        return ratio(self.f1_model, self.f1_baseline)

    @property
    def verdict(self):
        return EMPIRICAL_MODULATOR if self.acc_ratio > 1 else NOT_DETECTED


_METRICS = ("f1_model", "f1_baseline", "acc_model", "acc_baseline", "acc_ratio", "f1_ratio")


def _quantile(sorted_v, q):
    # linear interpolation that keeps infinite ratios intact (numpy gives inf - inf = nan)
    h = (len(sorted_v) - 1) * q
    lo, hi = sorted_v[math.floor(h)], sorted_v[math.ceil(h)]
    if lo == hi:
        return float(lo)
    return float(lo + (h - math.floor(h)) * (hi - lo))


def summarize(values):
    v = np.sort(np.asarray(values, dtype=np.float64))
    q1, med, q3 = (_quantile(v, q) for q in (0.25, 0.5, 0.75))
    return {"median": float(med), "q1": float(q1), "q3": float(q3),
            "min": float(v.min()), "max": float(v.max()), "mean": float(np.mean(v))}


@dataclass(frozen=True)
class EvaluationReport:
    target_factor: str
    categories: tuple
    features: tuple
    records: tuple
    params: dict
    seed: int
    train_fraction: float = 0.75
    positive: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def degree(self):
        """Test-set size N (identical for every repetition)."""
        return self.records[0].n_test

    @property
    def aggregates(self):
        return {m: summarize([getattr(r, m) for r in self.records]) for m in _METRICS}

    @property
    def verdict(self):
        med = float(np.median([r.acc_ratio for r in self.records]))
        return EMPIRICAL_MODULATOR if med > 1 else NOT_DETECTED

    @property
    def zero_support(self):
        return any(r.zero_support for r in self.records)

    def to_dict(self):
        return {
            "format": REPORT_FORMAT,
            "version": SCHEMA_VERSION,
            "target_factor": self.target_factor,
            "categories": list(self.categories),
            "features": list(self.features),
            "positive": self.positive,
            "train_fraction": self.train_fraction,
            "degree": self.degree,
            "seed": self.seed,
            "params": self.params,
            "verdict": self.verdict,
            "zero_support_warning": self.zero_support,
            "aggregates": self.aggregates,
            "repetitions": [
                {"repetition": r.repetition, "f1_model": r.f1_model, "f1_baseline": r.f1_baseline,
                 "acc_model": r.acc_model, "acc_baseline": r.acc_baseline, "n_test": r.n_test,
                 "acc_ratio": r.acc_ratio, "f1_ratio": r.f1_ratio, "verdict": r.verdict,
                 "zero_support": r.zero_support}
                for r in self.records
            ],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != REPORT_FORMAT:
            raise InputError(f"not an evaluation report: {doc.get('format')!r}")
        records = tuple(
            RepetitionRecord(r["repetition"], r["f1_model"], r["f1_baseline"], r["acc_model"],
                             r["acc_baseline"], r["n_test"], r.get("zero_support", False))
            for r in doc["repetitions"]
        )
        report = cls(doc["target_factor"], tuple(doc["categories"]), tuple(doc["features"]), records,
                     doc["params"], doc["seed"], doc["train_fraction"], doc["positive"], doc.get("meta", {}))
        if report.verdict != doc["verdict"]:
            raise InvariantViolation("stored verdict disagrees with the stored repetitions")
        return report


def _evaluate_once(ds, target_factor, features, params, train_fraction, positive, master_seed, i,
                   stratified):
    part = partition(ds, train_fraction, rng_mod.stream(master_seed, rng_mod.PARTITION, i),
                     stratify_by=target_factor if stratified else None)
    train, test = ds.take(part.train_indices), ds.take(part.test_indices)
    forest = train_forest(train, target_factor, params,
                          seed=rng_mod.derive_seed(master_seed, rng_mod.TRAIN, i), features=features)
    truth = test.factor(target_factor).values
    pred = forest.predict_dataset(test)
    base = prior_estimator(train.factor(target_factor).values).predict(truth.size)
    k = len(ds.factor(target_factor).categories)
    f1_m, z1 = _f1(pred, truth, k, positive)
    f1_b, z2 = _f1(base, truth, k, positive)
    return RepetitionRecord(i, f1_m, f1_b, accuracy(pred, truth), accuracy(base, truth),
                            int(truth.size), bool(z1 or z2))


def repeated_evaluation(ds, target_factor, feature_subset=None, params=None, M=100, master_seed=0,
                        train_fraction=0.75, positive=1, stratified=False, n_jobs=1):
    """Train and test on ``M`` random partitions of ``ds``.

    Repetition ``i`` uses partition stream ``(master_seed, PARTITION, i)``
    and forest seed ``derive_seed(master_seed, TRAIN, i)``, so the report
    does not depend on ``n_jobs``.  F1 is binary (class ``positive``) for
    two-class targets and macro-averaged otherwise.
    """
    if M < 1:
        raise InputError(f"M must be >= 1, got {M}")
    params = params or ForestParams()
    target = ds.factor(target_factor)
    features = tuple(ds.feature_names if feature_subset is None else feature_subset)
    for name in features:
        ds.feature(name)

    def one(i):
        return _evaluate_once(ds, target_factor, features, params, train_fraction, positive,
                              master_seed, i, stratified)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            records = list(pool.map(one, range(M)))
    else:
        records = [one(i) for i in range(M)]
    return EvaluationReport(target_factor, target.categories, features, tuple(records),
                            params.to_dict(), int(master_seed), train_fraction, positive)


# -- cross-stratum transfer -------------------------------------------------

@dataclass(frozen=True)
class TransferMatrix:
    """Mean F1 with rows = test stratum and columns = training stratum."""

    strata: tuple
    values: np.ndarray
    subsets: dict
    stratum_factor: str
    target_factor: str
    M: int
    seed: int
    params: dict
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "format": TRANSFER_FORMAT,
            "version": SCHEMA_VERSION,
            "stratum_factor": self.stratum_factor,
            "target_factor": self.target_factor,
            "strata": list(self.strata),
            "rows": "test",
            "columns": "train",
            "f1": [[float(v) for v in row] for row in self.values],
            "feature_subsets": {k: list(v) for k, v in self.subsets.items()},
            "repetitions": self.M,
            "seed": self.seed,
            "params": self.params,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != TRANSFER_FORMAT:
            raise InputError(f"not a transfer matrix: {doc.get('format')!r}")
        return cls(tuple(doc["strata"]), np.asarray(doc["f1"], dtype=np.float64),
                   {k: tuple(v) for k, v in doc["feature_subsets"].items()},
                   doc["stratum_factor"], doc["target_factor"], doc["repetitions"], doc["seed"],
                   doc["params"], doc.get("meta", {}))

    def __eq__(self, other):
        if not isinstance(other, TransferMatrix):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def transfer_matrix(ds, stratum_factor, target_factor, params=None, M=100, master_seed=0,
                    subset_size=4, select=True, importance_forests=100, n_permutations=10,
                    train_fraction=0.75, positive=1, n_jobs=1):
    """Cross-stratum F1 matrix.

    For each training stratum ``c`` the features are first reduced to the
    top ``subset_size`` by permutation importance within that stratum
    (skipped when ``select`` is false).  Then, for each of ``M`` partitions
    of stratum ``c``, one forest is trained on the training part; it is
    scored on the held-out part of ``c`` (diagonal) and on every row of the
    other strata (off-diagonal).  Entries are means over repetitions.
    """
    from .importance import rank_features, select_optimal_subset

    params = params or ForestParams()
    factor = ds.factor(stratum_factor)
    strata = factor.categories
    if len(strata) < 2:
        raise InputError(f"stratum factor {stratum_factor!r} needs at least 2 categories")
    parts = {}
    for label in strata:
        sub = stratify(ds, stratum_factor, label)
        if sub.factor(target_factor).n_present < 2:
            raise SingleClassStratum(f"stratum {label!r} has a single {target_factor} class")
        parts[label] = sub
    k = len(ds.factor(target_factor).categories)

    subsets = {}
    for c, label in enumerate(strata):
        if select:
            ranking = rank_features(parts[label], target_factor, params, importance_forests,
                                    n_permutations, rng_mod.derive_seed(master_seed, rng_mod.STRATUM, c),
                                    train_fraction=train_fraction, n_jobs=n_jobs)
            subsets[label] = tuple(select_optimal_subset(ranking, min(subset_size, len(ranking.entries))))
        else:
            subsets[label] = tuple(ds.feature_names)

    def column(c):
        label = strata[c]
        train_ds = parts[label]
        col = np.zeros((len(strata), M))
        for i in range(M):
            part = partition(train_ds, train_fraction, rng_mod.stream(master_seed, rng_mod.PARTITION, c, i))
            forest = train_forest(train_ds.take(part.train_indices), target_factor, params,
                                  seed=rng_mod.derive_seed(master_seed, rng_mod.TRAIN, c, i),
                                  features=subsets[label])
            for r, test_label in enumerate(strata):
                test = train_ds.take(part.test_indices) if r == c else parts[test_label]
                truth = test.factor(target_factor).values
                col[r, i] = _f1(forest.predict_dataset(test), truth, k, positive)[0]
        return col.mean(axis=1)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            cols = list(pool.map(column, range(len(strata))))
    else:
        cols = [column(c) for c in range(len(strata))]
    values = np.column_stack(cols)
    return TransferMatrix(tuple(strata), values, subsets, stratum_factor, target_factor, M,
                          int(master_seed), params.to_dict())
