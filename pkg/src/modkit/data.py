"""Tabular population samples: factors, features, partitions and strata.

A :class:`Dataset` holds one row per host.  Factor columns are categorical
(diet, cancer type, time point...) and feature columns are non-negative
concentrations or abundances.  Datasets are immutable; every operation
returns a new object.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DegenerateSplit,
    EmptyStratum,
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
from .rng import as_generator


class FeatureKind(str, Enum):
    BACTERIAL_ABUNDANCE = "BacterialAbundance"
    SERUM_METABOLITE = "SerumMetabolite"
    COLON_METABOLITE = "ColonMetabolite"
    GENERIC = "Generic"


def _frozen(values, dtype):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FactorColumn:
    """A categorical column.

    ``values`` holds category ids, i.e. indices into ``categories``.
    ``feasible`` marks factors that can be set by intervention (diet, yes;
    cancer type, no).  It is an annotation only and never computed.
    """

    name: str
    values: np.ndarray
    categories: tuple
    feasible: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.int64))
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if self.values.ndim != 1:
            raise InputError(f"factor {self.name!r}: values must be one-dimensional")
        if not self.categories:
            raise InputError(f"factor {self.name!r}: no categories")
        if len(set(self.categories)) != len(self.categories):
            raise InputError(f"factor {self.name!r}: duplicate category labels")
        if self.values.size and (self.values.min() < 0 or self.values.max() >= len(self.categories)):
            raise InputError(f"factor {self.name!r}: category id out of range")

    @classmethod
    def from_labels(cls, name, labels, categories=None, feasible=False):
        """Encode string labels; categories default to order of first appearance."""
        labels = [str(v) for v in labels]
        if categories is None:
            categories = list(dict.fromkeys(labels))
        else:
            categories = [str(c) for c in categories]
        index = {c: i for i, c in enumerate(categories)}
        try:
            values = [index[v] for v in labels]
        except KeyError as exc:
            raise UnknownCategory(f"factor {name!r}: label {exc.args[0]!r} not among categories") from None
        return cls(name, values, tuple(categories), feasible)

    @property
    def labels(self):
        return [self.categories[v] for v in self.values]

    @property
    def n_present(self):
        """Number of distinct categories that actually occur."""
        return int(np.unique(self.values).size)

    def counts(self):
        return np.bincount(self.values, minlength=len(self.categories))

    def __eq__(self, other):
        if not isinstance(other, FactorColumn):
            return NotImplemented
        return (self.name == other.name and self.categories == other.categories
                and self.feasible == other.feasible and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class FeatureColumn:
    name: str
    values: np.ndarray
    kind: FeatureKind = FeatureKind.GENERIC

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        object.__setattr__(self, "kind", FeatureKind(self.kind))
        if self.values.ndim != 1:
            raise InputError(f"feature {self.name!r}: values must be one-dimensional")
        bad = np.flatnonzero(~np.isfinite(self.values))
        if bad.size:
            raise MissingValue(int(bad[0]), self.name)
        neg = np.flatnonzero(self.values < 0)
        if neg.size:
            raise NegativeFeature(int(neg[0]), self.name, float(self.values[neg[0]]))

    def __eq__(self, other):
        if not isinstance(other, FeatureColumn):
            return NotImplemented
        return (self.name == other.name and self.kind == other.kind
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class Dataset:
    factors: tuple
    features: tuple
    provenance: str = ""
    _matrix: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "features", tuple(self.features))
        lengths = {len(c.values) for c in self.factors + self.features}
        if not lengths:
            raise InputError("dataset has no columns")
        if len(lengths) > 1:
            raise LengthMismatch(f"columns differ in length: {sorted(lengths)}")
        if lengths.pop() < 1:
            raise InputError("dataset has no rows")
        names = [c.name for c in self.factors + self.features]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaMismatch(f"duplicate column names: {dupes}")
        if self.features:
            mat = np.column_stack([f.values for f in self.features])
        else:
            mat = np.empty((len(self.factors[0].values), 0))
        mat.setflags(write=False)
        object.__setattr__(self, "_matrix", mat)

    @property
    def n_samples(self):
        return len((self.factors + self.features)[0].values)

    @property
    def n_features(self):
        return len(self.features)

    @property
    def factor_names(self):
        return [f.name for f in self.factors]

    @property
    def feature_names(self):
        return [f.name for f in self.features]

    def factor(self, name):
        for f in self.factors:
            if f.name == name:
                return f
        raise UnknownFactor(f"unknown factor {name!r}")

    def feature(self, name):
        for f in self.features:
            if f.name == name:
                return f
        raise UnknownFeature(f"unknown feature {name!r}")

    def feature_index(self, name):
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise UnknownFeature(f"unknown feature {name!r}")

    def feature_matrix(self, names=None):
        """``(n_samples, n_features)`` float array, optionally restricted to ``names``."""
        if names is None:
            return self._matrix
        return self._matrix[:, [self.feature_index(n) for n in names]]

    def take(self, indices):
        """Rows ``indices`` (repeats allowed) as a new Dataset."""
        idx = np.asarray(indices, dtype=np.int64)
        factors = [FactorColumn(f.name, f.values[idx], f.categories, f.feasible) for f in self.factors]
        features = [FeatureColumn(f.name, f.values[idx], f.kind) for f in self.features]
        return Dataset(factors, features, self.provenance)

    def select_features(self, names):
        """Keep all factors and only the listed features, in the listed order."""
        return Dataset(self.factors, [self.feature(n) for n in names], self.provenance)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.factors == other.factors and self.features == other.features
                and self.provenance == other.provenance)


@dataclass(frozen=True, eq=False)
class Partition:
    train_indices: np.ndarray
    test_indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "train_indices", _frozen(self.train_indices, np.int64))
        object.__setattr__(self, "test_indices", _frozen(self.test_indices, np.int64))

    @property
    def n_samples(self):
        return self.train_indices.size + self.test_indices.size

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (np.array_equal(self.train_indices, other.train_indices)
                and np.array_equal(self.test_indices, other.test_indices))


def train_size(n_samples, train_fraction=0.75):
    """Number of training rows: round-half-to-even of ``n * fraction``.

    Raises DegenerateSplit when either side would be empty.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InputError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = round(n_samples * train_fraction)
    if n_train < 1 or n_train > n_samples - 1:
        raise DegenerateSplit(
            f"{n_samples} samples at train fraction {train_fraction} give "
            f"{n_train} train / {n_samples - n_train} test rows"
        )
    return n_train


def partition(ds, train_fraction=0.75, rng=None, stratify_by=None):
    """Random train/test split of ``ds``.

    The default split ignores the labels entirely, so classes can end up
    unbalanced between the two sides.  Passing a factor name as
    ``stratify_by`` instead splits each category separately (sizes still
    sum to ``round(n * train_fraction)``).
    """
    n = ds.n_samples
    if n < 2:
        raise DegenerateSplit(f"cannot split {n} sample(s)")
    n_train = train_size(n, train_fraction)
    rng = as_generator(rng)
    if stratify_by is None:
        perm = rng.permutation(n)
        train, test = perm[:n_train], perm[n_train:]
    else:
        train, test = _stratified(ds.factor(stratify_by).values, n_train, rng)
    return Partition(np.sort(train), np.sort(test))


def _stratified(labels, n_train, rng):
    n = labels.size
    classes = np.unique(labels)
    groups = [np.flatnonzero(labels == c) for c in classes]
    # largest-remainder apportionment of n_train over classes
    exact = np.array([g.size * n_train / n for g in groups])
    quota = np.floor(exact).astype(int)
    order = np.argsort(-(exact - quota), kind="stable")
    quota[order[: n_train - quota.sum()]] += 1
    train, test = [], []
    for g, q in zip(groups, quota):
        perm = rng.permutation(g)
        train.append(perm[:q])
        test.append(perm[q:])
    return np.concatenate(train), np.concatenate(test)


def stratify(ds, factor_name, category_label):
    """Rows where ``factor_name == category_label``; all columns kept."""
    factor = ds.factor(factor_name)
    if category_label not in factor.categories:
        raise UnknownCategory(f"factor {factor_name!r} has no category {category_label!r}")
    rows = np.flatnonzero(factor.values == factor.categories.index(category_label))
    if rows.size == 0:
        raise EmptyStratum(f"no rows with {factor_name} = {category_label!r}")
    return ds.take(rows)


def normalize_relative(ds, kinds=None):
    """Divide the selected features by their per-sample sum.

    ``kinds`` is a FeatureKind or collection of kinds; ``None`` selects every
    feature.  Unselected columns are returned untouched.
    """
    if kinds is None:
        selected = [True] * ds.n_features
    else:
        if isinstance(kinds, (str, FeatureKind)):
            kinds = [kinds]
        kinds = {FeatureKind(k) for k in kinds}
        selected = [f.kind in kinds for f in ds.features]
    cols = [i for i, s in enumerate(selected) if s]
    if not cols:
        return ds
    block = ds.feature_matrix()[:, cols]
    sums = block.sum(axis=1)
    zero = np.flatnonzero(sums <= 0)
    if zero.size:
        raise ZeroRowSum(int(zero[0]))
    scaled = block / sums[:, None]
    features = list(ds.features)
    for j, i in enumerate(cols):
        features[i] = FeatureColumn(ds.features[i].name, scaled[:, j], ds.features[i].kind)
    return Dataset(ds.factors, features, ds.provenance)
