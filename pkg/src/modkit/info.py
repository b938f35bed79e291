"""Exact information measures on small discrete joint distributions.

All quantities are in bits.  A :class:`JointPmf` is a dense probability
table with one named axis per random variable; axis sets are given as
names (a single string or an iterable of strings).
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    CellCapExceeded,
    EmptyAxisSet,
    InputError,
    OverlappingAxes,
    SubsetSearchTooLarge,
    UnknownAxis,
)

DEFAULT_CELL_CAP = 10**6
DEFAULT_SUBSET_CAP = 12
EXACT_EPS = 1e-9


@dataclass(frozen=True, eq=False, init=False)
class JointPmf:
    names: tuple
    probs: np.ndarray

    def __init__(self, names, probs, cell_cap=DEFAULT_CELL_CAP, atol=1e-12):
        names = tuple(str(n) for n in names)
        probs = np.array(probs, dtype=np.float64, copy=True)
        if len(set(names)) != len(names):
            raise InputError(f"duplicate axis names: {names}")
        if probs.ndim != len(names):
            raise InputError(f"{len(names)} axis names for a {probs.ndim}-d table")
        if any(s < 1 for s in probs.shape):
            raise InputError("every axis needs cardinality >= 1")
        if probs.size > cell_cap:
            raise CellCapExceeded(f"{probs.size} cells exceeds cap {cell_cap}")
        if not np.all(np.isfinite(probs)) or probs.min() < 0:
            raise InputError("probabilities must be finite and non-negative")
        total = probs.sum()
        if abs(total - 1.0) > atol:
            raise InputError(f"probabilities sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_counts(cls, names, counts, **kwargs):
        counts = np.asarray(counts, dtype=np.float64)
        return cls(names, counts / counts.sum(), **kwargs)

    @property
    def axes(self):
        """``[(name, cardinality), ...]``"""
        return list(zip(self.names, self.probs.shape))

    def cardinality(self, name):
        return self.probs.shape[self._index(name)]

    def _index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownAxis(f"unknown axis {name!r}") from None

    def marginal(self, subset):
        """Marginal table over ``subset``, axes in the pmf's own order."""
        keep = {self._index(n) for n in _axis_set(subset)}
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        return self.probs.sum(axis=drop)

    def to_dict(self):
        return {"axes": [{"name": n, "cardinality": int(c)} for n, c in self.axes],
                "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, doc):
        names = [a["name"] for a in doc["axes"]]
        probs = np.asarray(doc["probs"], dtype=np.float64)
        shape = tuple(int(a["cardinality"]) for a in doc["axes"])
        if probs.shape != shape:
            raise InputError(f"probs shape {probs.shape} disagrees with axes {shape}")
        return cls(names, probs)

    def __eq__(self, other):
        if not isinstance(other, JointPmf):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.probs, other.probs)


def _axis_set(axes):
    if isinstance(axes, str):
        return (axes,)
    return tuple(axes)


def _check_disjoint(*sets):
    seen = set()
    for s in sets:
        overlap = seen & set(s)
        if overlap:
            raise OverlappingAxes(f"axes used twice: {sorted(overlap)}")
        seen |= set(s)


def _h(table):
    p = table[table > 0]
    return float(-(p * np.log2(p)).sum())


def entropy(p, subset):
    """Shannon entropy (bits) of the marginal over ``subset``.

    An empty subset has entropy 0.
    """
    subset = _axis_set(subset)
    if not subset:
        return 0.0
    return _h(p.marginal(subset))


def conditional_entropy(p, target, given):
    target, given = _axis_set(target), _axis_set(given)
    _check_disjoint(target, given)
    if not target:
        return 0.0
    return max(entropy(p, target + given) - entropy(p, given), 0.0)


def mutual_information(p, a, b):
    """I(a; b) = H(a) - H(a | b), clamped at zero."""
    a, b = _axis_set(a), _axis_set(b)
    if not a or not b:
        raise EmptyAxisSet("mutual information needs two non-empty axis sets")
    _check_disjoint(a, b)
    return max(entropy(p, a) - conditional_entropy(p, a, b), 0.0)


def conditional_mutual_information(p, a, b, given):
    """I(a; b | given) = H(a | given) - H(a | given, b), clamped at zero."""
    a, b, given = _axis_set(a), _axis_set(b), _axis_set(given)
    if not a or not b:
        raise EmptyAxisSet("conditional mutual information needs non-empty a and b")
    _check_disjoint(a, b, given)
    return max(conditional_entropy(p, a, given) - conditional_entropy(p, a, given + b), 0.0)


def _subsets(axes, cap):
    axes = _axis_set(axes)
    if not axes:
        raise EmptyAxisSet("no target axes to search")
    if len(axes) > cap:
        raise SubsetSearchTooLarge(f"2^{len(axes)} subsets exceeds the search cap of 2^{cap}")
    for size in range(1, len(axes) + 1):
        yield from combinations(axes, size)


def modulator_witness(p, f_axes, target_axes, eps=EXACT_EPS, cap=DEFAULT_SUBSET_CAP):
    """Smallest target subset T with I(f; T) > eps, or None.

    Subsets are visited by increasing size, then in the order the target
    axes were given.
    """
    f_axes = _axis_set(f_axes)
    for subset in _subsets(target_axes, cap):
        if mutual_information(p, f_axes, subset) > eps:
            return subset
    return None


def is_modulator(p, f_axes, target_axes, eps=EXACT_EPS, cap=DEFAULT_SUBSET_CAP):
    """True iff some non-empty subset of ``target_axes`` shares more than
    ``eps`` bits with ``f_axes``."""
    return modulator_witness(p, f_axes, target_axes, eps, cap) is not None


def robust_modulator_witness(p, f1, f2, target_axes, eps=EXACT_EPS, cap=DEFAULT_SUBSET_CAP):
    f1, f2 = _axis_set(f1), _axis_set(f2)
    for subset in _subsets(target_axes, cap):
        if conditional_mutual_information(p, f1, subset, f2) > eps:
            return subset
    return None


def is_robust_modulator(p, f1, f2, target_axes, eps=EXACT_EPS, cap=DEFAULT_SUBSET_CAP):
    """True iff I(f1; T | f2) > eps for some non-empty T within ``target_axes``."""
    return robust_modulator_witness(p, f1, f2, target_axes, eps, cap) is not None


# -- plug-in estimation from data ------------------------------------------

def quantile_bins(values, bins):
    """Equal-frequency bin ids for ``values``.

    Edges sit at the empirical ``k/bins`` quantiles; a value equal to an edge
    goes to the upper bin.  Empty bins (from ties) are dropped and the rest
    relabelled 0, 1, ... in value order, so a constant column yields a
    single bin.
    """
    if bins < 2:
        raise InputError(f"need at least 2 bins, got {bins}")
    values = np.asarray(values, dtype=np.float64)
    edges = np.quantile(values, np.arange(1, bins) / bins)
    raw = np.searchsorted(edges, values, side="right")
    _, ids = np.unique(raw, return_inverse=True)
    return ids.astype(np.int64)


def edge_bins(values, edges):
    """Bin ids for fixed cut points; a value equal to a cut goes to the upper bin.

    Empty bins are dropped as in :func:`quantile_bins`.
    """
    raw = np.searchsorted(np.sort(np.asarray(edges, dtype=np.float64)), values, side="right")
    _, ids = np.unique(raw, return_inverse=True)
    return ids.astype(np.int64)


def empirical_joint(ds, factor_names=(), feature_names=(), bins=4, cell_cap=DEFAULT_CELL_CAP, edges=None):
    """Plug-in JointPmf from a Dataset.

    Factors are used with their full category lists; each feature is
    discretised by :func:`quantile_bins`, unless ``edges`` maps its name to
    fixed cut points.  Axes appear factors first, then features, in the
    order requested.
    """
    factor_names, feature_names = list(factor_names), list(feature_names)
    edges = edges or {}
    if not factor_names and not feature_names:
        raise EmptyAxisSet("no axes requested")
    codes, shape = [], []
    for name in factor_names:
        col = ds.factor(name)
        codes.append(col.values)
        shape.append(len(col.categories))
    for name in feature_names:
        values = ds.feature(name).values
        ids = edge_bins(values, edges[name]) if name in edges else quantile_bins(values, bins)
        codes.append(ids)
        shape.append(int(ids.max()) + 1)
    size = int(np.prod(shape, dtype=object))
    if size > cell_cap:
        raise CellCapExceeded(f"{size} cells exceeds cap {cell_cap}")
    flat = np.ravel_multi_index(codes, shape)
    counts = np.bincount(flat, minlength=size).reshape(shape)
    return JointPmf.from_counts(factor_names + feature_names, counts, cell_cap=cell_cap)
