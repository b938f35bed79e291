"""Synthetic populations with known dependence structure.

Every feature is log-normal, ``exp(noise_sd * z + shift)`` with standard
normal ``z``, so values are positive like abundances.  The factor ``F`` is
binary with ``P(F = 1) = class_balance``.  What differs between scenarios
is which shifts depend on which factors; :class:`GroundTruth` records the
resulting information content exactly (discrete scenarios) or by
quadrature (Gaussian-mixture scenarios).

Scenarios
---------
Independent
    ``F`` independent of all features.  MI = 0.
DirectModulation
    ``x0`` is shifted by ``effect_size * noise_sd`` when ``F = 1``.
MarkovChain
    ``F1 -> F2 -> x0``: ``F2`` is ``F1`` flipped with probability
    ``flip_prob`` and only ``F2`` shifts ``x0``.  CMI(F1; x0 | F2) = 0.
XorPair
    ``x0`` and ``x1`` lie above or below 1 according to bits ``B1`` and
    ``B2 = F xor B1``.  Each feature alone carries no information on ``F``;
    the pair determines it.
Separable
    ``x0 > 1`` exactly when ``F = 1``.  Bayes accuracy 1.
CurseOfDim
    ``n_informative`` shifted features among ``n_noise_features`` noise
    columns; meant for small ``n_samples``.
StratifiedTransfer
    A ``stratum`` factor with ``n_strata`` levels; within stratum ``s`` only
    the features ``s<s>_inf_*`` respond to ``F``.
"""

from dataclasses import dataclass, field, asdict
from enum import Enum
import math

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import rng as rng_mod
from .data import Dataset, FactorColumn, FeatureColumn
from .errors import InvalidSpec
from .info import JointPmf

TRUTH_FORMAT = "modkit.truth"
TRUTH_VERSION = 1
BINARY = ("c0", "c1")


class Scenario(str, Enum):
    INDEPENDENT = "Independent"
    DIRECT_MODULATION = "DirectModulation"
    MARKOV_CHAIN = "MarkovChain"
    XOR_PAIR = "XorPair"
    SEPARABLE = "Separable"
    CURSE_OF_DIM = "CurseOfDim"
    STRATIFIED_TRANSFER = "StratifiedTransfer"


@dataclass(frozen=True)
class ScenarioSpec:
    kind: Scenario
    n_samples: int = 200
    n_noise_features: int = 0
    effect_size: float = 3.0
    noise_sd: float = 1.0
    class_balance: float = 0.5
    seed: int = 0
    flip_prob: float = 0.1
    n_informative: int = 4
    n_strata: int = 2

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", Scenario(self.kind))
        except ValueError:
            raise InvalidSpec(f"unknown scenario {self.kind!r}") from None
        if self.n_samples < 4:
            raise InvalidSpec("n_samples must be >= 4")
        if not self.noise_sd > 0:
            raise InvalidSpec("noise_sd must be > 0")
        if not 0 < self.class_balance < 1:
            raise InvalidSpec("class_balance must lie in (0, 1)")
        if self.n_noise_features < 0 or self.effect_size < 0:
            raise InvalidSpec("n_noise_features and effect_size must be non-negative")
        if not 0 <= self.flip_prob <= 1:
            raise InvalidSpec("flip_prob must lie in [0, 1]")
        if self.kind == Scenario.CURSE_OF_DIM and self.n_informative < 1:
            raise InvalidSpec("CurseOfDim needs n_informative >= 1")
        if self.kind == Scenario.STRATIFIED_TRANSFER and (self.n_strata < 2 or self.n_informative < 1):
            raise InvalidSpec("StratifiedTransfer needs n_strata >= 2 and n_informative >= 1")
        if self.seed < 0:
            raise InvalidSpec("seed must be non-negative")

    def to_dict(self):
        doc = asdict(self)
        doc["kind"] = self.kind.value
        return doc


@dataclass(frozen=True)
class GroundTruth:
    """Exact information content of a generated scenario.

    ``mi`` is I(target; informative feature) in bits for single-feature
    scenarios (for XorPair and Separable it is the information in the
    informative features jointly).  ``cmi`` is set where a conditional
    statement is part of the construction.  ``pmf`` is the exact joint of the
    discrete variables (factors and the binary sides of the features) when
    one exists; feature axes of the pmf are the feature's side of
    ``extra["side_edge"]``.
    """

    kind: str
    mi: float = None
    cmi: float = None
    pmf: JointPmf = None
    informative: tuple = ()
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "format": TRUTH_FORMAT,
            "version": TRUTH_VERSION,
            "kind": self.kind,
            "mi": self.mi,
            "cmi": self.cmi,
            "pmf": self.pmf.to_dict() if self.pmf is not None else None,
            "informative": list(self.informative),
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, doc):
        pmf = JointPmf.from_dict(doc["pmf"]) if doc.get("pmf") else None
        return cls(doc["kind"], doc.get("mi"), doc.get("cmi"), pmf, tuple(doc.get("informative", ())),
                   doc.get("extra", {}))


def binary_entropy(p):
    if p <= 0 or p >= 1:
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def mixture_mi(priors, components, atol=1e-6):
    """I(F; X) in bits when X | F=f is a unit-variance Gaussian mixture.

    ``components[f]`` is a list of ``(weight, mean)`` pairs.  The integral
    of ``sum_f p(f) p(x|f) log2(p(x|f) / p(x))`` is evaluated with adaptive
    quadrature over ``[min mean - 12, max mean + 12]``.
    """
    priors = np.asarray(priors, dtype=np.float64)
    means = [m for comp in components for _, m in comp]
    lo, hi = min(means) - 12.0, max(means) + 12.0
    log_norm = -0.5 * math.log(2 * math.pi)

    def log_cond(x, comp):
        terms = [math.log(w) + log_norm - 0.5 * (x - m) ** 2 for w, m in comp if w > 0]
        return logsumexp(terms)

    def integrand(x):
        lc = np.array([log_cond(x, comp) for comp in components])
        lm = logsumexp(lc, b=priors)
        return float(np.sum(priors * np.exp(lc) * (lc - lm))) / math.log(2)

    value, err = integrate.quad(integrand, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-10,
                                points=sorted(set(means)))
    if err > atol:
        raise ArithmeticError(f"quadrature error estimate {err} exceeds {atol}")
    return max(value, 0.0)


def shifted_mi(class_balance, shift):
    """I(F; X) for X | F ~ N(shift * F, 1)."""
    if shift == 0:
        return 0.0
    return mixture_mi([1 - class_balance, class_balance], [[(1.0, 0.0)], [(1.0, shift)]])


def _noise(rng, n, k, sd):
    return np.exp(sd * rng.standard_normal((n, k)))


def _names(prefix, k):
    width = max(3, len(str(max(k - 1, 0))))
    return [f"{prefix}{i:0{width}d}" for i in range(k)]


def generate(spec):
    """Draw ``(Dataset, GroundTruth)`` for ``spec``."""
    if not isinstance(spec, ScenarioSpec):
        raise InvalidSpec("generate expects a ScenarioSpec")
    rng = rng_mod.stream(spec.seed, rng_mod.SYNTH)
    n, sd, pi = spec.n_samples, spec.noise_sd, spec.class_balance
    shift = spec.effect_size * sd
    margin = shift / 2
    kind = spec.kind
    f = (rng.random(n) < pi).astype(np.int64)
    factors = [FactorColumn("F", f, BINARY)]
    informative = []
    cols = []
    truth = {}
    prior = np.array([1 - pi, pi])

    if kind == Scenario.INDEPENDENT:
        truth = dict(mi=0.0, pmf=JointPmf(["F"], prior))
        n_noise = max(spec.n_noise_features, 1)
    else:
        n_noise = spec.n_noise_features

    if kind == Scenario.DIRECT_MODULATION:
        x0 = np.exp(sd * rng.standard_normal(n) + shift * f)
        cols, informative = [x0], ["x0"]
        truth = dict(mi=shifted_mi(pi, spec.effect_size))

    elif kind == Scenario.MARKOV_CHAIN:
        p = spec.flip_prob
        f2 = f ^ (rng.random(n) < p).astype(np.int64)
        factors = [FactorColumn("F1", f, BINARY), FactorColumn("F2", f2, BINARY)]
        x0 = np.exp(sd * rng.standard_normal(n) + shift * f2)
        cols, informative = [x0], ["x0"]
        e = spec.effect_size
        mi = 0.0 if e == 0 or p == 0.5 else mixture_mi(
            prior, [[(1 - p, 0.0), (p, e)], [(p, 0.0), (1 - p, e)]])
        p_f2 = (1 - pi) * p + pi * (1 - p)
        pmf = JointPmf(["F1", "F2"], [[(1 - pi) * (1 - p), (1 - pi) * p], [pi * p, pi * (1 - p)]])
        truth = dict(mi=mi, cmi=0.0, pmf=pmf,
                     extra={"mi_F2": shifted_mi(p_f2, e), "flip_prob": p})

    elif kind == Scenario.XOR_PAIR:
        b1 = (rng.random(n) < 0.5).astype(np.int64)
        b2 = f ^ b1
        x0 = np.exp((2 * b1 - 1) * (margin + sd * np.abs(rng.standard_normal(n))))
        x1 = np.exp((2 * b2 - 1) * (margin + sd * np.abs(rng.standard_normal(n))))
        cols, informative = [x0, x1], ["x0", "x1"]
        probs = np.zeros((2, 2, 2))
        for fv in (0, 1):
            for bv in (0, 1):
                probs[fv, bv, fv ^ bv] = prior[fv] * 0.5
        truth = dict(mi=binary_entropy(pi), pmf=JointPmf(["F", "x0", "x1"], probs),
                     extra={"singleton_mi": 0.0, "side_edge": 1.0})

    elif kind == Scenario.SEPARABLE:
        x0 = np.exp((2 * f - 1) * (margin + sd * np.abs(rng.standard_normal(n))))
        cols, informative = [x0], ["x0"]
        truth = dict(mi=binary_entropy(pi), pmf=JointPmf(["F", "x0"], np.diag(prior)),
                     extra={"bayes_accuracy": 1.0, "side_edge": 1.0})

    elif kind == Scenario.CURSE_OF_DIM:
        k = spec.n_informative
        informative = _names("inf_", k)
        block = np.exp(sd * rng.standard_normal((n, k)) + shift * f[:, None])
        cols = list(block.T)
        truth = dict(mi=shifted_mi(pi, spec.effect_size), extra={"mi_per_informative_feature": True})

    elif kind == Scenario.STRATIFIED_TRANSFER:
        s = rng.integers(0, spec.n_strata, n)
        labels = [f"s{i}" for i in range(spec.n_strata)]
        factors = [FactorColumn("stratum", s, labels), FactorColumn("F", f, BINARY)]
        k = spec.n_informative
        by_stratum = {}
        for i in range(spec.n_strata):
            names = _names(f"s{i}_inf_", k)
            active = (s == i) & (f == 1)
            block = np.exp(sd * rng.standard_normal((n, k)) + shift * active[:, None])
            cols += list(block.T)
            informative += names
            by_stratum[labels[i]] = names
        truth = dict(mi=shifted_mi(pi, spec.effect_size),
                     extra={"informative_by_stratum": by_stratum, "mi_within_stratum": True})

    noise_names = _names("noise_", n_noise)
    if n_noise:
        cols += list(_noise(rng, n, n_noise, sd).T)
    features = [FeatureColumn(name, v) for name, v in zip(informative + noise_names, cols)]
    ds = Dataset(factors, features, provenance=f"modkit.synth {kind.value} seed={spec.seed}")
    gt = GroundTruth(kind.value, truth.get("mi"), truth.get("cmi"), truth.get("pmf"), tuple(informative),
                     {"spec": spec.to_dict(), **truth.get("extra", {})})
    return ds, gt
