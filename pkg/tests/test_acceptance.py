"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the measured values;
the terminal summary lists every criterion's outcome either way.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modkit.evaluation import (
    EMPIRICAL_MODULATOR,
    NOT_DETECTED,
    accuracy,
    f1_score,
    prior_estimator,
    repeated_evaluation,
    transfer_matrix,
)
from modkit.importance import rank_features, select_optimal_subset
from modkit.info import (
    JointPmf,
    conditional_mutual_information,
    empirical_joint,
    is_modulator,
    is_robust_modulator,
    mutual_information,
)
from modkit.synth import Scenario, ScenarioSpec, generate

pytestmark = pytest.mark.acceptance


def report(number, ok, detail):
    print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")


class timed:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# -- 1 ---------------------------------------------------------------------------

@pytest.mark.criterion(1, "exact MI oracle")
def test_exact_mi_oracle():
    with timed(1.0) as t:
        copy = mutual_information(JointPmf(["a", "b"], [[0.5, 0.0], [0.0, 0.5]]), "a", "b")
        indep = mutual_information(JointPmf(["a", "b"], np.outer([0.3, 0.7], [0.6, 0.4])), "a", "b")
        sym = mutual_information(JointPmf(["a", "b"], [[0.4, 0.1], [0.1, 0.4]]), "a", "b")
    ok = (abs(copy - 1.0) <= 1e-12 and abs(indep) <= 1e-12 and abs(sym - 0.278072) <= 1e-6
          and t.elapsed < t.limit)
    report(1, ok, f"I={copy!r}, {indep!r}, {sym!r} in {t.elapsed:.4f}s")
    assert copy == pytest.approx(1.0, abs=1e-12)
    assert indep == pytest.approx(0.0, abs=1e-12)
    assert sym == pytest.approx(0.278072, abs=1e-6)
    assert t.elapsed < t.limit


# -- 2 ---------------------------------------------------------------------------

@pytest.mark.criterion(2, "robust-modulator negative control on a Markov chain")
def test_markov_chain_negative_control():
    with timed(10.0) as t:
        ds, truth = generate(ScenarioSpec(Scenario.MARKOV_CHAIN, n_samples=10000, flip_prob=0.1,
                                          effect_size=3.0, seed=0))
        p = empirical_joint(ds, ["F1", "F2"], ["x0"], bins=4)
        cmi = conditional_mutual_information(p, "F1", "x0", "F2")
        robust = is_robust_modulator(p, "F1", "F2", ["x0"], eps=0.02)
        marginal = is_modulator(p, "F1", ["x0"], eps=0.02)
    ok = truth.cmi == 0.0 and cmi <= 0.02 and not robust and marginal and t.elapsed < t.limit
    report(2, ok, f"truth CMI={truth.cmi}, plug-in CMI={cmi:.5f}, robust={robust}, "
                  f"marginal={marginal}, {t.elapsed:.2f}s")
    assert truth.cmi == 0.0
    assert cmi <= 0.02
    assert not robust
    assert marginal
    assert t.elapsed < t.limit


# -- 3 ---------------------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.integers(1, 500), st.lists(st.integers(0, 1), min_size=1, max_size=50), st.randoms())
def _balanced_baseline(half, train_labels, random):
    truth = [0] * half + [1] * half
    random.shuffle(truth)
    prior = prior_estimator(train_labels)
    pred = prior.predict(len(truth))
    assert accuracy(pred, truth) == 0.5
    assert f1_score(pred, truth, positive=prior.label) == 2 / 3


@pytest.mark.criterion(3, "prior baseline gives accuracy 1/2 and F1 2/3 on balanced test sets")
def test_baseline_identity():
    with timed(1.0) as t:
        truth = np.array([0, 1] * 25)
        pred = prior_estimator([0, 1, 1]).predict(truth.size)
        acc, f1 = accuracy(pred, truth), f1_score(pred, truth, positive=1)
    ok = acc == 0.5 and f1 == 2 / 3 and t.elapsed < t.limit
    report(3, ok, f"accuracy={acc!r}, F1={f1!r} in {t.elapsed:.4f}s")
    assert acc == 0.5 and f1 == 2 / 3
    assert t.elapsed < t.limit
    _balanced_baseline()


# -- 4 ---------------------------------------------------------------------------

@pytest.mark.criterion(4, "empirical modulator detected on separable data, not on independent data")
def test_empirical_modulator_detection():
    with timed(60.0) as t:
        sep, _ = generate(ScenarioSpec(Scenario.SEPARABLE, n_samples=200, seed=0))
        rep_sep = repeated_evaluation(sep, "F", M=20, master_seed=0)
        ind, _ = generate(ScenarioSpec(Scenario.INDEPENDENT, n_samples=2000, seed=0))
        rep_ind = repeated_evaluation(ind, "F", M=20, master_seed=0)
    f1_med = rep_sep.aggregates["f1_model"]["median"]
    ratio_med = rep_ind.aggregates["acc_ratio"]["median"]
    ok = (f1_med == 1.0 and rep_sep.verdict == EMPIRICAL_MODULATOR and 0.95 <= ratio_med <= 1.05
          and rep_ind.verdict == NOT_DETECTED and t.elapsed < t.limit)
    report(4, ok, f"separable median F1={f1_med}, {rep_sep.verdict}; independent median ratio="
                  f"{ratio_med:.4f}, {rep_ind.verdict}; {t.elapsed:.1f}s")
    assert f1_med == 1.0 and rep_sep.verdict == EMPIRICAL_MODULATOR
    assert 0.95 <= ratio_med <= 1.05 and rep_ind.verdict == NOT_DETECTED
    assert t.elapsed < t.limit


# -- 5 and 6 -----------------------------------------------------------------------

SEEDS = range(5)


@pytest.fixture(scope="module")
def curse_runs():
    """Rankings for the d=500, n=60 scenario over five seeds (20 forests x 10 permutations)."""
    runs = []
    start = time.perf_counter()
    for seed in SEEDS:
        ds, truth = generate(ScenarioSpec(Scenario.CURSE_OF_DIM, n_samples=60, n_noise_features=496,
                                          n_informative=4, seed=seed))
        ranking = rank_features(ds, "F", M_forests=20, n_permutations=10, master_seed=seed)
        runs.append((ds, truth, ranking))
    return runs, time.perf_counter() - start


@pytest.mark.criterion(5, "permutation importance recovers the informative features (d=500, n=60)")
def test_importance_recovery(curse_runs):
    runs, elapsed = curse_runs
    hits, worst_noise = 0, 0.0
    for ds, truth, ranking in runs:
        hits += set(select_optimal_subset(ranking, 4)) == set(truth.informative)
        noise = [abs(e.mean_accuracy_drop) for e in ranking.entries if e.feature_name not in truth.informative]
        worst_noise = max(worst_noise, max(noise))
    ok = hits >= 4 and worst_noise <= 0.05 and elapsed < 120
    report(5, ok, f"top-4 recovered in {hits}/5 seeds, largest |noise drop|={worst_noise:.4f}, "
                  f"{elapsed:.1f}s")
    assert hits >= 4
    assert worst_noise <= 0.05
    assert elapsed < 120


@pytest.mark.criterion(6, "selected 4-feature subset matches or beats all 500 features")
def test_curse_compensation(curse_runs):
    runs, ranking_time = curse_runs
    start = time.perf_counter()
    full, subset = [], []
    for seed, (ds, _, ranking) in zip(SEEDS, runs):
        chosen = select_optimal_subset(ranking, 4)
        full.append(repeated_evaluation(ds, "F", M=20, master_seed=seed).aggregates["f1_model"]["median"])
        subset.append(repeated_evaluation(ds, "F", chosen, M=20, master_seed=seed)
                      .aggregates["f1_model"]["median"])
    elapsed = ranking_time + time.perf_counter() - start
    med_full, med_subset = float(np.median(full)), float(np.median(subset))
    ok = med_subset >= med_full and elapsed < 120
    per_seed = ", ".join(f"{s:.3f}/{f:.3f}" for s, f in zip(subset, full))
    report(6, ok, f"median F1 subset={med_subset:.4f} vs all={med_full:.4f} "
                  f"(per seed subset/all: {per_seed}); {elapsed:.1f}s incl. ranking")
    assert med_subset >= med_full
    assert elapsed < 120


# -- 7 ---------------------------------------------------------------------------

MARGIN = 0.02  # dependent pmfs are redrawn until their MI clears this


def random_pmf(rng, dependent):
    """Binary F with P(F=1) = 1/2 and one to three ternary features."""
    k = int(rng.integers(1, 4))
    shape = (3,) * k
    names = ["F"] + [f"S{i}" for i in range(k)]
    redraws = 0
    while True:
        if dependent:
            probs = np.stack([0.5 * rng.dirichlet(np.ones(3 ** k)).reshape(shape) for _ in range(2)])
        else:
            ps = rng.dirichlet(np.ones(3 ** k)).reshape(shape)
            probs = np.stack([0.5 * ps, 0.5 * ps])
        p = JointPmf(names, probs)
        if not dependent or mutual_information(p, "F", names[1:]) > MARGIN:
            return p, redraws
        redraws += 1


def bayes_ratio(p, n, rng):
    """A_N of the enumerated Bayes rule over A_N of the constant prior rule, same N draws."""
    flat = p.probs.reshape(2, -1)
    bayes = np.argmax(flat, axis=0)          # ties -> class 0
    prior = int(np.argmax(flat.sum(axis=1)))
    draws = rng.choice(flat.size, size=n, p=flat.ravel())
    f, s = np.divmod(draws, flat.shape[1])
    return accuracy(bayes[s], f) / accuracy(np.full(n, prior), f)


@pytest.mark.criterion(7, "Bayes accuracy gain iff exact MI > 0.01 bits (50 random pmfs)")
def test_bayes_gain_iff_information():
    rng = np.random.default_rng(2024)
    contradictions, redraws, rows = 0, 0, []
    with timed(60.0) as t:
        for i in range(50):
            p, r = random_pmf(rng, dependent=bool(i % 2))
            redraws += r
            mi = mutual_information(p, "F", p.names[1:])
            ratio = bayes_ratio(p, 10000, rng)
            if (ratio > 1) != (mi > 0.01):
                contradictions += 1
            rows.append((mi, ratio))
    ok = contradictions == 0 and t.elapsed < t.limit
    dep = [m for m, _ in rows if m > 0.01]
    report(7, ok, f"{contradictions} contradictions over 50 pmfs ({len(dep)} dependent, min MI "
                  f"{min(dep):.4f}; {redraws} dependent draws redrawn below {MARGIN} bits); {t.elapsed:.2f}s")
    assert contradictions == 0
    assert t.elapsed < t.limit


def test_information_alone_does_not_guarantee_a_gain():
    # With an unbalanced factor the Bayes rule can stay constant although the
    # features carry information, so the accuracy gain only follows in one direction.
    p = JointPmf(["F", "S"], [[0.45, 0.45], [0.09, 0.01]])
    assert mutual_information(p, "F", "S") > 0.01
    assert bayes_ratio(p, 10000, np.random.default_rng(0)) == 1.0


def test_information_below_threshold_can_still_give_a_gain():
    # MI of 0.004 bits: below the 0.01 threshold, yet the Bayes rule is not constant.
    p = JointPmf(["F", "S"], 0.5 * np.array([[0.40, 0.35, 0.25], [0.33, 0.35, 0.32]]))
    mi = mutual_information(p, "F", "S")
    assert 0 < mi < 0.01
    assert bayes_ratio(p, 200000, np.random.default_rng(1)) > 1


# -- 8 ---------------------------------------------------------------------------

def modkit(*args, cwd):
    proc = subprocess.run([sys.executable, "-m", "modkit.cli", *args], cwd=cwd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.mark.criterion(8, "fixed-seed CLI reports are byte-identical across runs and thread counts")
def test_cli_determinism(tmp_path):
    (tmp_path / "pmf.json").write_text(json.dumps(
        {"axes": [{"name": "a", "cardinality": 2}, {"name": "b", "cardinality": 2}],
         "probs": [[0.4, 0.1], [0.1, 0.4]]}))
    modkit("simulate", "--scenario", "StratifiedTransfer", "--n-samples", "160", "--n-informative", "2",
           "--n-noise", "4", "--seed", "11", "--out", "data.csv", "--truth", "truth.json",
           "--schema-out", "schema.json", cwd=tmp_path)
    data = ["--data", "data.csv", "--schema", "schema.json"]
    forest = ["--trees", "20"]
    commands = {
        "simulate": (["simulate", "--scenario", "XorPair", "--n-samples", "100", "--seed", "3",
                      "--out", "{out}.csv", "--truth", "{out}"], False),
        "modulator-test": (["modulator-test", *data, "--target", "F", "--repetitions", "6", "--seed", "5",
                            *forest, "--out", "{out}"], True),
        "select-features": (["select-features", *data, "--target", "F", "--forests", "4",
                             "--permutations", "3", "--top", "2", "--seed", "5", *forest, "--out", "{out}"], True),
        "transfer": (["transfer", *data, "--stratum", "stratum", "--target", "F", "--repetitions", "3",
                      "--forests", "3", "--permutations", "2", "--top", "2", "--seed", "5", *forest,
                      "--out", "{out}.csv", "--json-out", "{out}"], True),
        "mi": (["mi", *data, "--axes", "F,s0_inf_000+s0_inf_001,stratum", "--eps", "0.01", "--out", "{out}"],
               False),
        "exact-mi": (["exact-mi", "--pmf", "pmf.json", "--a", "a", "--b", "b", "--out", "{out}"], False),
    }
    failures = []
    with timed(None) as t:
        for name, (argv, threaded) in commands.items():
            variants = [("run1", []), ("run2", [])] + ([("threads8", ["--threads", "8"])] if threaded else [])
            outputs = []
            for tag, extra in variants:
                out = f"{name}.{tag}.json"
                modkit(*[a.replace("{out}", out) for a in argv], *extra, cwd=tmp_path)
                files = [(tmp_path / out).read_bytes()]
                if (tmp_path / f"{out}.csv").exists():
                    files.append((tmp_path / f"{out}.csv").read_bytes())
                outputs.append(files)
            if any(o != outputs[0] for o in outputs[1:]):
                failures.append(name)
    ok = not failures
    report(8, ok, f"{len(commands)} commands compared, differing: {failures or 'none'}; {t.elapsed:.1f}s")
    assert not failures


# -- 9 ---------------------------------------------------------------------------

@pytest.mark.criterion(9, "transfer matrix is diagonal-dominant for orthogonal strata")
def test_transfer_discrimination():
    with timed(60.0) as t:
        ds, _ = generate(ScenarioSpec(Scenario.STRATIFIED_TRANSFER, n_samples=400, n_informative=4,
                                      n_noise_features=16, seed=0))
        tm = transfer_matrix(ds, "stratum", "F", M=20, master_seed=0, importance_forests=20,
                             n_permutations=10)
    diag = float(np.mean(np.diag(tm.values)))
    off = float(np.mean(tm.values[~np.eye(len(tm.strata), dtype=bool)]))
    ok = diag - off >= 0.2 and t.elapsed < t.limit
    report(9, ok, f"F1 rows=test cols=train {np.round(tm.values, 3).tolist()}, "
                  f"diag-off={diag - off:.3f}; {t.elapsed:.1f}s")
    assert diag - off >= 0.2
    assert t.elapsed < t.limit
