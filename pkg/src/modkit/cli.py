"""``modkit`` command-line interface.

Every option can also come from a JSON file given with ``--config``; keys
are the option names with dashes or underscores.  Options on the command
line override the file.

Exit codes: 0 success, 2 input or schema error, 3 degenerate data,
4 internal invariant violation.
"""

import argparse
import json
import secrets
import sys

from . import __version__
from .errors import InputError, ModkitError
from .evaluation import repeated_evaluation, transfer_matrix
from .forest import ForestParams
from .importance import elbow_subset_size, rank_features, select_optimal_subset
from .info import (
    JointPmf,
    conditional_mutual_information,
    empirical_joint,
    entropy,
    is_modulator,
    is_robust_modulator,
    mutual_information,
)
from .io import (
    dumps,
    load_csv,
    load_schema,
    read_json,
    schema_for,
    write_dataset_csv,
    write_json,
    write_report,
)
from .synth import Scenario, ScenarioSpec, generate

# keys never embedded in reports: they must not change the output bytes
_UNRECORDED = {"out", "truth", "schema_out", "csv_out", "json_out", "threads", "config", "command"}

_FOREST_DEFAULTS = {
    "trees": 100,
    "max_features": "sqrt",
    "min_samples_split": 2,
    "max_depth": None,
    "no_bootstrap": False,
}

DEFAULTS = {
    "simulate": {
        "scenario": None, "n_samples": 200, "n_noise": 0, "effect_size": 3.0, "noise_sd": 1.0,
        "class_balance": 0.5, "flip_prob": 0.1, "n_informative": 4, "n_strata": 2,
        "out": None, "truth": None, "schema_out": None, "seed": None,
    },
    "modulator-test": {
        "data": None, "schema": None, "target": None, "features": None, "repetitions": 100,
        "seed": None, "out": None, "csv_out": None, "train_fraction": 0.75, "positive": None,
        "stratified_split": False, "threads": 1, **_FOREST_DEFAULTS,
    },
    "select-features": {
        "data": None, "schema": None, "target": None, "forests": 100, "permutations": 10,
        "top": 4, "elbow": False, "held_out": False, "seed": None, "out": None, "csv_out": None,
        "train_fraction": 0.75, "threads": 1, **_FOREST_DEFAULTS,
    },
    "transfer": {
        "data": None, "schema": None, "stratum": None, "target": None, "repetitions": 100,
        "top": 4, "forests": 100, "permutations": 10, "no_select": False, "seed": None,
        "out": None, "json_out": None, "train_fraction": 0.75, "positive": None, "threads": 1,
        **_FOREST_DEFAULTS,
    },
    "mi": {
        "data": None, "schema": None, "axes": None, "bins": 4, "eps": None, "out": None,
    },
    "exact-mi": {
        "pmf": None, "a": None, "b": None, "given": None, "eps": 1e-9, "out": None,
    },
}

REQUIRED = {
    "simulate": ["scenario", "out"],
    "modulator-test": ["data", "target", "out"],
    "select-features": ["data", "target", "out"],
    "transfer": ["data", "stratum", "target", "out"],
    "mi": ["data", "axes"],
    "exact-mi": ["pmf", "a", "b"],
}


def _max_features(text):
    if text in ("sqrt", "all"):
        return text
    return int(text)


def _add_forest_options(p):
    g = p.add_argument_group("forest")
    g.add_argument("--trees", type=int, help="trees per forest (default 100)")
    g.add_argument("--max-features", type=_max_features, help="'sqrt' (default), 'all' or an int")
    g.add_argument("--min-samples-split", type=int, help="default 2")
    g.add_argument("--max-depth", type=int, help="default unlimited")
    g.add_argument("--no-bootstrap", action="store_true", default=argparse.SUPPRESS)


def build_parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with option values")

    parser = argparse.ArgumentParser(prog="modkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"modkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, help):
        return sub.add_parser(name, help=help, parents=[common], argument_default=argparse.SUPPRESS)

    p = cmd("simulate", "generate a synthetic population with known ground truth")
    p.add_argument("--scenario", choices=[s.value for s in Scenario])
    p.add_argument("--n-samples", type=int)
    p.add_argument("--n-noise", type=int, help="number of pure-noise features")
    p.add_argument("--effect-size", type=float)
    p.add_argument("--noise-sd", type=float)
    p.add_argument("--class-balance", type=float)
    p.add_argument("--flip-prob", type=float)
    p.add_argument("--n-informative", type=int)
    p.add_argument("--n-strata", type=int)
    p.add_argument("--out", help="CSV output")
    p.add_argument("--truth", help="ground-truth JSON output")
    p.add_argument("--schema-out", help="schema JSON output (category order, kinds)")
    p.add_argument("--seed", type=int)

    def data_options(p):
        p.add_argument("--data", help="input CSV")
        p.add_argument("--schema", help="schema JSON (default: infer)")

    p = cmd("modulator-test", "repeated train/test evaluation and empirical-modulator verdict")
    data_options(p)
    p.add_argument("--target")
    p.add_argument("--features", help="comma-separated feature subset")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--positive", help="positive category label for binary F1")
    p.add_argument("--stratified-split", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="JSON report")
    p.add_argument("--csv-out", help="per-repetition CSV")
    p.add_argument("--threads", type=int)
    _add_forest_options(p)

    p = cmd("select-features", "permutation-importance ranking and top-m subset")
    data_options(p)
    p.add_argument("--target")
    p.add_argument("--forests", type=int)
    p.add_argument("--permutations", type=int)
    p.add_argument("--top", type=int, help="subset size m (default 4)")
    p.add_argument("--elbow", action="store_true", help="choose m at the largest gap in sorted drops")
    p.add_argument("--held-out", action="store_true", help="score permutations on test rows only")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="JSON ranking")
    p.add_argument("--csv-out", help="ranking CSV")
    p.add_argument("--threads", type=int)
    _add_forest_options(p)

    p = cmd("transfer", "cross-stratum F1 matrix (rows = test, columns = train)")
    data_options(p)
    p.add_argument("--stratum")
    p.add_argument("--target")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--top", type=int)
    p.add_argument("--forests", type=int, help="forests for per-stratum feature selection")
    p.add_argument("--permutations", type=int)
    p.add_argument("--no-select", action="store_true", help="use all features in every stratum")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--positive")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV matrix")
    p.add_argument("--json-out", help="JSON matrix")
    p.add_argument("--threads", type=int)
    _add_forest_options(p)

    p = cmd("mi", "plug-in MI / CMI from binned data")
    data_options(p)
    p.add_argument("--axes", help="a,b[,given]; join several columns in one set with '+'")
    p.add_argument("--bins", type=int)
    p.add_argument("--eps", type=float, help="threshold for the modulator verdicts")
    p.add_argument("--out")

    p = cmd("exact-mi", "MI / CMI of an explicit joint pmf")
    p.add_argument("--pmf", help="pmf JSON: {axes: [{name, cardinality}], probs: nested list}")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--given")
    p.add_argument("--eps", type=float)
    p.add_argument("--out")
    return parser


def resolve(argv):
    """Parse ``argv`` and merge defaults, config file and explicit flags."""
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    config = {}
    if "config" in ns:
        raw = read_json(ns.pop("config"))
        if not isinstance(raw, dict):
            raise InputError("config file must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in raw.items()}
    defaults = DEFAULTS[command]
    unknown = set(config) - set(defaults)
    if unknown:
        raise InputError(f"unknown config keys for {command}: {sorted(unknown)}")
    opts = {**defaults, **config, **ns}
    missing = [k for k in REQUIRED[command] if opts.get(k) in (None, "")]
    if missing:
        raise InputError(f"{command}: missing required option(s): "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))
    return command, opts


def _meta(command, opts):
    return {"tool": "modkit", "version": __version__, "command": command,
            "config": {k: v for k, v in sorted(opts.items()) if k not in _UNRECORDED}}


def _seed(opts):
    if opts.get("seed") is None:
        opts["seed"] = secrets.randbits(63)
    return int(opts["seed"])


def _forest_params(opts):
    mf = opts["max_features"]
    return ForestParams(n_trees=opts["trees"], max_features=None if mf == "all" else mf,
                        min_samples_split=opts["min_samples_split"], max_depth=opts["max_depth"],
                        bootstrap=not opts["no_bootstrap"])


def _dataset(opts):
    schema = load_schema(opts["schema"]) if opts.get("schema") else None
    return load_csv(opts["data"], schema)


def _positive(ds, target, label):
    cats = ds.factor(target).categories
    if label is None:
        return 1
    if label not in cats:
        raise InputError(f"positive class {label!r} not a category of {target!r}")
    return cats.index(label)


def _split(text):
    if text is None:
        return None
    if isinstance(text, list):
        return text
    return [t.strip() for t in text.split(",") if t.strip()]


def run_simulate(opts):
    spec = ScenarioSpec(opts["scenario"], n_samples=opts["n_samples"], n_noise_features=opts["n_noise"],
                        effect_size=opts["effect_size"], noise_sd=opts["noise_sd"],
                        class_balance=opts["class_balance"], seed=_seed(opts),
                        flip_prob=opts["flip_prob"], n_informative=opts["n_informative"],
                        n_strata=opts["n_strata"])
    ds, truth = generate(spec)
    write_dataset_csv(ds, opts["out"])
    if opts.get("truth"):
        doc = truth.to_dict()
        doc["meta"] = _meta("simulate", opts)
        write_json(doc, opts["truth"])
    if opts.get("schema_out"):
        write_json(schema_for(ds).to_dict(), opts["schema_out"])


def run_modulator_test(opts):
    ds = _dataset(opts)
    seed = _seed(opts)
    report = repeated_evaluation(
        ds, opts["target"], _split(opts["features"]), _forest_params(opts), opts["repetitions"], seed,
        train_fraction=opts["train_fraction"], positive=_positive(ds, opts["target"], opts["positive"]),
        stratified=opts["stratified_split"], n_jobs=opts["threads"])
    report = type(report)(**{**report.__dict__, "meta": _meta("modulator-test", opts)})
    write_report(report, opts["out"], "json")
    if opts.get("csv_out"):
        write_report(report, opts["csv_out"], "csv")


def run_select_features(opts):
    ds = _dataset(opts)
    seed = _seed(opts)
    ranking = rank_features(ds, opts["target"], _forest_params(opts), opts["forests"], opts["permutations"],
                            seed, train_fraction=opts["train_fraction"], held_out=opts["held_out"],
                            n_jobs=opts["threads"])
    m = elbow_subset_size(ranking) if opts["elbow"] else opts["top"]
    doc = ranking.to_dict()
    doc["m"] = m
    doc["m_rule"] = "elbow" if opts["elbow"] else "top"
    doc["selected"] = select_optimal_subset(ranking, m)
    doc["meta"] = _meta("select-features", opts)
    write_json(doc, opts["out"])
    if opts.get("csv_out"):
        write_report(ranking, opts["csv_out"], "csv")


def run_transfer(opts):
    ds = _dataset(opts)
    seed = _seed(opts)
    tm = transfer_matrix(ds, opts["stratum"], opts["target"], _forest_params(opts), opts["repetitions"], seed,
                         subset_size=opts["top"], select=not opts["no_select"],
                         importance_forests=opts["forests"], n_permutations=opts["permutations"],
                         train_fraction=opts["train_fraction"],
                         positive=_positive(ds, opts["target"], opts["positive"]), n_jobs=opts["threads"])
    tm = type(tm)(**{**tm.__dict__, "meta": _meta("transfer", opts)})
    write_report(tm, opts["out"], "csv")
    if opts.get("json_out"):
        write_report(tm, opts["json_out"], "json")


def _axis_groups(text):
    groups = [[n.strip() for n in g.split("+") if n.strip()] for g in _split(text)]
    if len(groups) not in (2, 3) or not all(groups):
        raise InputError("--axes takes a,b or a,b,given (use '+' to join columns)")
    return groups


def _info_doc(p, a, b, given, eps):
    doc = {"a": a, "b": b, "given": given or [], "H_a": entropy(p, a), "H_b": entropy(p, b),
           "mi": mutual_information(p, a, b)}
    if given:
        doc["cmi"] = conditional_mutual_information(p, a, b, given)
    if eps is not None:
        doc["eps"] = eps
        doc["is_modulator"] = is_modulator(p, a, b, eps)
        if given:
            doc["is_robust_modulator"] = is_robust_modulator(p, a, given, b, eps)
    return doc


def run_mi(opts):
    ds = _dataset(opts)
    groups = _axis_groups(opts["axes"])
    names = [n for g in groups for n in g]
    factors = [n for n in names if n in ds.factor_names]
    features = [n for n in names if n not in ds.factor_names]
    p = empirical_joint(ds, factors, features, bins=opts["bins"])
    a, b = groups[0], groups[1]
    given = groups[2] if len(groups) == 3 else None
    doc = _info_doc(p, a, b, given, opts["eps"])
    doc["bins"] = opts["bins"]
    doc["n_samples"] = ds.n_samples
    doc["meta"] = _meta("mi", opts)
    _emit(doc, opts.get("out"))


def run_exact_mi(opts):
    p = JointPmf.from_dict(read_json(opts["pmf"]))
    a = [n.strip() for n in opts["a"].split("+")]
    b = [n.strip() for n in opts["b"].split("+")]
    given = [n.strip() for n in opts["given"].split("+")] if opts.get("given") else None
    doc = _info_doc(p, a, b, given, opts["eps"])
    doc["meta"] = _meta("exact-mi", opts)
    _emit(doc, opts.get("out"))


def _emit(doc, out):
    if out:
        write_json(doc, out)
    else:
        sys.stdout.write(dumps(doc))


COMMANDS = {
    "simulate": run_simulate,
    "modulator-test": run_modulator_test,
    "select-features": run_select_features,
    "transfer": run_transfer,
    "mi": run_mi,
    "exact-mi": run_exact_mi,
}


def main(argv=None):
    try:
        command, opts = resolve(argv)
        COMMANDS[command](opts)
    except ModkitError as exc:
        message = exc.args[0] if len(exc.args) == 1 else exc
        print(f"modkit: error: {message}", file=sys.stderr)
        return exc.exit_code
    except json.JSONDecodeError as exc:
        print(f"modkit: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"modkit: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
