"""CSV ingestion and report serialization.

Table schema (JSON)::

    {
      "factors": ["diet", {"name": "cancer", "feasible": false,
                           "categories": ["A375", "WM47"]}],
      "features": "all",            # or ["x", ...] or [{"name": "x", "kind": "SerumMetabolite"}]
      "default_kind": "Generic",
      "delimiter": ","
    }

``"features": "all"`` takes every column that is not a factor.  Factor
categories default to order of first appearance in the file.  When no
schema is given, columns containing any non-numeric cell become factors.

Reports are written as UTF-8 JSON with a ``format`` and ``version`` key, or
as CSV with one row per repetition / ranking entry / test stratum.  JSON
numbers use Python's shortest round-trip representation; infinite ratios
are written as ``Infinity``.
"""

import csv
from dataclasses import dataclass
import json
import math
from pathlib import Path

from .data import Dataset, FactorColumn, FeatureColumn, FeatureKind
from .errors import (
    HeaderMissing,
    InputError,
    MissingValue,
    NegativeFeature,
    ParseError,
    SchemaMismatch,
    SerializationError,
)
from .evaluation import EvaluationReport, TransferMatrix
from .importance import ImportanceRanking
from .synth import GroundTruth


class IoError(InputError):
    pass


@dataclass(frozen=True)
class FactorSpec:
    name: str
    feasible: bool = False
    categories: tuple = None


@dataclass(frozen=True)
class TableSchema:
    factor_columns: tuple = ()
    feature_columns: object = "all"
    default_kind: FeatureKind = FeatureKind.GENERIC
    delimiter: str = ","

    def __post_init__(self):
        facs = tuple(f if isinstance(f, FactorSpec) else FactorSpec(f) for f in self.factor_columns)
        object.__setattr__(self, "factor_columns", facs)
        object.__setattr__(self, "default_kind", FeatureKind(self.default_kind))
        if self.feature_columns != "all":
            feats = tuple((c, self.default_kind) if isinstance(c, str) else (c[0], FeatureKind(c[1]))
                          for c in self.feature_columns)
            object.__setattr__(self, "feature_columns", feats)
            overlap = {f.name for f in facs} & {n for n, _ in feats}
            if overlap:
                raise SchemaMismatch(f"columns listed as both factor and feature: {sorted(overlap)}")
        if len(self.delimiter) != 1:
            raise SchemaMismatch("delimiter must be a single character")

    @classmethod
    def from_dict(cls, doc):
        factors = []
        for f in doc.get("factors", []):
            if isinstance(f, str):
                factors.append(FactorSpec(f))
            else:
                cats = f.get("categories")
                factors.append(FactorSpec(f["name"], bool(f.get("feasible", False)),
                                          tuple(cats) if cats is not None else None))
        feats = doc.get("features", "all")
        if feats != "all":
            feats = [c if isinstance(c, str) else (c["name"], c.get("kind", doc.get("default_kind", "Generic")))
                     for c in feats]
        try:
            return cls(tuple(factors), feats, doc.get("default_kind", "Generic"), doc.get("delimiter", ","))
        except ValueError as exc:
            if isinstance(exc, InputError):
                raise
            raise SchemaMismatch(str(exc)) from None

    def to_dict(self):
        factors = []
        for f in self.factor_columns:
            entry = {"name": f.name, "feasible": f.feasible}
            if f.categories is not None:
                entry["categories"] = list(f.categories)
            factors.append(entry)
        feats = self.feature_columns
        if feats != "all":
            feats = [{"name": n, "kind": k.value} for n, k in feats]
        return {"factors": factors, "features": feats, "default_kind": self.default_kind.value,
                "delimiter": self.delimiter}


def schema_for(ds):
    """Schema that reloads ``ds`` exactly (category order, kinds, feasibility)."""
    return TableSchema(tuple(FactorSpec(f.name, f.feasible, f.categories) for f in ds.factors),
                       tuple((f.name, f.kind) for f in ds.features))


def load_schema(path):
    return TableSchema.from_dict(read_json(path))


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def infer_schema(header, rows):
    factors = [name for j, name in enumerate(header)
               if any(r[j].strip() and not _is_number(r[j]) for r in rows)]
    return TableSchema(tuple(factors), "all")


def _read_rows(path, delimiter):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if r]
    if not rows or not any(c.strip() for c in rows[0]):
        raise HeaderMissing(f"{path}: no header row")
    header = [c.strip() for c in rows[0]]
    if any(not h for h in header) or len(set(header)) != len(header):
        raise HeaderMissing(f"{path}: header has empty or duplicate column names")
    body = rows[1:]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise SchemaMismatch(f"{path}: data row {i} has {len(r)} cells, header has {len(header)}")
    return header, body


def load_csv(path, schema=None):
    """Read a delimited table into a Dataset.

    Row numbers in errors are 0-based data-row indices (the header is not
    counted).
    """
    delimiter = schema.delimiter if schema is not None else ","
    header, body = _read_rows(path, delimiter)
    if not body:
        raise SchemaMismatch(f"{path}: no data rows")
    if schema is None:
        schema = infer_schema(header, body)
    col = {name: j for j, name in enumerate(header)}
    for f in schema.factor_columns:
        if f.name not in col:
            raise SchemaMismatch(f"factor column {f.name!r} not in {path}")
    factor_names = {f.name for f in schema.factor_columns}
    if schema.feature_columns == "all":
        feature_cols = [(n, schema.default_kind) for n in header if n not in factor_names]
    else:
        feature_cols = list(schema.feature_columns)
        for name, _ in feature_cols:
            if name not in col:
                raise SchemaMismatch(f"feature column {name!r} not in {path}")

    factors = []
    for f in schema.factor_columns:
        j = col[f.name]
        labels = []
        for i, r in enumerate(body):
            token = r[j].strip()
            if not token:
                raise MissingValue(i, f.name)
            labels.append(token)
        factors.append(FactorColumn.from_labels(f.name, labels, f.categories, f.feasible))

    features = []
    for name, kind in feature_cols:
        j = col[name]
        values = []
        for i, r in enumerate(body):
            token = r[j].strip()
            if not token:
                raise MissingValue(i, name)
            try:
                v = float(token)
            except ValueError:
                raise ParseError(i, name, token) from None
            if math.isnan(v):
                raise MissingValue(i, name)
            if math.isinf(v):
                raise ParseError(i, name, token)
            if v < 0:
                raise NegativeFeature(i, name, v)
            values.append(v)
        features.append(FeatureColumn(name, values, kind))
    return Dataset(factors, features, provenance=str(path))


def _fmt(v):
    return format(float(v), ".17g")


def write_dataset_csv(ds, path, delimiter=","):
    """Write factors (labels) then features (17 significant digits)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(ds.factor_names + ds.feature_names)
        labels = [f.labels for f in ds.factors]
        mat = ds.feature_matrix()
        for i in range(ds.n_samples):
            w.writerow([lab[i] for lab in labels] + [_fmt(v) for v in mat[i]])


# -- reports ----------------------------------------------------------------

def dumps(doc):
    try:
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    except (TypeError, ValueError) as exc:
        raise SerializationError(str(exc)) from None


def write_json(doc, path):
    text = dumps(doc)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def read_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SerializationError(f"{path}: invalid JSON ({exc})") from None


def _to_doc(report):
    if isinstance(report, dict):
        return report
    if hasattr(report, "to_dict"):
        return report.to_dict()
    raise SerializationError(f"cannot serialize {type(report).__name__}")


def _csv_rows(report):
    if isinstance(report, EvaluationReport):
        doc = report.to_dict()
        cols = ["repetition", "f1_model", "f1_baseline", "acc_model", "acc_baseline",
                "acc_ratio", "f1_ratio", "n_test", "verdict"]
        return cols, [[r[c] for c in cols] for r in doc["repetitions"]]
    if isinstance(report, TransferMatrix):
        cols = ["test\\train", *report.strata]
        return cols, [[label, *row] for label, row in zip(report.strata, report.values.tolist())]
    if isinstance(report, ImportanceRanking):
        cols = ["feature", "mean_drop", "std", "n"]
        return cols, [[e.feature_name, e.mean_accuracy_drop, e.std, e.n_measurements] for e in report.entries]
    raise SerializationError(f"no CSV layout for {type(report).__name__}")


def write_report(report, path, format="json"):
    """Write a report as JSON (any report) or CSV (evaluation, transfer, ranking)."""
    if format == "json":
        write_json(_to_doc(report), path)
        return
    if format != "csv":
        raise SerializationError(f"unknown format {format!r}")
    cols, rows = _csv_rows(report)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in rows:
                w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


_READERS = {
    "modkit.evaluation": EvaluationReport.from_dict,
    "modkit.transfer": TransferMatrix.from_dict,
    "modkit.ranking": ImportanceRanking.from_dict,
    "modkit.truth": GroundTruth.from_dict,
}


def read_report(path):
    """Load a JSON report written by :func:`write_report`."""
    doc = read_json(path)
    reader = _READERS.get(doc.get("format")) if isinstance(doc, dict) else None
    if reader is None:
        return doc
    return reader(doc)
