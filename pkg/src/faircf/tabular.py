"""Tabular datasets: schema-validated loading, range normalization, splits,
and selection of the affected population.

Feature ranges are fitted from the full dataset before any split so that
train/test and counterfactual bounds share one range. Missing values are
rejected rather than imputed.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    EmptyPopulationError,
    ParseError,
    SchemaError,
    ValidationError,
)

KINDS = ("continuous", "ordinal", "nominal")


@dataclass(frozen=True)
class FeatureSpec:
    """One column: its kind, fitted value range, and whether a user can change it."""

    name: str
    kind: str
    observed_min: float
    observed_max: float
    actionable: bool

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.observed_min > self.observed_max:
            raise SchemaError(
                f"feature {self.name!r}: observed_min {self.observed_min} exceeds "
                f"observed_max {self.observed_max}"
            )
        if self.observed_min == self.observed_max and self.actionable:
            raise SchemaError(f"feature {self.name!r} is constant and cannot be actionable")

    @property
    def span(self) -> float:
        return self.observed_max - self.observed_min


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature list plus the protected and target designations.

    The target is a separate label column and never appears in `features`.
    Exactly one feature is protected; it must be binary in the data and is
    never actionable.
    """

    features: tuple[FeatureSpec, ...]
    protected_feature: str
    target_feature: str
    favorable_label: int = 1

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names in schema")
        if self.protected_feature not in names:
            raise SchemaError(f"protected feature {self.protected_feature!r} not in feature list")
        if self.target_feature in names:
            raise SchemaError(f"target {self.target_feature!r} must not appear in the feature list")
        if not any(f.actionable for f in self.features):
            raise SchemaError("at least one feature must be actionable")
        for f in self.features:
            if f.actionable and f.name == self.protected_feature:
                raise SchemaError("the protected feature is never actionable")

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @cached_property
    def n_features(self) -> int:
        return len(self.features)

    @cached_property
    def mins(self) -> np.ndarray:
        return np.array([f.observed_min for f in self.features], dtype=float)

    @cached_property
    def spans(self) -> np.ndarray:
        return np.array([f.span for f in self.features], dtype=float)

    @cached_property
    def protected_index(self) -> int:
        return self.names.index(self.protected_feature)

    @cached_property
    def actionable_indices(self) -> np.ndarray:
        return np.array([i for i, f in enumerate(self.features) if f.actionable], dtype=int)

    @cached_property
    def kinds(self) -> tuple[str, ...]:
        return tuple(f.kind for f in self.features)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def normalize(self, values: np.ndarray) -> np.ndarray:
        """Affine map of raw values onto [0,1] per feature; constant features map to 0."""
        safe = np.where(self.spans > 0, self.spans, 1.0)
        return (np.asarray(values, dtype=float) - self.mins) / safe

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        """Exact inverse of normalize on [0,1]; constant features map back to their value."""
        return np.asarray(values, dtype=float) * self.spans + self.mins

    def normalize_scalar(self, value: float, name: str) -> float:
        j = self.index(name)
        span = self.spans[j]
        if span == 0:
            return 0.0
        return (value - self.mins[j]) / span

    def denormalize_scalar(self, value: float, name: str) -> float:
        j = self.index(name)
        return value * self.spans[j] + self.mins[j]

    def fingerprint(self) -> str:
        """Stable hash of the schema; used to guard persisted model artifacts."""
        payload = {
            "features": [
                [f.name, f.kind, f.observed_min, f.observed_max, f.actionable]
                for f in self.features
            ],
            "protected": self.protected_feature,
            "target": self.target_feature,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable rows bound to a fitted schema.

    X holds raw feature values (one column per schema feature), y the binary
    labels, and row_ids the original CSV row positions (preserved through
    splits so external prediction tables can be joined back).
    """

    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray
    row_ids: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != self.schema.n_features:
            raise ValidationError("feature matrix shape does not match schema")
        if self.y.shape != (self.X.shape[0],) or self.row_ids.shape != (self.X.shape[0],):
            raise ValidationError("labels/row_ids length does not match rows")
        bad = ~np.isin(self.y, (0, 1))
        if bad.any():
            raise ValidationError(f"labels must be 0/1, found {self.y[bad][0]!r}")
        prot = self.X[:, self.schema.protected_index]
        if not np.isin(prot, (0.0, 1.0)).all():
            raise ValidationError(
                f"protected feature {self.schema.protected_feature!r} must be binary 0/1"
            )
        for j, f in enumerate(self.schema.features):
            col = self.X[:, j]
            if col.size and (col.min() < f.observed_min or col.max() > f.observed_max):
                raise ValidationError(
                    f"feature {f.name!r} has values outside [{f.observed_min}, {f.observed_max}]"
                )
        for arr in (self.X, self.y, self.row_ids):
            arr.flags.writeable = False  # shareable across concurrent readers

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @cached_property
    def X_norm(self) -> np.ndarray:
        return self.schema.normalize(self.X)

    def subset(self, indices: np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.schema, self.X[idx], self.y[idx], self.row_ids[idx])


@dataclass(frozen=True, eq=False)
class AffectedSet:
    """Rows currently receiving the unfavorable prediction, split by protected group."""

    parent: Dataset
    indices: np.ndarray
    group0: np.ndarray
    group1: np.ndarray


def load_schema_config(path: str | Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read schema config {path}: {exc}") from exc
    for key in ("features", "protected", "target"):
        if key not in cfg:
            raise SchemaError(f"schema config missing key {key!r}")
    if not isinstance(cfg["features"], list) or not cfg["features"]:
        raise SchemaError("schema config 'features' must be a non-empty list")
    for entry in cfg["features"]:
        for key in ("name", "kind", "actionable"):
            if key not in entry:
                raise SchemaError(f"schema config feature entry missing {key!r}: {entry}")
    return cfg


def _parse_cell(cell: str, kind: str, row: int, column: str) -> float:
    text = cell.strip()
    if not text:
        raise ParseError(f"missing value at row {row}, column {column!r}")
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"cannot parse {kind} value {cell!r} at row {row}, column {column!r}"
        ) from None


def load_csv(path: str | Path, schema_config: str | Path | dict) -> Dataset:
    """Read a headered CSV under a schema config, fitting ranges from the data.

    Explicit "min"/"max" keys in a feature entry override the fitted range.
    """
    cfg = schema_config if isinstance(schema_config, dict) else load_schema_config(schema_config)
    feature_cfgs = cfg["features"]
    target_name = cfg["target"]

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty CSV") from None
        header = [h.strip() for h in header]
        col_of = {name: i for i, name in enumerate(header)}
        wanted = [e["name"] for e in feature_cfgs] + [target_name]
        for name in wanted:
            if name not in col_of:
                raise SchemaError(f"CSV is missing column {name!r}")

        rows: list[list[float]] = []
        labels: list[float] = []
        for r, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) < len(header):
                raise ParseError(f"row {r} has {len(record)} cells, header has {len(header)}")
            values = []
            for entry in feature_cfgs:
                cell = record[col_of[entry["name"]]]
                values.append(_parse_cell(cell, entry["kind"], r, entry["name"]))
            rows.append(values)
            labels.append(_parse_cell(record[col_of[target_name]], "label", r, target_name))

    if not rows:
        raise ParseError(f"{path}: no data rows")
    X = np.array(rows, dtype=float)
    y_raw = np.array(labels)
    if not np.isin(y_raw, (0.0, 1.0)).all():
        raise ValidationError(f"target column {target_name!r} must contain only 0/1")
    y = y_raw.astype(int)

    specs = []
    for j, entry in enumerate(feature_cfgs):
        lo = float(entry.get("min", X[:, j].min()))
        hi = float(entry.get("max", X[:, j].max()))
        specs.append(FeatureSpec(entry["name"], entry["kind"], lo, hi, bool(entry["actionable"])))
    schema = FeatureSchema(tuple(specs), cfg["protected"], target_name)
    return Dataset(schema, X, y, np.arange(X.shape[0]))


def train_test_split(ds: Dataset, test_fraction: float = 0.2, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split; both halves keep the full-data schema."""
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n_rows)
    n_test = max(1, int(ds.n_rows * test_fraction))
    return ds.subset(perm[n_test:]), ds.subset(perm[:n_test])


def affected_subset(ds: Dataset, h) -> AffectedSet:
    """All rows predicted unfavorable, partitioned by the protected attribute."""
    pred = np.asarray(h.predict_dataset(ds))
    indices = np.flatnonzero(pred == 0)
    if indices.size == 0:
        raise EmptyPopulationError("no instances receive the unfavorable prediction")
    prot = ds.X[indices, ds.schema.protected_index]
    return AffectedSet(
        parent=ds,
        indices=indices,
        group0=indices[prot == 0.0],
        group1=indices[prot == 1.0],
    )
