"""Shared builders for tests: schemas, synthetic populations, stub models."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from faircf.fairness import Population
from faircf.model import LogisticModel
from faircf.tabular import Dataset, FeatureSchema, FeatureSpec


def make_schema(specs, protected="grp", target="y") -> FeatureSchema:
    return FeatureSchema(tuple(FeatureSpec(*s) for s in specs), protected, target)


def two_feature_schema() -> FeatureSchema:
    """Two unit-range continuous actionable features plus a binary protected one."""
    return make_schema([
        ("income", "continuous", 0.0, 1.0, True),
        ("credit", "continuous", 0.0, 1.0, True),
        ("grp", "nominal", 0.0, 1.0, False),
    ])


def sum_ge_one_classifier(n_features: int = 3) -> LogisticModel:
    """predict 1 iff income + credit >= 1 (extra features ignored)."""
    w = np.zeros(n_features)
    w[0] = w[1] = 1.0
    return LogisticModel(w, -1.0)


def population_from_points(points0, points1, schema=None) -> Population:
    """Build a population directly from normalized (income, credit) pairs per group."""
    schema = schema or two_feature_schema()
    p0 = np.asarray(points0, dtype=float)
    p1 = np.asarray(points1, dtype=float)
    X = np.zeros((len(p0) + len(p1), schema.n_features))
    X[: len(p0), :2] = p0
    X[len(p0):, :2] = p1
    X[len(p0):, schema.protected_index] = 1.0
    return Population(
        X=X,
        schema=schema,
        group0=np.arange(len(p0)),
        group1=np.arange(len(p0), len(p0) + len(p1)),
        row_ids=np.arange(len(p0) + len(p1)),
    )


def synthetic_rows(seed=0, n_per=40, neg0=(0.42, 0.42), neg1=(0.32, 0.32),
                   pos=(0.78, 0.78), noise=0.045):
    """Two-group synthetic population with injected recourse asymmetry: group-1
    negatives sit farther from the favorable region than group-0 negatives."""
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for grp, neg_center in ((0.0, neg0), (1.0, neg1)):
        for center, label in ((neg_center, 0), (pos, 1)):
            pts = np.clip(rng.normal(center, noise, size=(n_per, 2)), 0.02, 0.98)
            for p in pts:
                rows.append([p[0], p[1], grp])
                labels.append(label)
    return np.array(rows), np.array(labels)


def synthetic_dataset(seed=0, n_per=40, **kwargs) -> Dataset:
    X, y = synthetic_rows(seed=seed, n_per=n_per, **kwargs)
    specs = []
    for j, (name, kind, actionable) in enumerate(
        [("income", "continuous", True), ("credit", "continuous", True),
         ("grp", "nominal", False)]
    ):
        specs.append(FeatureSpec(name, kind, float(X[:, j].min()), float(X[:, j].max()),
                                 actionable))
    schema = FeatureSchema(tuple(specs), "grp", "y")
    return Dataset(schema, X, y, np.arange(len(y)))


def write_synthetic_csv(path: Path, seed=0, n_per=40, **kwargs) -> Path:
    X, y = synthetic_rows(seed=seed, n_per=n_per, **kwargs)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["income", "credit", "grp", "y"])
        for row, label in zip(X, y):
            writer.writerow([f"{row[0]:.6f}", f"{row[1]:.6f}", int(row[2]), int(label)])
    return path


def write_synthetic_schema(path: Path) -> Path:
    path.write_text(
        '{"features": [\n'
        '  {"name": "income", "kind": "continuous", "actionable": true},\n'
        '  {"name": "credit", "kind": "continuous", "actionable": true},\n'
        '  {"name": "grp", "kind": "nominal", "actionable": false}\n'
        '], "protected": "grp", "target": "y"}\n'
    )
    return path


def identity_autoencoder(d):
    """Autoencoder whose net is the exact identity: reconstruction error 0."""
    from faircf.model import Autoencoder
    from faircf.nets import Mlp

    net = Mlp([d, d], np.random.default_rng(0))
    net.weights[0][...] = np.eye(d)
    net.biases[0][...] = 0.0
    return Autoencoder(net, 0.0, 0.0)
