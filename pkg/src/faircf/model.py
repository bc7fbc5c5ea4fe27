"""Binary classifiers behind a pure predict/score interface, model-level
fairness audits, and the denoising autoencoder used for plausibility scoring.

The engine is model-agnostic: it only ever calls predict/score. The built-in
model is an L2-regularized logistic regression trained by full-batch gradient
descent; external models plug in through a (row_index, score) prediction table.
"""

from __future__ import annotations

import csv
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AuditError,
    DataError,
    DegenerateLabelsError,
    DivergenceError,
    FingerprintError,
    ValidationError,
)
from .nets import Adam, Mlp
from .tabular import Dataset, FeatureSchema


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Classifier(ABC):
    """Score in [0,1] plus the thresholded predict in {0,1}.

    predict/score are pure; predict(x) = 1 iff score(x) >= threshold.
    """

    threshold: float = 0.5

    @abstractmethod
    def score(self, X: np.ndarray) -> np.ndarray:
        """Favorable-class probability for normalized feature rows."""

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.score(X) >= self.threshold).astype(int)

    def score_dataset(self, ds: Dataset) -> np.ndarray:
        return self.score(ds.X_norm)

    def predict_dataset(self, ds: Dataset) -> np.ndarray:
        return (self.score_dataset(ds) >= self.threshold).astype(int)


class LogisticModel(Classifier):
    """Linear logit over normalized features."""

    def __init__(self, weights: np.ndarray, bias: float, threshold: float = 0.5):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = float(bias)
        self.threshold = threshold
        self.loss_history: list[float] = []

    def score(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return _sigmoid(X @ self.weights + self.bias)


def logistic_loss_and_grads(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                            l2: float) -> tuple[float, np.ndarray, float]:
    """Mean cross-entropy + l2*||w||^2 with its exact gradients."""
    z = X @ w + b
    # log(1 + e^z) - y*z, computed stably
    ce = np.where(z > 0, z + np.log1p(np.exp(-z)), np.log1p(np.exp(z))) - y * z
    loss = float(ce.mean() + l2 * np.dot(w, w))
    dz = (_sigmoid(z) - y) / len(y)
    dw = X.T @ dz + 2.0 * l2 * w
    db = float(dz.sum())
    return loss, dw, db


def train_classifier(train: Dataset, lr: float = 0.5, epochs: int = 500,
                     l2: float = 1e-3) -> LogisticModel:
    """Full-batch gradient descent with backtracking, so the training loss is
    non-increasing over epochs by construction."""
    X, y = train.X_norm, train.y.astype(float)
    if len(np.unique(train.y)) < 2:
        raise DegenerateLabelsError("training data contains a single class")
    w = np.zeros(X.shape[1])
    b = 0.0
    history = []
    for _ in range(epochs):
        loss, dw, db = logistic_loss_and_grads(w, b, X, y, l2)
        history.append(loss)
        step = lr
        while step >= 1e-12:
            w2, b2 = w - step * dw, b - step * db
            if logistic_loss_and_grads(w2, b2, X, y, l2)[0] <= loss + 1e-12:
                break
            step *= 0.5
        w, b = w2, b2
    history.append(logistic_loss_and_grads(w, b, X, y, l2)[0])
    model = LogisticModel(w, b)
    model.loss_history = history
    return model


class TableClassifier(Classifier):
    """Prediction-file backend: scores keyed by original row id.

    Only rows of the bound dataset can be scored; arbitrary instances (and
    therefore counterfactual search) are rejected for this backend.
    """

    def __init__(self, scores: dict[int, float], threshold: float = 0.5):
        self.scores = dict(scores)
        self.threshold = threshold

    def score(self, X: np.ndarray) -> np.ndarray:
        raise DataError("prediction-table backend cannot score unseen instances")

    def score_dataset(self, ds: Dataset) -> np.ndarray:
        out = np.empty(ds.n_rows)
        for i, rid in enumerate(ds.row_ids):
            try:
                out[i] = self.scores[int(rid)]
            except KeyError:
                raise DataError(f"prediction table has no score for row {int(rid)}") from None
        return out


def load_prediction_table(path: str | Path, threshold: float = 0.5) -> TableClassifier:
    """Read a (row_index, score) CSV; a non-numeric first row is treated as a header."""
    scores: dict[int, float] = {}
    with open(path, newline="") as fh:
        for r, record in enumerate(csv.reader(fh)):
            if len(record) < 2:
                continue
            try:
                rid, s = int(record[0]), float(record[1])
            except ValueError:
                if r == 0:
                    continue
                raise DataError(f"{path}: cannot parse prediction row {r}: {record}") from None
            if not 0.0 <= s <= 1.0:
                raise ValidationError(f"{path}: score {s} out of [0,1] for row {rid}")
            scores[rid] = s
    if not scores:
        raise DataError(f"{path}: prediction table is empty")
    return TableClassifier(scores, threshold)


@dataclass(frozen=True)
class ModelFairnessAudit:
    """Demographic-parity / equalized-odds differences plus standard metrics."""

    dp_difference: float
    eo_difference: float
    accuracy: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {
            "dp_difference": self.dp_difference,
            "eo_difference": self.eo_difference,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _rate(num: int, den: int) -> float:
    return num / den if den else 0.0


def audit_fairness(h: Classifier, test: Dataset) -> ModelFairnessAudit:
    """Audit predictions on the given split across the two protected groups."""
    prot = test.X[:, test.schema.protected_index]
    masks = [prot == 0.0, prot == 1.0]
    for g, mask in enumerate(masks):
        if not mask.any():
            raise AuditError(f"protected group {g} is absent from the audit split")
    pred = np.asarray(h.predict_dataset(test))
    y = test.y

    pos_rates, tprs, fprs = [], [], []
    for mask in masks:
        yp, yt = pred[mask], y[mask]
        pos_rates.append(float(yp.mean()))
        tprs.append(_rate(int(((yp == 1) & (yt == 1)).sum()), int((yt == 1).sum())))
        fprs.append(_rate(int(((yp == 1) & (yt == 0)).sum()), int((yt == 0).sum())))

    tp = int(((pred == 1) & (y == 1)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    precision = _rate(tp, tp + fp)
    recall = _rate(tp, tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return ModelFairnessAudit(
        dp_difference=abs(pos_rates[0] - pos_rates[1]),
        eo_difference=max(abs(tprs[0] - tprs[1]), abs(fprs[0] - fprs[1])),
        accuracy=float((pred == y).mean()),
        precision=precision,
        recall=recall,
        f1=f1,
    )


@dataclass(eq=False)
class Autoencoder:
    """Denoising reconstruction model over normalized feature vectors.

    Lower reconstruction error means the instance sits closer to the training
    distribution; the squared error is the plausibility score for CFs.
    """

    net: Mlp
    noise_sigma: float
    train_error: float

    def reconstruct(self, X: np.ndarray) -> np.ndarray:
        return self.net.forward(np.atleast_2d(np.asarray(X, dtype=float)))

    def reconstruction_errors(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.net.sizes[0]:
            raise DataError(f"expected {self.net.sizes[0]} features, got {X.shape[1]}")
        diff = X - self.net.forward(X)
        return (diff**2).sum(axis=1)


def plausibility(ae: Autoencoder, x_cf: np.ndarray) -> float:
    """Squared Euclidean reconstruction error of a single normalized instance."""
    x = np.asarray(x_cf, dtype=float)
    if x.ndim != 1:
        raise DataError("plausibility expects a single instance vector")
    return float(ae.reconstruction_errors(x[None])[0])


def autoencoder_loss_and_grads(net: Mlp, noisy: np.ndarray,
                               clean: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean squared reconstruction error over all entries, with parameter grads."""
    out = net.forward(noisy, cache=True)
    err = out - clean
    loss = float((err**2).mean())
    grads, _ = net.backward(2.0 * err / err.size)
    return loss, grads


def train_autoencoder(train: Dataset, hidden_dims: tuple[int, ...] | None = None,
                      noise_sigma: float = 0.1, lr: float = 1e-3, epochs: int = 200,
                      seed: int = 0) -> Autoencoder:
    """Fit the denoiser on Gaussian-noised normalized inputs (full-batch Adam)."""
    X = train.X_norm
    d = X.shape[1]
    if hidden_dims is None:
        hidden_dims = (math.ceil(d / 2), math.ceil(d / 4))
    rng = np.random.default_rng(seed)
    net = Mlp([d, *hidden_dims, d], rng)
    opt = Adam(net.parameters(), lr)
    for epoch in range(epochs):
        noisy = X + noise_sigma * rng.standard_normal(X.shape)
        loss, grads = autoencoder_loss_and_grads(net, noisy, X)
        if not np.isfinite(loss):
            raise DivergenceError(
                f"autoencoder loss became non-finite at epoch {epoch}; try a smaller lr"
            )
        opt.step(net.parameters(), grads)
    diff = X - net.forward(X)
    return Autoencoder(net, noise_sigma, float(((diff**2).sum(axis=1)).mean()))


def save_classifier(model: LogisticModel, path: str | Path, schema: FeatureSchema) -> None:
    payload = {
        "kind": "logistic",
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "threshold": model.threshold,
        "schema_fingerprint": schema.fingerprint(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_classifier(path: str | Path, schema: FeatureSchema) -> LogisticModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema_fingerprint") != schema.fingerprint():
        raise FingerprintError(f"{path}: saved model does not match this schema")
    return LogisticModel(np.array(payload["weights"]), payload["bias"], payload["threshold"])
