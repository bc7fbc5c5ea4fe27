"""Nearest-unlike-neighbor style counterfactual baseline.

For an affected instance, find the closest favorably-classified instance by
Gower distance over the actionable features, then copy one actionable feature
value at a time (the copy that most increases the classifier's score) until
the prediction flips or everything has been copied. Copied values come from
real instances, so baseline CFs are in-range and actionable by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .recourse import gower_many
from .tabular import Dataset, FeatureSchema


@dataclass(eq=False)
class NunIndex:
    """Pool of favorably-classified instances (normalized), ready for lookup."""

    pool: np.ndarray


def build_nun_index(ds: Dataset, h) -> NunIndex:
    pred = np.asarray(h.predict_dataset(ds))
    pool = ds.X_norm[pred == 1]
    if pool.shape[0] == 0:
        raise DataError("favorable pool is empty; no instance is predicted 1")
    return NunIndex(pool)


def _greedy_copy(x: np.ndarray, index: NunIndex, h,
                 schema: FeatureSchema) -> tuple[np.ndarray, int, bool]:
    """Returns (final instance, changed-feature count, prediction flipped)."""
    act = schema.actionable_indices
    tiled = np.broadcast_to(x, index.pool.shape)
    dists = gower_many(tiled, index.pool, schema, feature_indices=act)
    neighbor = index.pool[int(dists.argmin())]

    cur = x.copy()
    remaining = [int(j) for j in act if neighbor[j] != cur[j]]
    while remaining and h.predict(cur[None])[0] != 1:
        best_j, best_score = remaining[0], -np.inf
        for j in remaining:
            trial = cur.copy()
            trial[j] = neighbor[j]
            s = float(h.score(trial[None])[0])
            if s > best_score:
                best_j, best_score = j, s
        cur[best_j] = neighbor[best_j]
        remaining.remove(best_j)

    changed = int((cur != x).sum())
    valid = bool(h.predict(cur[None])[0] == 1)
    return cur, changed, valid


def nun_counterfactual(x: np.ndarray, index: NunIndex, h,
                       schema: FeatureSchema) -> tuple[np.ndarray, int] | None:
    """Greedy score-ascent copy from the nearest favorable neighbor.

    Returns (counterfactual, changed-feature count), or None when even the
    full actionable copy never flips the prediction.
    """
    cur, changed, valid = _greedy_copy(np.asarray(x, dtype=float), index, h, schema)
    if not valid:
        return None
    return cur, changed


def nun_batch(X: np.ndarray, index: NunIndex, h,
              schema: FeatureSchema) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All greedy attempts (including failed ones) for a population matrix.

    Returns (attempt matrix, changed counts, valid flags); failed attempts are
    the full-copy end states, which lets quality metrics count them as invalid.
    """
    attempts = np.empty_like(X)
    changed = np.empty(X.shape[0], dtype=int)
    valid = np.empty(X.shape[0], dtype=bool)
    for i, x in enumerate(X):
        attempts[i], changed[i], valid[i] = _greedy_copy(x, index, h, schema)
    return attempts, changed, valid
