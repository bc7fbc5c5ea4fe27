"""K-means over the normalized affected population.

The protected attribute is excluded from the clustering space so clusters mix
both groups; the target never appears in the feature matrix. Seeding is
k-means++; Lloyd iterations run until the assignment reaches a fixpoint. An
emptied cluster is re-seeded at the point farthest from its assigned centroid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .fairness import Population


@dataclass(eq=False)
class Clustering:
    k: int
    centroids: np.ndarray  # (k, |clustering columns|)
    assignment: np.ndarray  # (m,) cluster id per population row
    inertia: float
    n_iter: int
    feature_columns: np.ndarray  # schema columns the centroids live in


def _distances_sq(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (m, k) squared euclidean distances
    return ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(m)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[c] = X[rng.integers(m)]
            continue
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r))
        idx = min(idx, m - 1)
        centroids[c] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[c]) ** 2).sum(axis=1))
    return centroids


def kmeans_fit(pop: Population, k: int = 3, seed: int = 0, max_iter: int = 100) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding; inertia is asserted
    non-increasing at every iteration."""
    schema = pop.schema
    cols = np.array([j for j in range(schema.n_features) if j != schema.protected_index])
    X = pop.X[:, cols]
    m = X.shape[0]
    if m < k:
        raise DataError(f"population of {m} cannot form {k} clusters")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(X, k, rng)
    assignment = None
    prev_inertia = np.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _distances_sq(X, centroids)
        new_assignment = d2.argmin(axis=1)
        for c in range(k):
            if (new_assignment == c).any():
                continue
            # dead centroid: plant it on the point farthest from its current one
            farthest = int(d2[np.arange(m), new_assignment].argmax())
            centroids[c] = X[farthest]
            d2 = _distances_sq(X, centroids)
            new_assignment = d2.argmin(axis=1)
        inertia = float(d2[np.arange(m), new_assignment].sum())
        if inertia > prev_inertia + 1e-9 * max(1.0, prev_inertia):
            raise RuntimeError(f"k-means inertia increased at iteration {n_iter}")
        prev_inertia = inertia
        if assignment is not None and (new_assignment == assignment).all():
            break
        assignment = new_assignment
        for c in range(k):
            centroids[c] = X[assignment == c].mean(axis=0)
    return Clustering(k, centroids, assignment, prev_inertia, n_iter, cols)


def cluster_subpopulations(clustering: Clustering, pop: Population) -> list[Population]:
    """Materialize C1..Ck as populations; their union is the whole population."""
    return [
        pop.subset(np.flatnonzero(clustering.assignment == c)) for c in range(clustering.k)
    ]


def write_assignments(clustering: Clustering, pop: Population, path: str | Path) -> None:
    lines = ["row_index,cluster_id"]
    for rid, c in zip(pop.row_ids, clustering.assignment):
        lines.append(f"{int(rid)},{int(c)}")
    Path(path).write_text("\n".join(lines) + "\n")
