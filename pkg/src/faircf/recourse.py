"""Counterfactual actions: shared delta vectors over actionable features,
plausibility-bounded application, Gower distance, per-individual selection,
and CF quality scoring.

Deltas are additive in normalized units; applied values are clipped into the
observed feature range, and ordinal features snap to integer levels in raw
space. Denormalization happens only at reporting time, so user-facing action
tables show raw-unit changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .tabular import FeatureSchema

# deltas below this magnitude are treated as exactly zero
ZERO_DELTA = 1e-6


def round_half_away(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


@dataclass(frozen=True, eq=False)
class Action:
    """One CF recipe: a delta per actionable feature, in normalized units."""

    deltas: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=float)
        if d.ndim != 1:
            raise DataError("action deltas must be a flat vector")
        object.__setattr__(self, "deltas", d)

    @property
    def is_zero(self) -> bool:
        return bool((np.abs(self.deltas) < ZERO_DELTA).all())


@dataclass(frozen=True, eq=False)
class ActionSet:
    """An ordered set of candidate actions; flattens row-major to the RL state."""

    actions: tuple[Action, ...]

    @classmethod
    def from_matrix(cls, deltas: np.ndarray) -> "ActionSet":
        M = np.atleast_2d(np.asarray(deltas, dtype=float))
        return cls(tuple(Action(row.copy()) for row in M))

    @property
    def n(self) -> int:
        return len(self.actions)

    def as_matrix(self) -> np.ndarray:
        return np.stack([a.deltas for a in self.actions])

    def flatten(self) -> np.ndarray:
        return self.as_matrix().ravel()


def apply_action_many(X: np.ndarray, action: Action, schema: FeatureSchema) -> np.ndarray:
    """Apply one action to every row of a normalized matrix.

    Continuous features shift by the delta and clip into [0,1]; ordinal
    features additionally round to the nearest integer level in raw space.
    Features with |delta| < ZERO_DELTA are left untouched.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    act_idx = schema.actionable_indices
    if action.deltas.shape != (len(act_idx),):
        raise DataError(
            f"action has {action.deltas.size} deltas, schema has {len(act_idx)} actionable features"
        )
    out = X.copy()
    for pos, j in enumerate(act_idx):
        delta = action.deltas[pos]
        if abs(delta) < ZERO_DELTA:
            continue
        col = np.clip(X[:, j] + delta, 0.0, 1.0)
        if schema.kinds[j] == "ordinal":
            spec = schema.features[j]
            raw = round_half_away(col * spec.span + spec.observed_min)
            raw = np.clip(raw, spec.observed_min, spec.observed_max)
            col = (raw - spec.observed_min) / spec.span if spec.span > 0 else np.zeros_like(raw)
        out[:, j] = col
    return out


def apply_action(x: np.ndarray, action: Action, schema: FeatureSchema) -> np.ndarray:
    return apply_action_many(np.asarray(x)[None], action, schema)[0]


def gower_many(X: np.ndarray, X2: np.ndarray, schema: FeatureSchema,
               feature_indices: np.ndarray | None = None) -> np.ndarray:
    """Row-wise Gower distance between two normalized matrices.

    Continuous/ordinal features contribute |v - v'| / range (which is exactly
    the normalized absolute difference), nominal features 0/1 mismatch, and
    constant-range features 0.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X.shape != X2.shape or X.shape[1] != schema.n_features:
        raise DataError("gower operands must share the schema's shape")
    cols = range(schema.n_features) if feature_indices is None else feature_indices
    total = np.zeros(X.shape[0])
    count = 0
    for j in cols:
        if schema.kinds[j] == "nominal":
            total += (X[:, j] != X2[:, j]).astype(float)
        elif schema.spans[j] > 0:
            total += np.abs(X[:, j] - X2[:, j])
        count += 1
    return total / count


def gower(x: np.ndarray, x2: np.ndarray, schema: FeatureSchema) -> float:
    return float(gower_many(np.asarray(x)[None], np.asarray(x2)[None], schema)[0])


def evaluate_actions(X: np.ndarray, action_set: ActionSet, h,
                     schema: FeatureSchema) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Apply every action to every row.

    Returns (counterfactuals (n,m,d), valid (n,m), gower (n,m), scores (n,m)).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, m = action_set.n, X.shape[0]
    cfs = np.empty((n, m, X.shape[1]))
    valid = np.empty((n, m), dtype=bool)
    gow = np.empty((n, m))
    scores = np.empty((n, m))
    for i, a in enumerate(action_set.actions):
        cfs[i] = apply_action_many(X, a, schema)
        scores[i] = h.score(cfs[i])
        valid[i] = scores[i] >= h.threshold
        gow[i] = gower_many(X, cfs[i], schema)
    return cfs, valid, gow, scores


def select_best_many(X: np.ndarray, action_set: ActionSet, h,
                     schema: FeatureSchema) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per row: the valid action with the lowest Gower cost (ties: lowest index).

    Returns (action index or -1, selected counterfactual rows, gower costs);
    rows without any valid action keep the original instance and gower inf.
    """
    cfs, valid, gow, _ = evaluate_actions(X, action_set, h, schema)
    masked = np.where(valid, gow, np.inf)
    best = masked.argmin(axis=0)  # argmin takes the first minimum: lowest index wins ties
    has = valid.any(axis=0)
    idx = np.where(has, best, -1)
    m = X.shape[0]
    chosen = np.where(has[:, None], cfs[best, np.arange(m)], np.atleast_2d(X))
    return idx, chosen, np.where(has, masked[best, np.arange(m)], np.inf)


def select_best(x: np.ndarray, action_set: ActionSet, h,
                schema: FeatureSchema) -> tuple[int, np.ndarray, float] | None:
    """Best valid CF for one affected instance, or None when no action flips it."""
    idx, chosen, cost = select_best_many(np.asarray(x)[None], action_set, h, schema)
    if idx[0] < 0:
        return None
    return int(idx[0]), chosen[0], float(cost[0])


def best_effort_attempts(X: np.ndarray, action_set: ActionSet, h,
                         schema: FeatureSchema) -> tuple[np.ndarray, np.ndarray]:
    """One CF attempt per row: the best valid action when one exists, otherwise
    the action with the highest classifier score (an honest failed attempt)."""
    cfs, valid, gow, scores = evaluate_actions(X, action_set, h, schema)
    m = X.shape[0]
    best_valid = np.where(valid, gow, np.inf).argmin(axis=0)
    best_score = scores.argmax(axis=0)
    idx = np.where(valid.any(axis=0), best_valid, best_score)
    return idx, cfs[idx, np.arange(m)]


@dataclass(frozen=True)
class CfQuality:
    """Validity / plausibility / similarity / minimality / actionability over CF pairs."""

    validity: float
    plausibility: float
    similarity: float
    minimality: float
    actionability: bool

    def to_dict(self) -> dict:
        return {
            "validity": self.validity,
            "plausibility": self.plausibility,
            "similarity": self.similarity,
            "minimality": self.minimality,
            "actionability": self.actionability,
        }


def cf_quality(X: np.ndarray, X_cf: np.ndarray, h, ae, schema: FeatureSchema,
               target: int = 1) -> CfQuality:
    """Score (original, counterfactual) pairs of normalized instances.

    Minimality counts features whose raw (denormalized) value changed, so a
    tiny delta that rounds away does not count as a change.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X_cf = np.atleast_2d(np.asarray(X_cf, dtype=float))
    if X.shape[0] == 0:
        raise DataError("cf_quality needs at least one pair")
    if X.shape != X_cf.shape:
        raise DataError("pair matrices must have identical shapes")
    changed = schema.denormalize(X) != schema.denormalize(X_cf)
    non_actionable = np.setdiff1d(np.arange(schema.n_features), schema.actionable_indices)
    return CfQuality(
        validity=float((h.predict(X_cf) == target).mean()),
        plausibility=float(ae.reconstruction_errors(X_cf).mean()),
        similarity=float(gower_many(X, X_cf, schema).mean()),
        minimality=float(changed.sum(axis=1).mean()),
        actionability=not changed[:, non_actionable].any(),
    )


def action_table(action_set: ActionSet, schema: FeatureSchema) -> list[dict[str, float]]:
    """Raw-unit view of each action: feature name -> denormalized delta (non-zero only)."""
    rows = []
    act_idx = schema.actionable_indices
    for a in action_set.actions:
        row = {}
        for pos, j in enumerate(act_idx):
            if abs(a.deltas[pos]) >= ZERO_DELTA:
                row[schema.names[j]] = float(a.deltas[pos] * schema.spans[j])
        rows.append(row)
    return rows
