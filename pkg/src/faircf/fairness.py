"""Recourse-fairness metrics over shared action sets.

An action's effectiveness for a group is the fraction of the group whose
prediction flips to favorable under that action (its coverage). The
individual (micro) variant lets each person use any action that works for
them; the group (macro) variant scores the best single shared action. Equal
effectiveness compares those values across the two protected groups; equal
choice of recourse compares how many actions clear a per-group coverage
threshold phi.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import EmptyPopulationError
from .recourse import Action, ActionSet, apply_action_many, evaluate_actions
from .tabular import AffectedSet, Dataset, FeatureSchema


@dataclass(frozen=True, eq=False)
class Population:
    """Affected individuals bound to one schema: normalized features plus the
    protected-group split (row positions within X)."""

    X: np.ndarray
    schema: FeatureSchema
    group0: np.ndarray
    group1: np.ndarray
    row_ids: np.ndarray

    @classmethod
    def from_affected(cls, ds: Dataset, affected: AffectedSet) -> "Population":
        pos_of = {int(idx): p for p, idx in enumerate(affected.indices)}
        return cls(
            X=ds.X_norm[affected.indices],
            schema=ds.schema,
            group0=np.array([pos_of[int(i)] for i in affected.group0], dtype=int),
            group1=np.array([pos_of[int(i)] for i in affected.group1], dtype=int),
            row_ids=ds.row_ids[affected.indices],
        )

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @cached_property
    def all_indices(self) -> np.ndarray:
        return np.arange(self.m)

    def subset(self, positions: np.ndarray) -> "Population":
        positions = np.asarray(positions, dtype=int)
        inside = set(positions.tolist())
        remap = {int(p): i for i, p in enumerate(positions)}
        g0 = np.array([remap[int(p)] for p in self.group0 if int(p) in inside], dtype=int)
        g1 = np.array([remap[int(p)] for p in self.group1 if int(p) in inside], dtype=int)
        return Population(self.X[positions], self.schema, g0, g1, self.row_ids[positions])


def _require_group(group: np.ndarray) -> np.ndarray:
    group = np.asarray(group, dtype=int)
    if group.size == 0:
        raise EmptyPopulationError("metric requires a non-empty group")
    return group


def effectiveness(action: Action, group: np.ndarray, h, pop: Population) -> float:
    """Eq-style coverage: fraction of the group flipped to favorable by this action."""
    group = _require_group(group)
    cf = apply_action_many(pop.X[group], action, pop.schema)
    return float((h.predict(cf) == 1).mean())


def micro_effectiveness(action_set: ActionSet, group: np.ndarray, h, pop: Population) -> float:
    """Fraction of the group for whom at least one action achieves recourse."""
    group = _require_group(group)
    _, valid, _, _ = evaluate_actions(pop.X[group], action_set, h, pop.schema)
    return float(valid.any(axis=0).mean())


def macro_effectiveness(action_set: ActionSet, group: np.ndarray, h,
                        pop: Population) -> tuple[float, int]:
    """Best single shared action's coverage; ties resolve to the lowest index."""
    group = _require_group(group)
    _, valid, _, _ = evaluate_actions(pop.X[group], action_set, h, pop.schema)
    effs = valid.mean(axis=1)
    best = int(effs.argmax())  # argmax takes the first maximum
    return float(effs[best]), best


def ee_gaps(action_set: ActionSet, g0: np.ndarray, g1: np.ndarray, h,
            pop: Population) -> tuple[float, float]:
    """Equal-effectiveness disparities: (|micro0 - micro1|, |macro0 - macro1|)."""
    micro_gap = abs(
        micro_effectiveness(action_set, g0, h, pop) - micro_effectiveness(action_set, g1, h, pop)
    )
    macro_gap = abs(
        macro_effectiveness(action_set, g0, h, pop)[0]
        - macro_effectiveness(action_set, g1, h, pop)[0]
    )
    return micro_gap, macro_gap


def effective_action_counts(action_set: ActionSet, g0: np.ndarray, g1: np.ndarray, h,
                            pop: Population, phi: float) -> tuple[int, int, int]:
    """Per group, how many actions reach coverage >= phi; plus the absolute difference.

    Equal choice of recourse holds when the difference is 0 (and both counts
    meet the configured minimum).
    """
    if not 0.0 < phi <= 1.0:
        raise ValueError("phi must be in (0, 1]")
    a0 = sum(1 for a in action_set.actions if effectiveness(a, g0, h, pop) >= phi)
    a1 = sum(1 for a in action_set.actions if effectiveness(a, g1, h, pop) >= phi)
    return a0, a1, abs(a0 - a1)


def active_actions(action_set: ActionSet, group_all: np.ndarray, h, pop: Population,
                   alpha: float) -> int:
    """Count non-zero actions whose coverage over the whole population is >= alpha."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    return sum(
        1
        for a in action_set.actions
        if not a.is_zero and effectiveness(a, group_all, h, pop) >= alpha
    )


@dataclass(frozen=True)
class FairnessSnapshot:
    """All reward/stopping bookkeeping for one action set on one population.

    sr0/sr1 follow the scenario's success-rate mode (micro or macro); raw
    micro/macro values for both groups are always carried alongside.
    """

    sr0: float
    sr1: float
    asr: float
    pd: float
    micro_eff0: float
    micro_eff1: float
    macro_eff0: float
    macro_eff1: float
    active_count: float
    a0_count: float
    a1_count: float
    ad: float
    mean_gower: float
    n_actions: int

    def scaled_counts(self) -> "FairnessSnapshot":
        """Copy with action counts divided by n, so count-based reward terms stay
        comparable across different action-set sizes."""
        n = max(self.n_actions, 1)
        return dataclasses.replace(
            self,
            active_count=self.active_count / n,
            a0_count=self.a0_count / n,
            a1_count=self.a1_count / n,
            ad=self.ad / n,
        )

    def to_dict(self) -> dict:
        return {
            "sr0": self.sr0,
            "sr1": self.sr1,
            "asr": self.asr,
            "pd": self.pd,
            "micro_eff0": self.micro_eff0,
            "micro_eff1": self.micro_eff1,
            "macro_eff0": self.macro_eff0,
            "macro_eff1": self.macro_eff1,
            "active_actions": self.active_count,
            "a0_count": self.a0_count,
            "a1_count": self.a1_count,
            "ad": self.ad,
            "mean_gower": self.mean_gower,
            "n_actions": self.n_actions,
        }


def compute_snapshot(action_set: ActionSet, pop: Population, h, sr_mode: str,
                     phi: float, alpha: float) -> FairnessSnapshot:
    """Single-pass evaluation of every snapshot field for one action set.

    The mean Gower term averages, over individuals with any valid action, the
    cost of their cheapest valid action; it is 0 when nobody has recourse yet.
    """
    g0 = _require_group(pop.group0)
    g1 = _require_group(pop.group1)
    _, valid, gow, _ = evaluate_actions(pop.X, action_set, h, pop.schema)

    micro = [float(valid[:, g].any(axis=0).mean()) for g in (g0, g1)]
    effs = np.stack([valid[:, g0].mean(axis=1), valid[:, g1].mean(axis=1)], axis=1)  # (n, 2)
    macro = [float(effs[:, 0].max()), float(effs[:, 1].max())]

    if sr_mode == "micro":
        sr0, sr1 = micro
    elif sr_mode == "macro":
        sr0, sr1 = macro
    else:
        raise ValueError(f"unknown sr_mode {sr_mode!r}")

    has = valid.any(axis=0)
    best_cost = np.where(valid, gow, np.inf).min(axis=0)
    mean_gower = float(best_cost[has].mean()) if has.any() else 0.0

    nonzero = np.array([not a.is_zero for a in action_set.actions])
    eff_all = valid.mean(axis=1)
    act = int((nonzero & (eff_all >= alpha)).sum())
    a0 = int((effs[:, 0] >= phi).sum())
    a1 = int((effs[:, 1] >= phi).sum())

    return FairnessSnapshot(
        sr0=sr0,
        sr1=sr1,
        asr=(sr0 + sr1) / 2.0,
        pd=abs(sr0 - sr1),
        micro_eff0=micro[0],
        micro_eff1=micro[1],
        macro_eff0=macro[0],
        macro_eff1=macro[1],
        active_count=act,
        a0_count=a0,
        a1_count=a1,
        ad=abs(a0 - a1),
        mean_gower=mean_gower,
        n_actions=action_set.n,
    )
