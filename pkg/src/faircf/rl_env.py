"""The recourse-search MDP.

State: the flattened n x l delta matrix (n candidate actions over l actionable
features). Agent action: a 2-vector in [-1,1]^2 whose first component selects
one (action, feature) slot and whose second component increments that delta.
Rewards implement the equal-effectiveness and equal-choice-of-recourse
objectives; episodes stop when the configured fairness targets are met.

Per-step reward is the absolute scenario reward of the new state, not a
potential difference, so it stays aligned with the stopping predicate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, EmptyPopulationError
from .fairness import FairnessSnapshot, Population, compute_snapshot
from .recourse import ActionSet


class Scenario(str, Enum):
    INDIVIDUAL_EE = "individual-ee"
    GROUP_EE = "group-ee"
    GROUP_ECR = "group-ecr"
    HYBRID_EE_ECR = "hybrid"


def default_ee_coeffs() -> dict[str, float]:
    return {"asr": 1.0, "act": 1.0, "pd": 1.0, "sim": 1.0}


def default_ecr_coeffs() -> dict[str, float]:
    return {"a0": 1.0, "a1": 1.0, "ad": 1.0, "act": 1.0, "sim": 1.0}


@dataclass
class ScenarioSpec:
    """Which fairness objective to optimize, with its thresholds and weights.

    ecr_act_sign controls whether the active-action term enters the ECR reward
    as a bonus (+1, the default, matching its diversity-encouraging intent) or
    a penalty (-1).
    """

    scenario: Scenario
    max_actions: int = 5
    ee_coeffs: dict[str, float] = field(default_factory=default_ee_coeffs)
    ecr_coeffs: dict[str, float] = field(default_factory=default_ecr_coeffs)
    active_threshold: float = 0.1  # alpha
    phi: float = 0.6
    target_success_rate: float = 0.85
    target_pd: float = 0.10
    min_actions_per_group: int = 1
    target_ad: int = 0
    max_steps_per_episode: int = 100
    group_ee_threshold: float = 0.75
    ecr_act_sign: float = 1.0
    normalize_counts: bool = True

    def __post_init__(self):
        self.scenario = Scenario(self.scenario)
        for name, coeffs, keys in (
            ("ee_coeffs", self.ee_coeffs, default_ee_coeffs()),
            ("ecr_coeffs", self.ecr_coeffs, default_ecr_coeffs()),
        ):
            if set(coeffs) != set(keys):
                raise ConfigError(f"{name} must have exactly the keys {sorted(keys)}")
            if any(v < 0 for v in coeffs.values()):
                raise ConfigError(f"{name} must be non-negative")
        if self.max_actions < 1:
            raise ConfigError("max_actions must be >= 1")
        for name, value in (
            ("active_threshold", self.active_threshold),
            ("phi", self.phi),
            ("target_success_rate", self.target_success_rate),
            ("group_ee_threshold", self.group_ee_threshold),
        ):
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1]")
        if not 0.0 <= self.target_pd <= 1.0:
            raise ConfigError("target_pd must be in [0, 1]")
        if self.min_actions_per_group < 0 or self.target_ad < 0:
            raise ConfigError("count targets must be non-negative")
        if self.max_steps_per_episode < 1:
            raise ConfigError("max_steps_per_episode must be >= 1")
        if self.ecr_act_sign not in (1.0, -1.0):
            raise ConfigError("ecr_act_sign must be +1 or -1")

    @property
    def sr_mode(self) -> str:
        """Group-EE judges the best shared action; every other scenario lets each
        individual use any action."""
        return "macro" if self.scenario is Scenario.GROUP_EE else "micro"

    @property
    def sr_target(self) -> float:
        return self.group_ee_threshold if self.scenario is Scenario.GROUP_EE else self.target_success_rate

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.value,
            "max_actions": self.max_actions,
            "ee_coeffs": dict(self.ee_coeffs),
            "ecr_coeffs": dict(self.ecr_coeffs),
            "active_threshold": self.active_threshold,
            "phi": self.phi,
            "target_success_rate": self.target_success_rate,
            "target_pd": self.target_pd,
            "min_actions_per_group": self.min_actions_per_group,
            "target_ad": self.target_ad,
            "max_steps_per_episode": self.max_steps_per_episode,
            "group_ee_threshold": self.group_ee_threshold,
            "ecr_act_sign": self.ecr_act_sign,
            "normalize_counts": self.normalize_counts,
        }


def decode_index(a1: float, n_slots: int) -> int:
    """Map a continuous selector in [-1,1] uniformly onto {0,...,n_slots-1}."""
    idx = int(np.floor((a1 + 1.0) / 2.0 * n_slots))
    return min(max(idx, 0), n_slots - 1)


def reward_ee(snapshot, coeffs: dict[str, float]) -> float:
    """ASR*C0 + Act*C1 - PD*C2 - Sim*C3 over the given snapshot terms."""
    return (
        snapshot.asr * coeffs["asr"]
        + snapshot.active_count * coeffs["act"]
        - snapshot.pd * coeffs["pd"]
        - snapshot.mean_gower * coeffs["sim"]
    )


def reward_ecr(snapshot, coeffs: dict[str, float], act_sign: float = 1.0) -> float:
    """A0*C0 + A1*C1 - AD*C2 (+/-) Act*C3 - Sim*C4 over the given snapshot terms."""
    return (
        snapshot.a0_count * coeffs["a0"]
        + snapshot.a1_count * coeffs["a1"]
        - snapshot.ad * coeffs["ad"]
        + act_sign * snapshot.active_count * coeffs["act"]
        - snapshot.mean_gower * coeffs["sim"]
    )


def reward_hybrid(snapshot, ee_coeffs: dict[str, float], ecr_coeffs: dict[str, float],
                  act_sign: float = 1.0) -> float:
    """Sum of both components with their independent coefficient maps."""
    return reward_ee(snapshot, ee_coeffs) + reward_ecr(snapshot, ecr_coeffs, act_sign)


def scenario_reward(snapshot: FairnessSnapshot, spec: ScenarioSpec) -> float:
    terms = snapshot.scaled_counts() if spec.normalize_counts else snapshot
    if spec.scenario in (Scenario.INDIVIDUAL_EE, Scenario.GROUP_EE):
        return reward_ee(terms, spec.ee_coeffs)
    if spec.scenario is Scenario.GROUP_ECR:
        return reward_ecr(terms, spec.ecr_coeffs, spec.ecr_act_sign)
    return reward_hybrid(terms, spec.ee_coeffs, spec.ecr_coeffs, spec.ecr_act_sign)


def stopping(snapshot: FairnessSnapshot, spec: ScenarioSpec) -> bool:
    """Scenario-specific goal predicate, evaluated on raw snapshot values."""
    ee_ok = snapshot.asr >= spec.sr_target and snapshot.pd <= spec.target_pd
    ecr_ok = (
        snapshot.a0_count >= spec.min_actions_per_group
        and snapshot.a1_count >= spec.min_actions_per_group
        and snapshot.ad <= spec.target_ad
    )
    if spec.scenario in (Scenario.INDIVIDUAL_EE, Scenario.GROUP_EE):
        return ee_ok
    if spec.scenario is Scenario.GROUP_ECR:
        return ecr_ok
    return ee_ok and ecr_ok


class RecourseEnv:
    """Single-writer environment bound to one population, classifier, and scenario."""

    def __init__(self, pop: Population, classifier, spec: ScenarioSpec):
        if pop.group0.size == 0:
            raise EmptyPopulationError("population has no protected-group-0 members")
        if pop.group1.size == 0:
            raise EmptyPopulationError("population has no protected-group-1 members")
        self.pop = pop
        self.classifier = classifier
        self.spec = spec
        self.n_act_features = len(pop.schema.actionable_indices)
        self.state_dim = spec.max_actions * self.n_act_features
        self.action_dim = 2
        self.delta = np.zeros((spec.max_actions, self.n_act_features))
        self.step_count = 0
        self.done = True
        self.snapshot: FairnessSnapshot | None = None
        self.stopped = False

    def _recompute(self) -> FairnessSnapshot:
        snap = compute_snapshot(
            self.action_set(),
            self.pop,
            self.classifier,
            sr_mode=self.spec.sr_mode,
            phi=self.spec.phi,
            alpha=self.spec.active_threshold,
        )
        self.snapshot = snap
        return snap

    def state(self) -> np.ndarray:
        return self.delta.ravel().copy()

    def action_set(self) -> ActionSet:
        return ActionSet.from_matrix(self.delta)

    def reset(self) -> np.ndarray:
        self.delta[...] = 0.0
        self.step_count = 0
        self.done = False
        self.stopped = False
        self._recompute()
        return self.state()

    def step(self, agent_action) -> tuple[np.ndarray, float, bool, FairnessSnapshot]:
        if self.done:
            raise RuntimeError("step() called after the episode ended; call reset()")
        a = np.asarray(agent_action, dtype=float).ravel()
        if a.shape != (2,):
            raise ValueError("agent action must be a 2-vector (selector, increment)")
        idx = decode_index(a[0], self.state_dim)
        slot, feat = divmod(idx, self.n_act_features)
        increment = float(np.clip(a[1], -1.0, 1.0))
        self.delta[slot, feat] = float(np.clip(self.delta[slot, feat] + increment, -1.0, 1.0))
        self.step_count += 1

        snap = self._recompute()
        reward = scenario_reward(snap, self.spec)
        self.stopped = stopping(snap, self.spec)
        self.done = self.stopped or self.step_count >= self.spec.max_steps_per_episode
        return self.state(), reward, self.done, snap

    def terminal_candidate(self) -> tuple[tuple, dict]:
        """Ranking key and payload for the episode's terminal state.

        Higher is better: goal reached first, then higher ASR, then lower cost.
        """
        snap = self.snapshot
        key = (int(self.stopped), snap.asr, -snap.mean_gower)
        payload = {"action_set": self.action_set(), "snapshot": snap, "stopped": self.stopped}
        return key, payload
