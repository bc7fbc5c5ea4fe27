import dataclasses

import numpy as np
import pytest

from faircf.errors import ConfigError, EmptyPopulationError
from faircf.fairness import FairnessSnapshot, Population, compute_snapshot
from faircf.recourse import action_table
from faircf.rl_env import (
    RecourseEnv,
    Scenario,
    ScenarioSpec,
    decode_index,
    reward_ecr,
    reward_ee,
    reward_hybrid,
    scenario_reward,
    stopping,
)

from helpers import make_schema, population_from_points, sum_ge_one_classifier


def make_snapshot(**kwargs) -> FairnessSnapshot:
    base = dict(
        sr0=0.0, sr1=0.0, asr=0.0, pd=0.0, micro_eff0=0.0, micro_eff1=0.0,
        macro_eff0=0.0, macro_eff1=0.0, active_count=0, a0_count=0, a1_count=0,
        ad=0, mean_gower=0.0, n_actions=5,
    )
    base.update(kwargs)
    return FairnessSnapshot(**base)


def hybrid_env(spec=None, points0=None, points1=None):
    pop = population_from_points(
        points0 or [(0.45, 0.45), (0.3, 0.3)],
        points1 or [(0.4, 0.4), (0.35, 0.35)],
    )
    spec = spec or ScenarioSpec(Scenario.HYBRID_EE_ECR, max_steps_per_episode=20)
    return RecourseEnv(pop, sum_ge_one_classifier(), spec)


# ---------------------------------------------------------------- decode / spec


def test_decode_index_endpoints_and_uniformity():
    assert decode_index(-1.0, 10) == 0
    assert decode_index(1.0, 10) == 9
    assert decode_index(0.0, 10) == 5
    # each cell of [-1,1] maps to one slot
    hits = {decode_index(a1, 4) for a1 in np.linspace(-1, 1, 801)}
    assert hits == {0, 1, 2, 3}


def test_scenario_spec_validation():
    with pytest.raises(ConfigError):
        ScenarioSpec(Scenario.INDIVIDUAL_EE, max_actions=0)
    with pytest.raises(ConfigError):
        ScenarioSpec(Scenario.INDIVIDUAL_EE, phi=0.0)
    with pytest.raises(ConfigError):
        ScenarioSpec(Scenario.INDIVIDUAL_EE, ee_coeffs={"asr": -1.0})
    with pytest.raises(ConfigError):
        ScenarioSpec(Scenario.INDIVIDUAL_EE, ecr_act_sign=0.5)
    spec = ScenarioSpec("group-ee")
    assert spec.scenario is Scenario.GROUP_EE
    assert spec.sr_mode == "macro"
    assert spec.sr_target == 0.75
    assert ScenarioSpec("individual-ee").sr_target == 0.85


# ---------------------------------------------------------------- rewards


def test_reward_ee_arithmetic():
    snap = make_snapshot(asr=0.75, active_count=1, pd=0.5, mean_gower=0.3)
    coeffs = {"asr": 1.0, "act": 1.0, "pd": 1.0, "sim": 1.0}
    assert reward_ee(snap, coeffs) == pytest.approx(0.95)


def test_reward_ee_zero_state():
    assert reward_ee(make_snapshot(), {"asr": 1.0, "act": 1.0, "pd": 1.0, "sim": 1.0}) == 0.0


def test_reward_ee_amplified_pd_penalty():
    snap = make_snapshot(asr=0.75, active_count=1, pd=0.5, mean_gower=0.3)
    coeffs = {"asr": 1.0, "act": 1.0, "pd": 10.0, "sim": 1.0}
    assert reward_ee(snap, coeffs) == pytest.approx(-3.55)


def test_reward_ecr_arithmetic():
    snap = make_snapshot(a0_count=2, a1_count=2, ad=0, active_count=2, mean_gower=0.2)
    coeffs = {"a0": 1.0, "a1": 1.0, "ad": 1.0, "act": 1.0, "sim": 1.0}
    assert reward_ecr(snap, coeffs) == pytest.approx(5.8)


def test_reward_ecr_zero_state():
    coeffs = {"a0": 1.0, "a1": 1.0, "ad": 1.0, "act": 1.0, "sim": 1.0}
    assert reward_ecr(make_snapshot(), coeffs) == 0.0


def test_reward_ecr_ad_penalty():
    coeffs = {"a0": 0.0, "a1": 0.0, "ad": 1.0, "act": 0.0, "sim": 0.0}
    snap = make_snapshot(a0_count=3, a1_count=1, ad=2)
    assert reward_ecr(snap, coeffs) == pytest.approx(-2.0)


def test_reward_ecr_act_sign_flip():
    coeffs = {"a0": 0.0, "a1": 0.0, "ad": 0.0, "act": 1.0, "sim": 0.0}
    snap = make_snapshot(active_count=2)
    assert reward_ecr(snap, coeffs, act_sign=1.0) == 2.0
    assert reward_ecr(snap, coeffs, act_sign=-1.0) == -2.0


def test_reward_hybrid_sums_components():
    snap = make_snapshot(asr=0.75, active_count=1, pd=0.5, mean_gower=0.3,
                         a0_count=2, a1_count=2, ad=0)
    ee_c = {"asr": 1.0, "act": 1.0, "pd": 1.0, "sim": 1.0}
    # reward_ecr on this snapshot: 2 + 2 - 0 + 1 - 0.3 = 4.7; reward_ee: 0.95
    ecr_c = {"a0": 1.0, "a1": 1.0, "ad": 1.0, "act": 1.0, "sim": 1.0}
    assert reward_hybrid(snap, ee_c, ecr_c) == pytest.approx(
        reward_ee(snap, ee_c) + reward_ecr(snap, ecr_c)
    )


def test_reward_hybrid_zero_and_linearity():
    zero = make_snapshot()
    ee_c = {"asr": 1.0, "act": 1.0, "pd": 1.0, "sim": 1.0}
    ecr_c = {"a0": 1.0, "a1": 1.0, "ad": 1.0, "act": 1.0, "sim": 1.0}
    assert reward_hybrid(zero, ee_c, ecr_c) == 0.0
    snap = make_snapshot(asr=0.6, active_count=1, pd=0.1, mean_gower=0.2,
                         a0_count=1, a1_count=2, ad=1)
    doubled_ee = {k: 2 * v for k, v in ee_c.items()}
    doubled_ecr = {k: 2 * v for k, v in ecr_c.items()}
    assert reward_hybrid(snap, doubled_ee, doubled_ecr) == pytest.approx(
        2 * reward_hybrid(snap, ee_c, ecr_c)
    )


# ---------------------------------------------------------------- stopping


def test_stopping_ee_predicate():
    spec = ScenarioSpec(Scenario.INDIVIDUAL_EE, target_success_rate=0.85, target_pd=0.10)
    assert stopping(make_snapshot(asr=0.9, pd=0.05), spec) is True
    assert stopping(make_snapshot(asr=0.8, pd=0.05), spec) is False
    assert stopping(make_snapshot(asr=0.9, pd=0.2), spec) is False


def test_stopping_ecr_predicate():
    spec = ScenarioSpec(Scenario.GROUP_ECR)
    assert stopping(make_snapshot(a0_count=1, a1_count=0, ad=1), spec) is False
    assert stopping(make_snapshot(a0_count=1, a1_count=1, ad=0), spec) is True
    assert stopping(make_snapshot(a0_count=2, a1_count=1, ad=1), spec) is False


def test_stopping_hybrid_is_conjunction():
    spec = ScenarioSpec(Scenario.HYBRID_EE_ECR)
    ee_only = make_snapshot(asr=0.9, pd=0.0, a0_count=0, a1_count=0)
    ecr_only = make_snapshot(asr=0.0, pd=0.0, a0_count=1, a1_count=1)
    both = make_snapshot(asr=0.9, pd=0.0, a0_count=1, a1_count=1)
    assert stopping(ee_only, spec) is False
    assert stopping(ecr_only, spec) is False
    assert stopping(both, spec) is True


def test_stopping_group_ee_uses_group_threshold():
    spec = ScenarioSpec(Scenario.GROUP_EE)
    assert stopping(make_snapshot(asr=0.8, pd=0.05), spec) is True  # >= 0.75
    assert stopping(make_snapshot(asr=0.7, pd=0.05), spec) is False


# ---------------------------------------------------------------- environment


def test_reset_state_is_zero():
    env = hybrid_env()
    state = env.reset()
    assert state.shape == (env.spec.max_actions * 2,)
    assert (state == 0).all()
    assert env.snapshot.active_count == 0
    assert env.snapshot.sr0 == 0.0
    assert env.snapshot.sr1 == 0.0


def test_state_length_matches_actions_times_features():
    schema = make_schema([
        ("a", "continuous", 0.0, 1.0, True),
        ("b", "continuous", 0.0, 1.0, True),
        ("c", "continuous", 0.0, 1.0, True),
        ("grp", "nominal", 0.0, 1.0, False),
    ])
    pop = population_from_points([(0.2, 0.2)], [(0.3, 0.3)], schema=schema)
    env = RecourseEnv(pop, sum_ge_one_classifier(4), ScenarioSpec(Scenario.INDIVIDUAL_EE))
    assert env.reset().shape == (15,)
    state, _, _, _ = env.step(np.array([0.0, 0.5]))
    assert state.shape == (15,)


def test_step_increments_selected_delta():
    env = hybrid_env()
    env.reset()
    state, _, _, _ = env.step(np.array([-1.0, 0.25]))  # slot 0, feature 0
    assert state[0] == pytest.approx(0.25)
    assert np.count_nonzero(state) == 1


def test_step_zero_increment_is_noop():
    env = hybrid_env()
    env.reset()
    env.step(np.array([-1.0, 0.3]))
    prev_state = env.state()
    prev_snapshot = env.snapshot
    state, reward, _, snap = env.step(np.array([-1.0, 0.0]))
    assert np.array_equal(state, prev_state)
    assert reward == scenario_reward(prev_snapshot, env.spec)
    assert snap == prev_snapshot


def test_step_saturates_delta_at_one():
    spec = ScenarioSpec(Scenario.HYBRID_EE_ECR, min_actions_per_group=5,
                        max_steps_per_episode=20)
    env = hybrid_env(spec=spec)
    env.reset()
    env.step(np.array([-1.0, 0.9]))
    state, _, _, _ = env.step(np.array([-1.0, 0.9]))
    assert state[0] == 1.0


def test_step_after_done_raises():
    spec = ScenarioSpec(Scenario.HYBRID_EE_ECR, max_steps_per_episode=1)
    env = hybrid_env(spec=spec)
    env.reset()
    _, _, done, _ = env.step(np.array([0.0, 0.1]))
    assert done
    with pytest.raises(RuntimeError):
        env.step(np.array([0.0, 0.1]))


def test_step_raw_unit_semantics():
    schema = make_schema([
        ("income", "continuous", 0.0, 10_000.0, True),
        ("grp", "nominal", 0.0, 1.0, False),
    ])
    pop = population_from_points([(0.2, 0.0)], [(0.2, 0.0)], schema=schema)
    # points only use the first coordinate here
    pop = Population(pop.X[:, [0, 2]] if pop.X.shape[1] == 3 else pop.X, schema,
                     pop.group0, pop.group1, pop.row_ids)
    env = RecourseEnv(pop, sum_ge_one_classifier(2), ScenarioSpec(Scenario.INDIVIDUAL_EE))
    env.reset()
    env.step(np.array([-1.0, 0.1]))  # +0.1 normalized on income
    table = action_table(env.action_set(), schema)
    assert table[0]["income"] == pytest.approx(1000.0)


def test_env_requires_both_groups():
    pop = population_from_points([(0.2, 0.2)], [(0.3, 0.3)])
    solo = Population(pop.X, pop.schema, pop.group0, np.array([], dtype=int), pop.row_ids)
    with pytest.raises(EmptyPopulationError):
        RecourseEnv(solo, sum_ge_one_classifier(), ScenarioSpec(Scenario.INDIVIDUAL_EE))


def test_reward_determinism_and_fresh_snapshot():
    rng = np.random.default_rng(5)
    env = hybrid_env()
    env.reset()
    for _ in range(15):
        if env.done:
            env.reset()
        action = rng.uniform(-1, 1, 2)
        _, reward, _, snap = env.step(action)
        fresh = compute_snapshot(env.action_set(), env.pop, env.classifier,
                                 sr_mode=env.spec.sr_mode, phi=env.spec.phi,
                                 alpha=env.spec.active_threshold)
        assert dataclasses.asdict(snap) == dataclasses.asdict(fresh)
        assert reward == scenario_reward(fresh, env.spec)


def test_individual_ee_stopping_bounds_micro_gap():
    rng = np.random.default_rng(6)
    spec = ScenarioSpec(Scenario.INDIVIDUAL_EE, max_steps_per_episode=30)
    pop = population_from_points(rng.uniform(0.3, 0.5, (5, 2)), rng.uniform(0.3, 0.5, (5, 2)))
    env = RecourseEnv(pop, sum_ge_one_classifier(), spec)
    stopped_snaps = []
    for episode in range(20):
        env.reset()
        done = False
        while not done:
            _, _, done, snap = env.step(rng.uniform(-1, 1, 2))
        if env.stopped:
            stopped_snaps.append(snap)
    assert stopped_snaps, "no stopped episode sampled; loosen the random walk"
    for snap in stopped_snaps:
        micro_gap = abs(snap.micro_eff0 - snap.micro_eff1)
        assert micro_gap <= spec.target_pd + 1e-12


def test_terminal_candidate_ranks_stopped_higher():
    spec = ScenarioSpec(Scenario.HYBRID_EE_ECR, max_steps_per_episode=4)
    env = hybrid_env(spec=spec)
    env.reset()
    done = False
    while not done:
        _, _, done, _ = env.step(np.array([-1.0, 0.0]))
    key_idle, payload_idle = env.terminal_candidate()

    env.reset()
    env.step(np.array([-1.0, 1.0]))
    done = False
    while not env.done:
        env.step(np.array([0.0, 1.0]))
    key_big, payload_big = env.terminal_candidate()
    assert key_big > key_idle
    assert payload_big["snapshot"].asr >= payload_idle["snapshot"].asr


def test_env_with_ordinal_actionable_feature():
    # a full env rollout with an ordinal feature keeps CFs on integer levels
    schema = make_schema([
        ("income", "continuous", 0.0, 1.0, True),
        ("level", "ordinal", 0.0, 10.0, True),
        ("grp", "nominal", 0.0, 1.0, False),
    ])
    rng = np.random.default_rng(14)
    pts = np.column_stack([rng.uniform(0.1, 0.5, 8), rng.integers(0, 6, 8) / 10.0])
    pop = population_from_points(pts[:4], pts[4:], schema=schema)
    env = RecourseEnv(pop, sum_ge_one_classifier(), ScenarioSpec(Scenario.HYBRID_EE_ECR))
    env.reset()
    for _ in range(30):
        if env.done:
            env.reset()
        env.step(rng.uniform(-1, 1, 2))
    from faircf.recourse import apply_action_many

    for action in env.action_set().actions:
        applied = apply_action_many(pop.X, action, schema)
        raw_levels = schema.denormalize(applied)[:, 1]
        assert np.array_equal(raw_levels, np.round(raw_levels))
        assert (applied >= 0).all() and (applied <= 1).all()
