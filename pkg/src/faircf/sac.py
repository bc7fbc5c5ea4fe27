"""Soft Actor-Critic on numpy: squashed Gaussian policy, twin Q-networks,
uniform replay, and automatic entropy-temperature tuning.

All gradients are hand-derived against the reparametrized objectives (noise is
drawn once per update and held fixed), which keeps every loss checkable with
central finite differences.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, FingerprintError
from .nets import Adam, Mlp, polyak_update

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class SacConfig:
    hidden: tuple[int, ...] = (64, 64)
    lr: float = 3e-4
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 256
    buffer_capacity: int = 100_000
    warmup_steps: int = 1000
    updates_per_step: int = 1
    episodes: int = 150
    target_entropy: float | None = None  # default: -action_dim
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "lr": self.lr,
            "gamma": self.gamma,
            "tau": self.tau,
            "batch_size": self.batch_size,
            "buffer_capacity": self.buffer_capacity,
            "warmup_steps": self.warmup_steps,
            "updates_per_step": self.updates_per_step,
            "episodes": self.episodes,
            "target_entropy": self.target_entropy,
            "seed": self.seed,
        }

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


class ReplayBuffer:
    """Fixed-capacity ring buffer; batches are sampled uniformly without replacement."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.pos = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r, s2, done) -> None:
        i = self.pos
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self.dones[i] = done
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        idx = rng.choice(self.size, size=min(batch_size, self.size), replace=False)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.dones[idx],
        )


def policy_heads(policy: Mlp, S: np.ndarray, cache: bool = False):
    """Split the policy output into (mu, clipped log-std, in-range mask)."""
    out = policy.forward(S, cache=cache)
    k = out.shape[1] // 2
    mu, raw = out[:, :k], out[:, k:]
    mask = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
    return mu, np.clip(raw, LOG_STD_MIN, LOG_STD_MAX), mask


def squashed_logprob(u: np.ndarray, mu: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """log-density of a = tanh(u) where u ~ N(mu, exp(log_std)^2), per row."""
    z = (u - mu) / np.exp(log_std)
    base = -(log_std + 0.5 * z * z + 0.5 * _LOG_2PI).sum(axis=1)
    corr = np.log(1.0 - np.tanh(u) ** 2 + SQUASH_EPS).sum(axis=1)
    return base - corr


def q_loss_and_grads(qnet: Mlp, S: np.ndarray, A: np.ndarray,
                     targets: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean squared TD error and its gradients w.r.t. the Q-network parameters."""
    q = qnet.forward(np.concatenate([S, A], axis=1), cache=True).ravel()
    err = q - targets
    loss = float((err**2).mean())
    grads, _ = qnet.backward((2.0 / len(err)) * err[:, None])
    return loss, grads


def policy_loss_and_grads(policy: Mlp, q1: Mlp, q2: Mlp, alpha: float, S: np.ndarray,
                          noise: np.ndarray) -> tuple[float, list[np.ndarray], np.ndarray]:
    """mean(alpha*logpi - min Q) under the reparametrized sample u = mu + sigma*noise.

    Returns (loss, policy parameter gradients, per-row log-probs). The noise is
    part of the function's inputs, so the loss is a deterministic function of
    the policy parameters (finite-difference checkable).
    """
    B, state_dim = S.shape
    mu, log_std, mask = policy_heads(policy, S, cache=True)
    sigma = np.exp(log_std)
    u = mu + sigma * noise
    a = np.tanh(u)
    one_minus_a2 = 1.0 - a**2
    logp = squashed_logprob(u, mu, log_std)

    inp = np.concatenate([S, a], axis=1)
    q1v = q1.forward(inp, cache=True).ravel()
    q2v = q2.forward(inp, cache=True).ravel()
    use_q1 = q1v <= q2v
    qmin = np.where(use_q1, q1v, q2v)
    loss = float((alpha * logp - qmin).mean())

    # dL/da flows only through the per-row argmin critic
    _, d_inp1 = q1.backward((-1.0 / B) * use_q1[:, None].astype(float))
    _, d_inp2 = q2.backward((-1.0 / B) * (~use_q1)[:, None].astype(float))
    dL_da = d_inp1[:, state_dim:] + d_inp2[:, state_dim:]

    # under reparametrization the Gaussian base term depends on the parameters
    # only through -log_std; the squash correction depends on u
    dlogp_du = 2.0 * a * one_minus_a2 / (one_minus_a2 + SQUASH_EPS)
    dL_du = (alpha / B) * dlogp_du + dL_da * one_minus_a2
    dL_dmu = dL_du
    dL_dlogstd = dL_du * sigma * noise - (alpha / B)
    d_out = np.concatenate([dL_dmu, dL_dlogstd * mask], axis=1)
    grads, _ = policy.backward(d_out)
    return loss, grads, logp


def temperature_loss_and_grad(log_temperature: np.ndarray, logp: np.ndarray,
                              target_entropy: float) -> tuple[float, np.ndarray]:
    """Dual objective for the entropy temperature; logp is treated as constant."""
    loss = float(-np.exp(log_temperature[0]) * (logp + target_entropy).mean())
    return loss, np.array([loss])


class SacAgent:
    """Gaussian policy with tanh squashing, twin critics with polyak targets,
    and an auto-tuned entropy temperature. Fully seeded and deterministic."""

    def __init__(self, state_dim: int, action_dim: int, config: SacConfig):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.policy = Mlp([state_dim, *config.hidden, 2 * action_dim], self.rng)
        self.q1 = Mlp([state_dim + action_dim, *config.hidden, 1], self.rng)
        self.q2 = Mlp([state_dim + action_dim, *config.hidden, 1], self.rng)
        self.q1_target = self.q1.clone()
        self.q2_target = self.q2.clone()
        self.log_temperature = np.zeros(1)
        self.target_entropy = (
            -float(action_dim) if config.target_entropy is None else config.target_entropy
        )
        self.opt_policy = Adam(self.policy.parameters(), config.lr)
        self.opt_q1 = Adam(self.q1.parameters(), config.lr)
        self.opt_q2 = Adam(self.q2.parameters(), config.lr)
        self.opt_temp = Adam([self.log_temperature], config.lr)

    @property
    def temperature(self) -> float:
        return float(np.exp(self.log_temperature[0]))

    def sample_action(self, state: np.ndarray, deterministic: bool = False,
                      return_pre_squash: bool = False):
        mu, log_std, _ = policy_heads(self.policy, np.asarray(state)[None])
        if deterministic:
            u = mu
        else:
            u = mu + np.exp(log_std) * self.rng.standard_normal(mu.shape)
        logp = float(squashed_logprob(u, mu, log_std)[0])
        action = np.tanh(u)[0]
        if return_pre_squash:
            return action, logp, u[0]
        return action, logp

    def update(self, batch) -> dict[str, float]:
        S, A, R, S2, D = batch
        B = len(R)

        # bootstrap targets from a fresh policy sample at s'
        mu2, log_std2, _ = policy_heads(self.policy, S2)
        u2 = mu2 + np.exp(log_std2) * self.rng.standard_normal(mu2.shape)
        a2 = np.tanh(u2)
        logp2 = squashed_logprob(u2, mu2, log_std2)
        inp2 = np.concatenate([S2, a2], axis=1)
        qt = np.minimum(
            self.q1_target.forward(inp2).ravel(), self.q2_target.forward(inp2).ravel()
        )
        y = R + self.config.gamma * (1.0 - D) * (qt - self.temperature * logp2)

        loss_q1, grads_q1 = q_loss_and_grads(self.q1, S, A, y)
        self.opt_q1.step(self.q1.parameters(), grads_q1)
        loss_q2, grads_q2 = q_loss_and_grads(self.q2, S, A, y)
        self.opt_q2.step(self.q2.parameters(), grads_q2)

        noise = self.rng.standard_normal((B, self.action_dim))
        loss_pi, grads_pi, logp = policy_loss_and_grads(
            self.policy, self.q1, self.q2, self.temperature, S, noise
        )
        self.opt_policy.step(self.policy.parameters(), grads_pi)

        loss_temp, grad_temp = temperature_loss_and_grad(
            self.log_temperature, logp, self.target_entropy
        )
        self.opt_temp.step([self.log_temperature], [grad_temp])

        polyak_update(self.q1_target, self.q1, self.config.tau)
        polyak_update(self.q2_target, self.q2, self.config.tau)

        losses = {"q1": loss_q1, "q2": loss_q2, "policy": loss_pi, "temperature": loss_temp}
        if not all(np.isfinite(v) for v in losses.values()):
            raise DivergenceError(f"non-finite SAC losses: {losses}")
        return losses

    def save(self, path: str | Path) -> None:
        payload = {
            "config_fingerprint": self.config.fingerprint(),
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "policy": self.policy.get_flat().tolist(),
            "q1": self.q1.get_flat().tolist(),
            "q2": self.q2.get_flat().tolist(),
            "q1_target": self.q1_target.get_flat().tolist(),
            "q2_target": self.q2_target.get_flat().tolist(),
            "log_temperature": float(self.log_temperature[0]),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path, config: SacConfig) -> "SacAgent":
        payload = json.loads(Path(path).read_text())
        if payload["config_fingerprint"] != config.fingerprint():
            raise FingerprintError(f"{path}: checkpoint was written under a different config")
        agent = cls(payload["state_dim"], payload["action_dim"], config)
        agent.policy.set_flat(np.array(payload["policy"]))
        agent.q1.set_flat(np.array(payload["q1"]))
        agent.q2.set_flat(np.array(payload["q2"]))
        agent.q1_target.set_flat(np.array(payload["q1_target"]))
        agent.q2_target.set_flat(np.array(payload["q2_target"]))
        agent.log_temperature[0] = payload["log_temperature"]
        return agent


@dataclass
class TrainingTrace:
    """Per-episode convergence log plus the best terminal state seen."""

    steps: list[int] = field(default_factory=list)
    episode_reward_means: list[float] = field(default_factory=list)
    entropy_coefficients: list[float] = field(default_factory=list)
    best: dict | None = None
    total_steps: int = 0
    buffer_size: int = 0

    def append(self, step: int, reward_mean: float, entropy_coefficient: float) -> None:
        self.steps.append(step)
        self.episode_reward_means.append(reward_mean)
        self.entropy_coefficients.append(entropy_coefficient)

    def write_csv(self, path: str | Path) -> None:
        lines = ["step,episode_reward_mean,entropy_coefficient"]
        for s, r, t in zip(self.steps, self.episode_reward_means, self.entropy_coefficients):
            lines.append(f"{s},{r!r},{t!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def _trajectory_record(episode: int, step: int, reward: float, info) -> dict:
    record = {"episode": episode, "step": step, "reward": reward}
    if hasattr(info, "to_dict"):
        snap = info.to_dict()
        record.update(
            asr=snap["asr"],
            pd=snap["pd"],
            a0=snap["a0_count"],
            a1=snap["a1_count"],
            ad=snap["ad"],
            act=snap["active_actions"],
            sim=snap["mean_gower"],
        )
    return record


def train(agent: SacAgent, env, config: SacConfig | None = None,
          trajectory_path: str | Path | None = None) -> TrainingTrace:
    """Run episodes against the environment, updating after the warmup phase.

    Warmup actions are uniform random in [-1,1]^k. If the environment exposes
    terminal_candidate(), the best-ranked terminal state across episodes is
    kept on the returned trace.
    """
    config = config or agent.config
    buffer = ReplayBuffer(config.buffer_capacity, agent.state_dim, agent.action_dim)
    trace = TrainingTrace()
    best_key = None
    total_step = 0
    traj_fh = open(trajectory_path, "w") if trajectory_path else None
    try:
        for episode in range(config.episodes):
            state = env.reset()
            rewards = []
            done = False
            while not done:
                if total_step < config.warmup_steps:
                    action = agent.rng.uniform(-1.0, 1.0, agent.action_dim)
                else:
                    action, _ = agent.sample_action(state)
                next_state, reward, done, info = env.step(action)
                # truncation is stored as terminal too; fine for goal-stopped envs
                buffer.add(state, action, reward, next_state, float(done))
                state = next_state
                rewards.append(reward)
                total_step += 1
                if traj_fh:
                    traj_fh.write(
                        json.dumps(_trajectory_record(episode, total_step, reward, info),
                                   sort_keys=True) + "\n"
                    )
                if total_step >= config.warmup_steps and len(buffer) >= config.batch_size:
                    for _ in range(config.updates_per_step):
                        agent.update(buffer.sample(agent.rng, config.batch_size))
            trace.append(total_step, float(np.mean(rewards)), agent.temperature)
            if hasattr(env, "terminal_candidate"):
                key, payload = env.terminal_candidate()
                if best_key is None or key > best_key:
                    best_key = key
                    trace.best = payload
    finally:
        if traj_fh:
            traj_fh.close()
    trace.total_steps = total_step
    trace.buffer_size = len(buffer)
    return trace
