"""Distributed PPO for the step-1 interval schedule.

A global actor-critic is copied to ``workers`` rollout threads. Each worker
samples episodes against its own simulator from a read-only snapshot; the
batches are merged in worker order and the global policy takes a clipped
surrogate step, moving one version ahead of every worker.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .env import CoolingEnv, MeasurementSchedule

log = logging.getLogger(__name__)

DTYPE = torch.float64


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    n_r: int = 10
    rounds: int = 30
    n_actions: int = 5
    workers: int = 4
    episodes_per_worker: int = 8
    updates: int = 500
    epochs: int = 4
    minibatch: int = 256
    clip_ratio: float = 0.2
    discount: float = 0.99
    gae_lambda: float = 0.95
    lr: float = 3e-4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    hidden: int = 64
    reward_scale: float = 0.01
    reward_mode: str = "step"
    eval_every: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("need at least one worker")
        if not 0 < self.clip_ratio < 1:
            raise ValueError("clip ratio must lie in (0, 1)")
        if self.reward_mode not in ("step", "terminal"):
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _mlp(n_in: int, hidden: int, n_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(n_in, hidden),
        nn.Tanh(),
        nn.Linear(hidden, hidden),
        nn.Tanh(),
        nn.Linear(hidden, n_out),
    )


class ActorCritic(nn.Module):
    """Policy over interval multiples plus a scalar state-value critic."""

    def __init__(self, obs_dim: int, n_actions: int, hidden: int = 64):
        super().__init__()
        self.actor = _mlp(obs_dim, hidden, n_actions)
        self.critic = _mlp(obs_dim, hidden, 1)
        self.version = 0
        self.to(DTYPE)

    def distribution(self, obs: torch.Tensor) -> torch.distributions.Categorical:
        return torch.distributions.Categorical(logits=self.actor(obs))

    def probs(self, obs) -> np.ndarray:
        with torch.no_grad():
            x = torch.as_tensor(np.asarray(obs), dtype=DTYPE)
            return torch.softmax(self.actor(x), dim=-1).numpy()

    def value(self, obs: torch.Tensor) -> torch.Tensor:
        return self.critic(obs).squeeze(-1)


@dataclass
class Trajectory:
    states: np.ndarray  # (M, obs_dim)
    actions: np.ndarray  # (M,) values in 1..d
    rewards: np.ndarray  # (M,)
    next_states: np.ndarray  # (M, obs_dim)
    log_probs: np.ndarray  # (M,) under the sampling policy
    final_fidelity: float
    version: int

    def __len__(self) -> int:
        return len(self.actions)


def rollout(
    policy: ActorCritic,
    env: CoolingEnv,
    seed: int | None,
    n_episodes: int = 1,
    greedy: bool = False,
) -> list[Trajectory]:
    """Run ``n_episodes`` episodes in lockstep from the environment's initial state.

    Sampling uses a numpy generator seeded with ``seed``, so the output is a
    deterministic function of (weights, seed). ``greedy`` takes the argmax.
    """
    rng = np.random.default_rng(seed)
    M = env.rounds
    states = [env.initial] * n_episodes
    obs = np.zeros((n_episodes, M, env.obs_dim))
    nxt = np.zeros_like(obs)
    acts = np.zeros((n_episodes, M), dtype=int)
    rews = np.zeros((n_episodes, M))
    logp = np.zeros((n_episodes, M))
    for t in range(M):
        o = np.stack([env.observe(s, t) for s in states])
        pr = policy.probs(o)
        if greedy:
            a = np.argmax(pr, axis=1)
        else:
            u = rng.random(n_episodes)
            a = np.minimum((np.cumsum(pr, axis=1) < u[:, None]).sum(axis=1), env.n_actions - 1)
        for i in range(n_episodes):
            states[i], r = env.step(states[i], int(a[i]) + 1)
            rews[i, t] = r
            nxt[i, t] = env.observe(states[i], t + 1)
        obs[:, t] = o
        acts[:, t] = a + 1
        logp[:, t] = np.log(pr[np.arange(n_episodes), a])
    return [
        Trajectory(obs[i], acts[i], rews[i], nxt[i], logp[i], float(states[i].p[env.n_r]), policy.version)
        for i in range(n_episodes)
    ]


def greedy_schedule(policy: ActorCritic, env: CoolingEnv) -> MeasurementSchedule:
    traj = rollout(policy, env, seed=None, greedy=True)[0]
    return env.schedule(traj.actions, f"dppo-v{policy.version}")


# --- update -----------------------------------------------------------------------------


@dataclass
class Batch:
    obs: torch.Tensor
    actions: torch.Tensor  # 0-based
    old_log_probs: torch.Tensor
    advantages: torch.Tensor
    returns: torch.Tensor

    def subset(self, idx) -> "Batch":
        return Batch(
            self.obs[idx], self.actions[idx], self.old_log_probs[idx], self.advantages[idx], self.returns[idx]
        )


def _learning_rewards(traj: Trajectory, config: TrainConfig) -> np.ndarray:
    if config.reward_mode == "step":
        return traj.rewards * config.reward_scale
    r = np.zeros_like(traj.rewards)
    r[-1] = traj.rewards[-1] * config.reward_scale
    return r


def make_batch(policy: ActorCritic, trajectories: list[Trajectory], config: TrainConfig) -> Batch:
    """Stack trajectories and attach GAE advantages from the current critic."""
    versions = {t.version for t in trajectories}
    if versions != {policy.version}:
        raise TrainingError(
            f"batch mixes policy versions {sorted(versions)}; global is at {policy.version}"
        )
    obs = torch.as_tensor(np.concatenate([t.states for t in trajectories]), dtype=DTYPE)
    with torch.no_grad():
        values = policy.value(obs).numpy()
    adv_all, ret_all = [], []
    offset = 0
    for t in trajectories:
        M = len(t)
        v = values[offset : offset + M]
        offset += M
        r = _learning_rewards(t, config)
        adv = np.zeros(M)
        running = 0.0
        for i in reversed(range(M)):
            v_next = v[i + 1] if i + 1 < M else 0.0
            delta = r[i] + config.discount * v_next - v[i]
            running = delta + config.discount * config.gae_lambda * running
            adv[i] = running
        adv_all.append(adv)
        ret_all.append(adv + v)
    adv = np.concatenate(adv_all)
    std = adv.std()
    if std > 1e-12:
        adv = (adv - adv.mean()) / std
    return Batch(
        obs=obs,
        actions=torch.as_tensor(np.concatenate([t.actions for t in trajectories]) - 1),
        old_log_probs=torch.as_tensor(np.concatenate([t.log_probs for t in trajectories]), dtype=DTYPE),
        advantages=torch.as_tensor(adv, dtype=DTYPE),
        returns=torch.as_tensor(np.concatenate(ret_all), dtype=DTYPE),
    )


def surrogate_loss(policy: ActorCritic, batch: Batch, config: TrainConfig, idx=None) -> torch.Tensor:
    """Clipped PPO objective (negated) plus value and entropy terms."""
    if idx is not None:
        batch = batch.subset(idx)
    dist = policy.distribution(batch.obs)
    logp = dist.log_prob(batch.actions)
    ratio = torch.exp(logp - batch.old_log_probs)
    clipped = torch.clamp(ratio, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio)
    policy_loss = -torch.min(ratio * batch.advantages, clipped * batch.advantages).mean()
    value_loss = ((policy.value(batch.obs) - batch.returns) ** 2).mean()
    entropy = dist.entropy().mean()
    return policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy


def update_global(
    policy: ActorCritic,
    optimizer: torch.optim.Optimizer,
    batch: Batch,
    config: TrainConfig,
) -> ActorCritic:
    """Several epochs of minibatch PPO steps; bumps the policy version."""
    n = batch.obs.shape[0]
    gen = torch.Generator().manual_seed(config.seed * 1_000_003 + policy.version)
    for _ in range(config.epochs):
        perm = torch.randperm(n, generator=gen)
        for start in range(0, n, config.minibatch):
            idx = perm[start : start + config.minibatch]
            loss = surrogate_loss(policy, batch, config, idx)
            optimizer.zero_grad()
            loss.backward()
            grads = [p.grad for p in policy.parameters() if p.grad is not None]
            if not torch.isfinite(loss) or not all(torch.isfinite(g).all() for g in grads):
                raise TrainingError(
                    f"non-finite loss/gradient at version {policy.version}: loss={loss.item()}, "
                    f"max |adv|={batch.advantages.abs().max().item():.3g}, "
                    f"max |ret|={batch.returns.abs().max().item():.3g}"
                )
            nn.utils.clip_grad_norm_(policy.parameters(), config.max_grad_norm)
            optimizer.step()
    policy.version += 1
    return policy


# --- training loop ---------------------------------------------------------------------


@dataclass
class TrainResult:
    policy: ActorCritic
    schedule: MeasurementSchedule
    best_fidelity: float
    baseline_fidelity: float
    history: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.best_fidelity < self.baseline_fidelity


def _worker_seed(config: TrainConfig, update: int, worker: int) -> int:
    ss = np.random.SeedSequence([config.seed, update, worker])
    return int(ss.generate_state(1)[0])


def _collect(policy: ActorCritic, env: CoolingEnv, config: TrainConfig, update: int, pool) -> list[Trajectory]:
    snapshots = [copy.deepcopy(policy) for _ in range(config.workers)]
    envs = [copy.deepcopy(env) for _ in range(config.workers)]

    def work(w):
        return rollout(snapshots[w], envs[w], _worker_seed(config, update, w), config.episodes_per_worker)

    batch = []
    for part in pool.map(work, range(config.workers)):  # map keeps worker order
        batch.extend(part)
    return batch


def default_env(config: TrainConfig, params) -> CoolingEnv:
    return CoolingEnv.for_protocol(params, config.n_r, config.rounds, config.n_actions)


def train(
    config: TrainConfig,
    env: CoolingEnv,
    log_path=None,
    checkpoint_path=None,
) -> TrainResult:
    """Train the global policy and return its greedy schedule.

    The returned policy is the evaluated snapshot whose greedy schedule had
    the highest final F_r.
    """
    if env.rounds != config.rounds or env.n_actions != config.n_actions or env.n_r != config.n_r:
        raise ValueError("environment does not match the training config")
    torch.manual_seed(config.seed)
    policy = ActorCritic(env.obs_dim, env.n_actions, config.hidden)
    baseline = env.final_fidelity((1,) * env.rounds)
    if env.n_actions == 1:
        sched = env.schedule((1,) * env.rounds, "dppo-v0")
        return TrainResult(policy, sched, baseline, baseline)
    optimizer = torch.optim.Adam(policy.parameters(), lr=config.lr)
    best_f, best_state, best_sched = -1.0, None, None
    history = []
    t0 = time.perf_counter()
    writer = None
    fh = None
    if log_path is not None:
        fh = open(log_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["update", "mean_reward", "best_fr", "wall_time"])

    def evaluate():
        nonlocal best_f, best_state, best_sched
        sched = greedy_schedule(policy, env)
        f = env.final_fidelity(sched.actions)
        if f > best_f:
            best_f, best_sched = f, sched
            best_state = copy.deepcopy(policy.state_dict()), policy.version

    try:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for u in range(config.updates):
                trajs = _collect(policy, env, config, u, pool)
                mean_reward = float(np.mean([t.rewards.sum() for t in trajs]))
                if not np.isfinite(mean_reward):
                    raise TrainingError(f"reward collapsed to {mean_reward} at update {u}")
                batch = make_batch(policy, trajs, config)
                update_global(policy, optimizer, batch, config)
                if (u + 1) % config.eval_every == 0 or u + 1 == config.updates:
                    evaluate()
                row = {
                    "update": u + 1,
                    "mean_reward": mean_reward,
                    "best_fr": best_f,
                    "wall_time": time.perf_counter() - t0,
                }
                history.append(row)
                if writer:
                    writer.writerow([row["update"], repr(mean_reward), repr(best_f), f"{row['wall_time']:.3f}"])
                log.debug("update %d mean reward %.4g best F_r %.6f", u + 1, mean_reward, best_f)
    except TrainingError:
        if checkpoint_path is not None:
            save_checkpoint(policy, config, checkpoint_path)
        raise
    finally:
        if fh:
            fh.close()

    state, version = best_state
    policy.load_state_dict(state)
    policy.version = version
    result = TrainResult(policy, best_sched, best_f, baseline, history)
    if result.failed:
        log.warning("trained schedule (F_r=%.6f) is worse than equal spacing (%.6f)", best_f, baseline)
    if checkpoint_path is not None:
        save_checkpoint(policy, config, checkpoint_path)
    return result


def save_checkpoint(policy: ActorCritic, config: TrainConfig, path) -> None:
    torch.save(
        {
            "format": 1,
            "version": policy.version,
            "state_dict": policy.state_dict(),
            "obs_dim": policy.actor[0].in_features,
            "n_actions": policy.actor[-1].out_features,
            "config": asdict(config),
            "config_hash": config.digest(),
        },
        Path(path),
    )


def load_checkpoint(path) -> tuple[ActorCritic, TrainConfig]:
    blob = torch.load(Path(path), weights_only=False)
    config = TrainConfig(**blob["config"])
    if config.digest() != blob["config_hash"]:
        raise ValueError("checkpoint config hash mismatch")
    policy = ActorCritic(blob["obs_dim"], blob["n_actions"], config.hidden)
    policy.load_state_dict(blob["state_dict"])
    policy.version = blob["version"]
    return policy, config
