"""PPO trainer for the graph actor-critic."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import env, nn
from .agent import ActorCritic, GnnPolicy, GraphBatch, entropy, log_prob
from .model import PlanInstance


@dataclass(frozen=True)
class PpoConfig:
    learning_rate: float = 1e-4
    clip_ratio: float = 0.2
    min_clip_ratio: float = 0.05
    batch_size: int = 16
    entropy_coeff: float = 0.01
    value_loss_coeff: float = 0.5
    max_grad_norm: float = 0.5
    target_kl: float = 0.015
    discount: float = 0.99
    gae_lambda: float = 0.95
    horizon: int = 8
    rollout_size: int = 64
    epochs: int = 1
    init_log_std: float = 0.0
    episodes: int = 15_000
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.rollout_size < self.batch_size or self.batch_size < 1:
            raise ValueError("need 1 <= batch_size <= rollout_size")
        if self.horizon < 1 or self.episodes < 1 or self.epochs < 1:
            raise ValueError("horizon, episodes and epochs must be positive")

    @classmethod
    def from_file(cls, path: str | Path) -> "PpoConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")

    def total_updates(self) -> int:
        """Upper estimate of update count, used by the clip schedule."""
        return max(1, math.ceil(self.episodes * self.horizon / self.rollout_size))


def clip_schedule(k: int, total: int, eps0: float = 0.2, eps_min: float = 0.05) -> float:
    """Linear decay from ``eps0`` at k=0, floored at ``eps_min``."""
    if total <= 0:
        raise ValueError("total updates must be positive")
    return max(eps_min, (total - k) / total * eps0)


def gae(rewards, values, next_values, terminals, ends, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and returns over a flat buffer.

    ``next_values[t]`` is V(s_{t+1}); it is ignored on terminals.  ``ends[t]``
    marks the last transition of an episode (terminal or truncated), which
    stops the backward recursion.
    """
    rewards = np.asarray(rewards, dtype=float)
    n = rewards.shape[0]
    adv = np.zeros(n)
    running = 0.0
    for t in reversed(range(n)):
        nonterminal = 0.0 if terminals[t] else 1.0
        delta = rewards[t] + gamma * next_values[t] * nonterminal - values[t]
        if ends[t]:
            running = 0.0
        running = delta + gamma * lam * running
        adv[t] = running
    return adv, adv + np.asarray(values, dtype=float)


@dataclass
class Sample:
    batch: GraphBatch
    action: np.ndarray
    log_prob: float
    value: float
    reward: float
    terminal: bool
    end: bool
    next_value: float = 0.0


@dataclass
class UpdateStats:
    clip_ratio: float
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float
    minibatches: int
    grad_norm: float  # before clipping


class DivergenceError(FloatingPointError):
    pass


def ppo_loss(model: ActorCritic, samples: Sequence[Sample], adv: np.ndarray, returns: np.ndarray,
             eps: float, config: PpoConfig):
    b = GraphBatch.merge([s.batch for s in samples])
    out = model(b)
    actions = np.concatenate([s.action for s in samples])
    new_lp = log_prob(actions, out.mean, out.log_std, b.axis_mask, b.edge_graph, b.n_graphs)
    old_lp = np.array([s.log_prob for s in samples])
    ratio = (new_lp - old_lp).exp()
    surr = nn.minimum(ratio * adv, ratio.clip(1.0 - eps, 1.0 + eps) * adv)
    policy_loss = -surr.mean()
    value_loss = (out.value.reshape(len(samples)) - returns).square().mean()
    ent = entropy(out.log_std, b.axis_mask, b.edge_graph, b.n_graphs).mean()
    loss = policy_loss + value_loss * config.value_loss_coeff - ent * config.entropy_coeff
    log_ratio = new_lp.data - old_lp
    stats = {
        "policy_loss": policy_loss.item(),
        "value_loss": value_loss.item(),
        "entropy": ent.item(),
        "approx_kl": float(np.mean(np.exp(log_ratio) - 1.0 - log_ratio)),
        "clip_fraction": float(np.mean(np.abs(ratio.data - 1.0) > eps)),
    }
    return loss, stats


def ppo_update(model: ActorCritic, samples: list[Sample], config: PpoConfig, k: int, total: int,
               rng: np.random.Generator) -> UpdateStats:
    eps = clip_schedule(k, total, config.clip_ratio, config.min_clip_ratio)
    adv, returns = gae([s.reward for s in samples], [s.value for s in samples],
                       [s.next_value for s in samples], [s.terminal for s in samples],
                       [s.end for s in samples], config.discount, config.gae_lambda)
    if not np.all(np.isfinite(returns)):
        raise DivergenceError("non-finite value targets")
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    agg = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "approx_kl": 0.0, "clip_fraction": 0.0}
    count, norm = 0, 0.0
    stop = False
    for _ in range(config.epochs):
        order = rng.permutation(len(samples))
        for start in range(0, len(samples), config.batch_size):
            idx = order[start:start + config.batch_size]
            model.store.zero_grad()
            try:
                loss, stats = ppo_loss(model, [samples[i] for i in idx], adv[idx], returns[idx], eps, config)
            except nn.NonFiniteError as exc:
                raise DivergenceError(str(exc)) from exc
            if not math.isfinite(stats["value_loss"]):
                raise DivergenceError("value loss is not finite")
            if stats["approx_kl"] > config.target_kl:
                stop = True
                break
            loss.backward()
            grads, norm = nn.clip_grad_norm(model.store.grads(), config.max_grad_norm)
            nn.adam_step(model.store, grads, config.learning_rate)
            for key in agg:
                agg[key] += stats[key]
            count += 1
        if stop:
            break
    n = max(count, 1)
    return UpdateStats(eps, agg["policy_loss"] / n, agg["value_loss"] / n, agg["entropy"] / n,
                       agg["approx_kl"] / n, agg["clip_fraction"] / n, count, norm)


@dataclass
class EpisodeLog:
    episode: int
    instance: str
    ret: float
    feasible_at: int  # 1-based step of the first feasible plan, 0 if none
    best_makespan: float


@dataclass
class TrainResult:
    model: ActorCritic
    episodes: list[EpisodeLog]
    updates: list[UpdateStats]


def train(instances: Sequence[PlanInstance], config: PpoConfig, seed: int,
          weights_path: str | Path | None = None, log_path: str | Path | None = None) -> TrainResult:
    """Train on ``instances`` (cycled in a seeded random order) for ``config.episodes`` episodes."""
    if not instances:
        raise ValueError("train needs at least one instance")
    rng = np.random.default_rng(seed)
    model = ActorCritic(seed, config.init_log_std)
    policy = GnnPolicy(model, rng)
    resets = {id(inst): env.reset(inst) for inst in instances}
    total = config.total_updates()
    logs: list[EpisodeLog] = []
    updates: list[UpdateStats] = []
    buffer: list[Sample] = []

    def new_episode():
        inst = instances[int(rng.integers(len(instances)))]
        return inst, resets[id(inst)]

    inst, state = new_episode()
    ep_return, feasible_at, step_no = 0.0, 0, 0
    while len(logs) < config.episodes:
        action, extra = policy(state)
        nxt, reward, done, info = env.step(state, action, config.horizon)
        step_no += 1
        ep_return += reward
        if info.feasible and not feasible_at:
            feasible_at = step_no
        if buffer and not buffer[-1].end:
            buffer[-1].next_value = extra["value"]
        sample = Sample(extra["batch"], action, extra["log_prob"], extra["value"], reward, nxt.terminal, done)
        if done and not nxt.terminal:
            # truncated at the horizon: bootstrap from the critic
            sample.next_value = _state_value(model, policy, nxt)
        buffer.append(sample)
        if done:
            best = nxt.best_plan.makespan if nxt.best_plan is not None else math.nan
            logs.append(EpisodeLog(len(logs) + 1, inst.name, ep_return, feasible_at, best))
            inst, state = new_episode()
            ep_return, feasible_at, step_no = 0.0, 0, 0
        else:
            state = nxt
        if len(buffer) == config.rollout_size or len(logs) == config.episodes and buffer:
            if not buffer[-1].end:
                # rollout cut mid-episode
                buffer[-1].next_value = _state_value(model, policy, state)
                buffer[-1].end = True
            updates.append(ppo_update(model, buffer, config, len(updates), total, rng))
            buffer = []
    if weights_path is not None:
        nn.save_weights(model.store.snapshot(), weights_path, {"seed": str(seed)})
    if log_path is not None:
        write_log(logs, log_path)
    return TrainResult(model, logs, updates)


def _state_value(model: ActorCritic, policy: GnnPolicy, state) -> float:
    return float(model(policy.batch_for(state)).value.data[0, 0])


def write_log(logs: Sequence[EpisodeLog], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "instance", "return", "feasible_at_step", "best_makespan"])
        for e in logs:
            w.writerow([e.episode, e.instance, repr(float(e.ret)), e.feasible_at, repr(float(e.best_makespan))])


def read_log(path: str | Path) -> list[EpisodeLog]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [EpisodeLog(int(r["episode"]), r["instance"], float(r["return"]), int(r["feasible_at_step"]),
                       float(r["best_makespan"])) for r in rows]


def load_model(path: str | Path, seed: int = 0) -> ActorCritic:
    params, _ = nn.load_weights(path)
    model = ActorCritic(seed)
    model.store.load(params)
    return model


def evaluate(model: ActorCritic, instance: PlanInstance, horizon: int = env.DEFAULT_HORIZON):
    """Greedy (mode) rollout; returns the best feasible plan found or None."""
    plan, traj = env.episode(instance, GnnPolicy(model, deterministic=True), horizon)
    return plan, len(traj)
