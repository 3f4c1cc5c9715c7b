"""Multi-task DDPG for one-step sizing episodes.

The actor is task agnostic: it sees a constant context and emits one raw
action shared by every training corner. The critic is a shared trunk over
``[state, action]`` plus a per-task additive bias on its first hidden layer.
Per-task gradients of both networks are combined with PCGrad.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .env.core import PASS_REWARD, STATE_DIM
from .nn import AdamState, MlpNetwork, NonFiniteError, adam_step, mlp_forward, mlp_gradients


def substream(root_seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named phase, derived from one root seed."""
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), zlib.crc32(name.encode())]))


@dataclass
class AgentConfig:
    batch_size: int = 64
    buffer_capacity: int = 1000
    noise_std: float = 0.2
    noise_clip: float = 2.0        # truncation, in units of noise_std
    warmup: int = 50
    retask_warmup: int = 20
    eval_every: int = 10
    hidden: int = 64
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    baseline: str = "zero"         # "zero" | "running_mean"
    pcgrad_reduction: str = "sum"  # "sum" | "mean"

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.buffer_capacity < 1:
            raise ValueError("batch_size and buffer_capacity must be positive")
        if self.noise_std < 0 or self.noise_clip <= 0:
            raise ValueError("noise_std must be >= 0 and noise_clip > 0")
        if self.warmup < 0 or self.retask_warmup < 0 or self.eval_every < 1:
            raise ValueError("warmup counts must be >= 0 and eval_every >= 1")
        if self.baseline not in ("zero", "running_mean"):
            raise ValueError(f"baseline must be 'zero' or 'running_mean', got {self.baseline!r}")
        if self.pcgrad_reduction not in ("sum", "mean"):
            raise ValueError(f"pcgrad_reduction must be 'sum' or 'mean', got {self.pcgrad_reduction!r}")

    @classmethod
    def from_mapping(cls, values: dict) -> "AgentConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ValueError(f"unknown agent option(s): {', '.join(unknown)}")
        defaults = cls()
        kwargs = {}
        for k, v in values.items():
            kind = type(getattr(defaults, k))
            try:
                kwargs[k] = kind(v)
            except ValueError:
                raise ValueError(f"{k}: expected {kind.__name__}, got {v!r}") from None
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    task_id: int


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions for one task."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_dim))
        self.actions = np.zeros((self.capacity, action_dim))
        self.rewards = np.zeros(self.capacity)
        self.head = 0  # next write slot
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state: np.ndarray, action: np.ndarray, reward: float) -> None:
        self.states[self.head] = state
        self.actions[self.head] = action
        self.rewards[self.head] = reward
        self.head = (self.head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        start = (self.head - self.size) % self.capacity
        return (start + np.arange(self.size)) % self.capacity

    def get(self, i: int) -> tuple[np.ndarray, np.ndarray, float]:
        """i-th oldest stored transition."""
        if not 0 <= i < self.size:
            raise IndexError(i)
        k = self._order()[i]
        return self.states[k].copy(), self.actions[k].copy(), float(self.rewards[k])

    def sample(self, rng: np.random.Generator, count: int):
        idx = self._order()[rng.integers(0, self.size, size=count)]
        return self.states[idx], self.actions[idx], self.rewards[idx]

    def state_dict(self) -> dict:
        order = self._order()
        return {
            "capacity": self.capacity,
            "states": self.states[order],
            "actions": self.actions[order],
            "rewards": self.rewards[order],
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "ReplayBuffer":
        states = np.asarray(d["states"])
        buf = cls(int(d["capacity"]), states.shape[1], np.asarray(d["actions"]).shape[1])
        n = states.shape[0]
        buf.states[:n] = states
        buf.actions[:n] = d["actions"]
        buf.rewards[:n] = d["rewards"]
        buf.size = n
        buf.head = n % buf.capacity
        return buf


@dataclass
class SubBatch:
    task_id: int
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray


def stratified_quotas(batch_size: int, n_tasks: int) -> list[int]:
    base, extra = divmod(batch_size, n_tasks)
    return [base + (1 if i < extra else 0) for i in range(n_tasks)]


def pcgrad_project(grads: Sequence[np.ndarray], rng: np.random.Generator) -> list[np.ndarray]:
    """Project each g_i, in a fresh random order, onto the normal plane of
    every *original* g_j it conflicts with. Zero-norm g_j are skipped."""
    gs = [np.asarray(getattr(g, "values", g), dtype=np.float64) for g in grads]
    if not gs:
        raise ValueError("PCGrad needs at least one gradient")
    if len({g.shape for g in gs}) != 1:
        raise ValueError("all gradients must have the same length")
    k = len(gs)
    if k == 1:
        return [gs[0].copy()]
    norms_sq = [float(g @ g) for g in gs]
    projected = []
    for i in range(k):
        g = gs[i].copy()
        others = [j for j in range(k) if j != i]
        for j in rng.permutation(others):
            if norms_sq[j] == 0.0:
                continue
            dot = float(g @ gs[j])
            if dot < 0.0:
                g -= (dot / norms_sq[j]) * gs[j]
        projected.append(g)
    return projected


def pcgrad_combine(grads: Sequence[np.ndarray], rng: np.random.Generator, reduction: str = "sum") -> np.ndarray:
    """Project away pairwise conflicts, then sum (or average) the task gradients."""
    projected = pcgrad_project(grads, rng)
    if len(projected) == 1:
        return projected[0]
    total = np.sum(projected, axis=0)
    return total / len(projected) if reduction == "mean" else total


def truncated_normal(rng: np.random.Generator, std: float, clip: float, size: int) -> np.ndarray:
    """Normal(0, std) truncated to +-clip*std by resampling."""
    out = rng.normal(0.0, std, size=size)
    if std == 0:
        return out
    bad = np.abs(out) > clip * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > clip * std
    return out


class Agent:
    def __init__(self, n_actions: int, n_tasks: int, config: AgentConfig | None = None, seed: int = 0):
        self.config = config or AgentConfig()
        self.n_actions = int(n_actions)
        self.n_tasks = int(n_tasks)
        self.state_dim = STATE_DIM
        cfg = self.config
        init_rng = substream(seed, "agent-init")
        self.actor = MlpNetwork.create([STATE_DIM, cfg.hidden, cfg.hidden, self.n_actions], init_rng, "tanh")
        self.critic = MlpNetwork.create([STATE_DIM + self.n_actions, cfg.hidden, cfg.hidden, 1], init_rng, "identity")
        self.adapters = np.zeros((self.n_tasks, cfg.hidden))
        self.actor_adam = AdamState.zeros(self.actor.param_count, lr=cfg.actor_lr)
        self.critic_adam = AdamState.zeros(self.critic.param_count + self.adapters.size, lr=cfg.critic_lr)
        self.noise_rng = substream(seed, "noise")
        self.sample_rng = substream(seed, "sampler")
        self.pcgrad_rng = substream(seed, "pcgrad")
        self.context = np.zeros(STATE_DIM)
        self.buffers: dict[int, ReplayBuffer] = {}
        self.active_tasks: list[int] = []
        self.warmup_until = cfg.warmup
        self.reward_sum = 0.0
        self.reward_count = 0

    # -- task set -----------------------------------------------------------
    def set_tasks(self, task_ids: Sequence[int]) -> list[int]:
        """Switch the training task set; returns the ids that got fresh buffers.

        Buffers of tasks that stay are kept, the rest are dropped.
        """
        task_ids = [int(t) for t in task_ids]
        if len(set(task_ids)) != len(task_ids):
            raise ValueError(f"duplicate task ids in {task_ids}")
        for t in task_ids:
            if not 0 <= t < self.n_tasks:
                raise ValueError(f"task id {t} out of range [0, {self.n_tasks})")
        fresh = [t for t in task_ids if t not in self.buffers]
        self.buffers = {
            t: self.buffers[t] if t in self.buffers
            else ReplayBuffer(self.config.buffer_capacity, self.state_dim, self.n_actions)
            for t in task_ids
        }
        self.active_tasks = task_ids
        return fresh

    # -- acting -------------------------------------------------------------
    def actor_output(self) -> np.ndarray:
        return mlp_forward(self.actor, self.context)

    def select_action(self, episode: int) -> np.ndarray:
        """Uniform random during warm-up, else noisy actor output clipped to [-1, 1]."""
        if episode <= self.warmup_until:
            return self.noise_rng.uniform(-1.0, 1.0, size=self.n_actions)
        noise = truncated_normal(self.noise_rng, self.config.noise_std, self.config.noise_clip, self.n_actions)
        return np.clip(self.actor_output() + noise, -1.0, 1.0)

    # -- memory -------------------------------------------------------------
    def store_transition(self, tr: Transition) -> None:
        if tr.task_id not in self.buffers:
            raise KeyError(f"task {tr.task_id} is not in the training task set {self.active_tasks}")
        if tr.reward > PASS_REWARD + 1e-12:
            raise ValueError(f"reward {tr.reward} exceeds the pass reward {PASS_REWARD}")
        self.buffers[tr.task_id].push(tr.state, tr.action, tr.reward)
        self.reward_sum += tr.reward
        self.reward_count += 1

    def sample_stratified_batch(self, rng: np.random.Generator | None = None) -> list[SubBatch]:
        rng = rng or self.sample_rng
        k = len(self.active_tasks)
        if k == 0:
            raise ValueError("no training tasks set")
        if self.config.batch_size < k:
            raise ValueError(f"batch size {self.config.batch_size} is smaller than the {k} training tasks")
        for t in self.active_tasks:
            if len(self.buffers[t]) == 0:
                raise ValueError(f"replay buffer for task {t} is empty")
        batch = []
        for t, quota in zip(self.active_tasks, stratified_quotas(self.config.batch_size, k)):
            s, a, r = self.buffers[t].sample(rng, quota)
            batch.append(SubBatch(t, s, a, r))
        return batch

    # -- learning -----------------------------------------------------------
    @property
    def baseline(self) -> float:
        if self.config.baseline == "running_mean" and self.reward_count:
            return self.reward_sum / self.reward_count
        return 0.0

    def critic_values(self, states: np.ndarray, actions: np.ndarray, task_id: int) -> np.ndarray:
        x = np.concatenate([np.atleast_2d(states), np.atleast_2d(actions)], axis=1)
        return mlp_forward(self.critic, x, self.adapters[task_id])[:, 0]

    def _critic_flat(self) -> np.ndarray:
        return np.concatenate([self.critic.flatten(), self.adapters.ravel()])

    def train_step(self, batch: Sequence[SubBatch]) -> tuple[list[float], list[float]]:
        """One critic update then one actor update, each PCGrad-combined.

        Returns per-task critic losses and actor objectives (mean Q over the
        task's sub-batch, scaled by 1/N_s). Nothing is modified if any loss or
        gradient is non-finite.
        """
        n_s = self.config.batch_size
        b = self.baseline
        n_trunk = self.critic.param_count
        losses, critic_grads = [], []
        for sb in batch:
            x = np.concatenate([sb.states, sb.actions], axis=1)
            q = mlp_forward(self.critic, x, self.adapters[sb.task_id])[:, 0]
            err = sb.rewards - b - q
            loss = float(err @ err) / n_s
            if not np.isfinite(loss):
                raise NonFiniteError(f"non-finite critic loss for task {sb.task_id}")
            flat, _, first_delta = mlp_gradients(
                self.critic, x, (-2.0 / n_s * err)[:, None], self.adapters[sb.task_id],
                tag="critic", return_first_delta=True,
            )
            g = np.zeros(n_trunk + self.adapters.size)
            g[:n_trunk] = flat.values
            row = n_trunk + sb.task_id * self.config.hidden
            g[row : row + self.config.hidden] = first_delta.sum(axis=0)
            losses.append(loss)
            critic_grads.append(g)
        critic_g = pcgrad_combine(critic_grads, self.pcgrad_rng, self.config.pcgrad_reduction)
        new_critic, new_critic_adam = adam_step(self._critic_flat(), critic_g, self.critic_adam)

        # actor gradient against the updated critic
        trial = self.critic.unflatten(new_critic[:n_trunk])
        trial_adapters = new_critic[n_trunk:].reshape(self.adapters.shape)
        action = self.actor_output()
        objectives, actor_grads = [], []
        for sb in batch:
            x = np.concatenate([sb.states, np.broadcast_to(action, sb.actions.shape)], axis=1)
            offset = trial_adapters[sb.task_id]
            q = mlp_forward(trial, x, offset)[:, 0]
            _, dx = mlp_gradients(trial, x, np.full((len(q), 1), 1.0 / n_s), offset)
            dq_da = dx[:, self.state_dim:].sum(axis=0)
            objectives.append(float(q.sum()) / n_s)
            flat, _ = mlp_gradients(self.actor, self.context, -dq_da, tag="actor")
            actor_grads.append(flat.values)
        actor_g = pcgrad_combine(actor_grads, self.pcgrad_rng, self.config.pcgrad_reduction)
        new_actor, new_actor_adam = adam_step(self.actor.flatten(), actor_g, self.actor_adam)
        if not (np.all(np.isfinite(new_critic)) and np.all(np.isfinite(new_actor))):
            raise NonFiniteError("update produced non-finite parameters; step discarded")

        self.critic.load_flat(new_critic[:n_trunk])
        self.adapters = trial_adapters.copy()
        self.critic_adam = new_critic_adam
        self.actor.load_flat(new_actor)
        self.actor_adam = new_actor_adam
        return losses, objectives

    # -- persistence --------------------------------------------------------
    def state_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "n_actions": self.n_actions,
            "n_tasks": self.n_tasks,
            "actor": self.actor.flatten(),
            "critic": self.critic.flatten(),
            "adapters": self.adapters,
            "actor_adam": _adam_dict(self.actor_adam),
            "critic_adam": _adam_dict(self.critic_adam),
            "rng": {
                "noise": self.noise_rng.bit_generator.state,
                "sampler": self.sample_rng.bit_generator.state,
                "pcgrad": self.pcgrad_rng.bit_generator.state,
            },
            "active_tasks": list(self.active_tasks),
            "buffers": {str(t): self.buffers[t].state_dict() for t in self.active_tasks},
            "warmup_until": self.warmup_until,
            "reward_sum": self.reward_sum,
            "reward_count": self.reward_count,
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "Agent":
        agent = cls(int(d["n_actions"]), int(d["n_tasks"]), AgentConfig(**d["config"]), seed=0)
        agent.actor.load_flat(np.asarray(d["actor"]))
        agent.critic.load_flat(np.asarray(d["critic"]))
        agent.adapters = np.asarray(d["adapters"], dtype=np.float64).reshape(agent.adapters.shape).copy()
        agent.actor_adam = _adam_from(d["actor_adam"])
        agent.critic_adam = _adam_from(d["critic_adam"])
        agent.noise_rng.bit_generator.state = d["rng"]["noise"]
        agent.sample_rng.bit_generator.state = d["rng"]["sampler"]
        agent.pcgrad_rng.bit_generator.state = d["rng"]["pcgrad"]
        agent.active_tasks = [int(t) for t in d["active_tasks"]]
        agent.buffers = {int(t): ReplayBuffer.from_state_dict(b) for t, b in d["buffers"].items()}
        agent.warmup_until = int(d["warmup_until"])
        agent.reward_sum = float(d["reward_sum"])
        agent.reward_count = int(d["reward_count"])
        return agent


def _adam_dict(s: AdamState) -> dict:
    return {"m": s.m, "v": s.v, "t": s.t, "lr": s.lr, "beta1": s.beta1, "beta2": s.beta2, "eps": s.eps}


def _adam_from(d: dict) -> AdamState:
    return AdamState(np.asarray(d["m"], dtype=np.float64).copy(), np.asarray(d["v"], dtype=np.float64).copy(),
                     int(d["t"]), float(d["lr"]), float(d["beta1"]), float(d["beta2"]), float(d["eps"]))
