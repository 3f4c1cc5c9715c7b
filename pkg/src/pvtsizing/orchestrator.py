"""Outer optimization loop and checkpointing.

One class drives three methods that differ only in how corners become tasks:

* ``robustanalog``: start on the nominal corner, check the full corner set
  after every subset pass, re-prune on failure.
* ``mtl-noprune``: every corner is a task from the start.
* ``ddpg-single``: one task whose reward is the mean over all corners.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import Agent, AgentConfig, Transition, substream
from .env.benchmark import Benchmark
from .env.core import PASS_REWARD, denormalize_action
from .pruner import PerformanceMatrix, dump_selection_csv, select_training_tasks
from .trace import SCHEMA_VERSION, BudgetExhausted, RunTrace, Simulator, rounded

METHODS = ("robustanalog", "mtl-noprune", "ddpg-single")
CHECKPOINT_SCHEMA = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    budget: int = 100_000
    max_iterations: int = 20
    episode_cap: int = 2000
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self) -> None:
        if self.budget <= 0:
            raise ValueError("simulation budget must be positive")
        if self.max_iterations < 1 or self.episode_cap < 1:
            raise ValueError("max_iterations and episode_cap must be >= 1")


@dataclass
class RunResult:
    method: str
    passed: bool
    sizing: np.ndarray | None
    trace: RunTrace
    stop_reason: str


def _all_pass(big_r: np.ndarray) -> bool:
    return bool(np.all(big_r == PASS_REWARD))


class MultiTaskRun:
    def __init__(self, benchmark: Benchmark, method: str = "robustanalog", config: RunConfig | None = None,
                 prune_dump: str | Path | None = None):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
        self.benchmark = benchmark
        self.method = method
        self.config = config or RunConfig()
        self.prune_dump = Path(prune_dump) if prune_dump else None
        self.single = method == "ddpg-single"
        seed = self.config.seed
        self.agent = Agent(len(benchmark.space), 1 if self.single else benchmark.n_corners, self.config.agent, seed)
        self.pruner_rng = substream(seed, "pruner")
        self.trace = RunTrace(method, benchmark.name, seed)
        self.sim = Simulator(benchmark, self.trace, self.config.budget)
        self.all_corners = list(range(benchmark.n_corners))
        self.states = benchmark.states()
        self.episode = 0
        self.iteration = 0
        self.episodes_in_iter = 0
        self.train_steps = 0
        self.done = False
        self.passed = False
        self.stop_reason = ""
        self.sizing: np.ndarray | None = None
        if self.single:
            tasks = [0]
        elif method == "mtl-noprune":
            tasks = list(self.all_corners)
        else:
            tasks = [benchmark.nominal_index]
        self.agent.set_tasks(tasks)
        self.trace.log("iteration", iteration=0, tasks=self._corner_tasks(), reason="start")

    # ------------------------------------------------------------------
    def _corner_tasks(self) -> list[int]:
        return list(self.all_corners) if self.single else list(self.agent.active_tasks)

    def _finish(self, passed: bool, reason: str, sizing: np.ndarray | None = None) -> None:
        self.done = True
        self.passed = passed
        self.stop_reason = reason
        if sizing is not None:
            self.sizing = sizing
        self.trace.log(
            "end",
            passed=passed,
            reason=reason,
            episodes=self.episode,
            iterations=self.iteration,
            phase_counts=dict(self.trace.phase_counts),
            sizing=None if self.sizing is None else rounded(self.sizing),
        )

    def step(self) -> None:
        """Run one episode (plus any evaluation/re-pruning it triggers)."""
        if self.done:
            return
        try:
            self._episode()
        except BudgetExhausted:
            self._finish(False, "budget")

    def run(self, max_episodes: int | None = None) -> RunResult:
        n = 0
        while not self.done and (max_episodes is None or n < max_episodes):
            self.step()
            n += 1
        return self.result()

    def result(self) -> RunResult:
        return RunResult(self.method, self.passed, self.sizing, self.trace, self.stop_reason)

    # ------------------------------------------------------------------
    def _episode(self) -> None:
        agent, bench = self.agent, self.benchmark
        if self.sim.remaining < len(self._corner_tasks()):
            raise BudgetExhausted("not enough budget for another episode")
        self.episode += 1
        self.episodes_in_iter += 1
        warm = self.episode <= agent.warmup_until
        phase = "warmup" if warm else "rollout"
        raw = agent.select_action(self.episode)
        sizing = denormalize_action(raw, bench.space)
        if self.single:
            _, _, big_r = self.sim.run(sizing, self.all_corners, phase)
            mean_r = float(np.mean(big_r))
            agent.store_transition(Transition(self.states[bench.nominal_index], raw, mean_r, 0))
            self.trace.log("episode", episode=self.episode, iteration=self.iteration, phase=phase,
                           n_simulated=len(self.all_corners), rewards=rounded(big_r),
                           avg_reward=round(mean_r, 12))
        else:
            tasks = agent.active_tasks
            _, _, big_r = self.sim.run(sizing, tasks, phase)
            for t, rew in zip(tasks, big_r):
                agent.store_transition(Transition(self.states[t], raw, float(rew), t))
            self.trace.log("episode", episode=self.episode, iteration=self.iteration, phase=phase,
                           n_simulated=len(tasks), tasks=list(tasks), rewards=rounded(big_r),
                           avg_reward=round(float(np.mean(big_r)), 12))
        if warm:
            return
        agent.train_step(agent.sample_stratified_batch())
        self.train_steps += 1
        if self.train_steps % self.config.agent.eval_every == 0:
            self._evaluate()
        if not self.done and self.method == "robustanalog" and self.episodes_in_iter >= self.config.episode_cap:
            self._stall()

    def _evaluate(self) -> None:
        sizing = denormalize_action(self.agent.actor_output(), self.benchmark.space)
        tasks = self._corner_tasks()
        _, _, big_r = self.sim.run(sizing, tasks, "subset_eval")
        ok = _all_pass(big_r)
        self.trace.log("eval", episode=self.episode, iteration=self.iteration, tasks=list(tasks),
                       rewards=rounded(big_r), avg_reward=round(float(np.mean(big_r)), 12), passed=ok)
        if not ok:
            return
        if len(tasks) == len(self.all_corners):
            self._finish(True, "passed", sizing)
            return
        self._full_check(sizing, "subset_pass")

    def _full_check(self, sizing: np.ndarray, reason: str) -> None:
        values, r, big_r = self.sim.run(sizing, self.all_corners, "full_eval")
        n_pass = int(np.sum(big_r == PASS_REWARD))
        self.trace.log("full_check", episode=self.episode, iteration=self.iteration, reason=reason,
                       n_corners=len(self.all_corners), pass_count=n_pass,
                       avg_reward=round(float(np.mean(big_r)), 12), passed=n_pass == len(self.all_corners))
        if n_pass == len(self.all_corners):
            self._finish(True, "passed", sizing)
            return
        self._retask(PerformanceMatrix(values, r, big_r))

    def _stall(self) -> None:
        sizing = denormalize_action(self.agent.actor_output(), self.benchmark.space)
        self._full_check(sizing, "stall")

    def _retask(self, perf: PerformanceMatrix) -> None:
        if self.iteration + 1 >= self.config.max_iterations:
            self._finish(False, "max_iterations")
            return
        self.iteration += 1
        sel = select_training_tasks(perf, self.benchmark.nominal_index, int(self.pruner_rng.integers(2**31)))
        if self.prune_dump is not None:
            dump_selection_csv(self.prune_dump, perf, sel, self.benchmark.metric_names, self.iteration,
                               append=self.iteration > 1)
        fresh = self.agent.set_tasks(sel.tasks)
        if fresh:
            self.agent.warmup_until = self.episode + self.config.agent.retask_warmup
        self.episodes_in_iter = 0
        self.trace.log("iteration", iteration=self.iteration, tasks=list(sel.tasks), k=sel.k,
                       fresh=fresh, reason="prune")

    # ------------------------------------------------------------------
    def state_dict(self) -> dict:
        return {
            "method": self.method,
            "benchmark": self.benchmark.describe(),
            "config": {
                "seed": self.config.seed,
                "budget": self.config.budget,
                "max_iterations": self.config.max_iterations,
                "episode_cap": self.config.episode_cap,
            },
            "loop": {
                "episode": self.episode,
                "iteration": self.iteration,
                "episodes_in_iter": self.episodes_in_iter,
                "train_steps": self.train_steps,
                "done": self.done,
                "passed": self.passed,
                "stop_reason": self.stop_reason,
                "sizing": None if self.sizing is None else self.sizing,
                "pruner_rng": self.pruner_rng.bit_generator.state,
            },
            "agent": self.agent.state_dict(),
            "trace": self.trace.state_dict(),
        }

    def save_checkpoint(self, path: str | Path) -> None:
        save_checkpoint(self, path)


def run_robustanalog(benchmark: Benchmark, config: RunConfig | None = None, method: str = "robustanalog",
                     prune_dump: str | Path | None = None) -> RunResult:
    return MultiTaskRun(benchmark, method, config, prune_dump).run()


# -- checkpoint encoding -----------------------------------------------------

def _encode(obj):
    if isinstance(obj, np.ndarray):
        arr = np.ascontiguousarray(obj, dtype="<f8")
        return {"__ndarray__": base64.b64encode(arr.tobytes()).decode("ascii"), "shape": list(arr.shape)}
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            raw = base64.b64decode(obj["__ndarray__"])
            return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).astype(np.float64)
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def save_checkpoint(run: MultiTaskRun, path: str | Path) -> None:
    payload = json.dumps(_encode(run.state_dict()), sort_keys=True, separators=(",", ":")).encode()
    header = json.dumps({
        "format": "pvtsizing-checkpoint",
        "schema": CHECKPOINT_SCHEMA,
        "length": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + b"\n" + payload)


def load_checkpoint(path: str | Path, benchmark: Benchmark) -> MultiTaskRun:
    """Rebuild a run from disk. Raises CheckpointError without side effects on
    version mismatch, truncation, corruption or a benchmark mismatch."""
    try:
        blob = Path(path).read_bytes()
        head, _, payload = blob.partition(b"\n")
        header = json.loads(head)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if header.get("format") != "pvtsizing-checkpoint" or header.get("schema") != CHECKPOINT_SCHEMA:
        raise CheckpointError(f"unsupported checkpoint format/schema in {path}: {header}")
    if len(payload) != header.get("length"):
        raise CheckpointError(f"truncated checkpoint {path}: {len(payload)} of {header.get('length')} bytes")
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise CheckpointError(f"checksum mismatch in checkpoint {path}")
    state = _decode(json.loads(payload))
    if state["benchmark"] != _encode(benchmark.describe()):
        raise CheckpointError(f"checkpoint was written for benchmark {state['benchmark']['name']!r}, "
                              f"not {benchmark.name!r}")

    cfg = state["config"]
    agent = Agent.from_state_dict(state["agent"])
    run = MultiTaskRun(benchmark, state["method"],
                       RunConfig(cfg["seed"], cfg["budget"], cfg["max_iterations"], cfg["episode_cap"], agent.config))
    run.agent = agent
    loop = state["loop"]
    run.episode = int(loop["episode"])
    run.iteration = int(loop["iteration"])
    run.episodes_in_iter = int(loop["episodes_in_iter"])
    run.train_steps = int(loop["train_steps"])
    run.done = bool(loop["done"])
    run.passed = bool(loop["passed"])
    run.stop_reason = loop["stop_reason"]
    run.sizing = None if loop["sizing"] is None else np.asarray(loop["sizing"])
    run.pruner_rng.bit_generator.state = loop["pruner_rng"]
    run.trace = RunTrace.from_state_dict(state["trace"])
    run.sim = Simulator(benchmark, run.trace, cfg["budget"])
    return run


def build_summary(result: RunResult, benchmark: Benchmark) -> dict:
    recs = result.trace.records
    return {
        "schema": SCHEMA_VERSION,
        "method": result.method,
        "benchmark": benchmark.name,
        "seed": result.trace.seed,
        "passed": result.passed,
        "stop_reason": result.stop_reason,
        "total_sims": result.trace.sims,
        "phase_counts": dict(result.trace.phase_counts),
        "sizing": None if result.sizing is None else dict(zip(benchmark.space.names, rounded(result.sizing))),
        "task_sets": [r["tasks"] for r in recs if r["kind"] == "iteration"],
        "wall_clock_s": {k: round(v, 6) for k, v in sorted(result.trace.wall.items())},
    }
