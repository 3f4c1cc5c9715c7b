"""Comparison methods that treat every corner as one task scored by the mean
corner reward: a (mu, lambda) evolution strategy and single-task DDPG."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .agent import substream
from .env.benchmark import Benchmark
from .env.core import PASS_REWARD, denormalize_action
from .orchestrator import MultiTaskRun, RunConfig, RunResult
from .trace import RunTrace, Simulator, rounded


@dataclass
class EsConfig:
    population: int = 16    # lambda
    parents: int = 4        # mu
    sigma0: float = 0.3     # initial per-dimension step, raw action units
    sigma_min: float = 1e-3
    sigma_max: float = 1.0
    adapt: float = 0.85     # 1/5th-rule shrink factor (grow by its inverse)
    elites: int = 1

    def __post_init__(self) -> None:
        if not 1 <= self.parents <= self.population:
            raise ValueError("ES needs 1 <= parents <= population")
        if self.sigma0 <= 0 or not 0 < self.adapt < 1:
            raise ValueError("ES needs sigma0 > 0 and 0 < adapt < 1")
        if self.elites != 1:
            raise ValueError("only single-elite selection is supported")

    @classmethod
    def from_mapping(cls, values: dict) -> "EsConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - names)
        if unknown:
            raise ValueError(f"unknown es option(s): {', '.join(unknown)}")
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


def run_es(benchmark: Benchmark, config: EsConfig | None = None, seed: int = 0, budget: int = 100_000) -> RunResult:
    """Evolve raw actions; fitness is the mean shaped reward over all corners.

    A candidate passes when every corner reward is the pass reward, which is
    the same event as the mean reaching it.
    """
    cfg = config or EsConfig()
    rng = substream(seed, "es")
    trace = RunTrace("es", benchmark.name, seed)
    sim = Simulator(benchmark, trace, budget)
    corners = list(range(benchmark.n_corners))
    n_dim = len(benchmark.space)
    sigma = np.full(n_dim, cfg.sigma0)
    elite_x: np.ndarray | None = None
    elite_f = -np.inf
    parents = np.empty((0, n_dim))
    generation = 0

    def finish(passed: bool, reason: str, sizing):
        trace.log("end", passed=passed, reason=reason, generations=generation,
                  phase_counts=dict(trace.phase_counts), sizing=None if sizing is None else rounded(sizing))
        return RunResult("es", passed, sizing, trace, reason)

    while True:
        if generation == 0:
            pop = rng.uniform(-1.0, 1.0, size=(cfg.population, n_dim))
        else:
            picks = rng.integers(0, len(parents), size=cfg.population)
            pop = np.clip(parents[picks] + sigma * rng.standard_normal((cfg.population, n_dim)), -1.0, 1.0)
        fitness = []
        passed_at = None
        for cand in pop:
            if sim.remaining < len(corners):
                break
            sizing = denormalize_action(cand, benchmark.space)
            _, _, big_r = sim.run(sizing, corners, "full_eval")
            fitness.append(float(np.mean(big_r)))
            if np.all(big_r == PASS_REWARD):
                passed_at = sizing
                break
        fit = np.array(fitness)
        evaluated = pop[: len(fit)]
        successes = int(np.sum(fit > elite_f)) if generation > 0 else 0
        if len(fit):
            best = int(np.argmax(fit))
            if fit[best] > elite_f:
                elite_f, elite_x = float(fit[best]), evaluated[best].copy()
        trace.log("generation", generation=generation, evaluations=len(fit), n_corners=len(corners),
                  best_fitness=round(float(fit.max()), 12) if len(fit) else None,
                  avg_reward=round(elite_f, 12) if np.isfinite(elite_f) else None,
                  sigma=round(float(sigma.mean()), 12))
        if passed_at is not None:
            return finish(True, "passed", passed_at)
        if len(fit) < len(pop):
            return finish(False, "budget", None if elite_x is None else denormalize_action(elite_x, benchmark.space))
        # (mu, lambda) selection over the offspring, plus the single elite
        order = np.argsort(-fit, kind="stable")[: cfg.parents]
        parents = np.vstack([evaluated[order], elite_x[None, :]])
        if generation > 0:
            rate = successes / len(fit)
            if rate > 0.2:
                sigma = sigma / cfg.adapt
            elif rate < 0.2:
                sigma = sigma * cfg.adapt
            sigma = np.clip(sigma, cfg.sigma_min, cfg.sigma_max)
        generation += 1


def run_single_task_ddpg(benchmark: Benchmark, config: RunConfig | None = None) -> RunResult:
    """Same agent with one task; every episode simulates all corners."""
    return MultiTaskRun(benchmark, "ddpg-single", config).run()
