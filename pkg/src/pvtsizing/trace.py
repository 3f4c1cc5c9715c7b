"""Simulation accounting and run traces.

Every (sizing, corner) evaluation goes through :class:`Simulator`, which
charges it to a phase of the :class:`RunTrace`. Records are plain dicts so
they serialize to JSON lines unchanged.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1
PHASES = ("warmup", "rollout", "subset_eval", "full_eval")


class BudgetExhausted(RuntimeError):
    pass


@dataclass
class RunTrace:
    method: str
    benchmark: str
    seed: int
    sims: int = 0
    phase_counts: dict = field(default_factory=lambda: {p: 0 for p in PHASES})
    records: list = field(default_factory=list)
    wall: dict = field(default_factory=dict)  # seconds per phase; never written to records

    def log(self, kind: str, **payload) -> dict:
        rec = {
            "schema": SCHEMA_VERSION,
            "method": self.method,
            "benchmark": self.benchmark,
            "seed": self.seed,
            "kind": kind,
            "sims": self.sims,
        }
        rec.update(payload)
        self.records.append(rec)
        return rec

    def charge(self, phase: str, count: int) -> None:
        if phase not in self.phase_counts:
            raise ValueError(f"unknown phase {phase!r}")
        self.sims += count
        self.phase_counts[phase] += count

    def add_wall(self, phase: str, seconds: float) -> None:
        self.wall[phase] = self.wall.get(phase, 0.0) + seconds

    def state_dict(self) -> dict:
        return {
            "method": self.method,
            "benchmark": self.benchmark,
            "seed": self.seed,
            "sims": self.sims,
            "phase_counts": dict(self.phase_counts),
            "records": self.records,
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "RunTrace":
        return cls(d["method"], d["benchmark"], int(d["seed"]), int(d["sims"]),
                   dict(d["phase_counts"]), list(d["records"]))


class Simulator:
    """Counts simulations against a budget; the only path to the evaluator."""

    def __init__(self, benchmark, trace: RunTrace, budget: int):
        if budget <= 0:
            raise ValueError("simulation budget must be positive")
        self.benchmark = benchmark
        self.trace = trace
        self.budget = int(budget)

    @property
    def remaining(self) -> int:
        return self.budget - self.trace.sims

    def run(self, sizing: np.ndarray, indices: Sequence[int], phase: str):
        """Simulate ``sizing`` on the given corners; returns (metrics, r, R)."""
        n = len(indices)
        if n > self.remaining:
            raise BudgetExhausted(f"{n} simulations requested, {self.remaining} left of {self.budget}")
        t0 = time.perf_counter()
        out = self.benchmark.rewards(sizing, indices)
        self.trace.charge(phase, n)
        self.trace.add_wall(phase, time.perf_counter() - t0)
        return out


def _round(x) -> float:
    return float(np.round(float(x), 12))


def rounded(values: Iterable[float]) -> list[float]:
    return [_round(v) for v in values]


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def reconcile(records: Sequence[dict]) -> dict:
    """Rebuild per-phase simulation counts from the records alone.

    Episode records carry the corners they simulated, evaluation records the
    corners they checked, generation records the candidates times corners.
    """
    counts = {p: 0 for p in PHASES}
    for rec in records:
        kind = rec["kind"]
        if kind == "episode":
            counts[rec["phase"]] += rec["n_simulated"]
        elif kind == "eval":
            counts["subset_eval"] += len(rec["tasks"])
        elif kind == "full_check":
            counts["full_eval"] += rec["n_corners"]
        elif kind == "generation":
            counts["full_eval"] += rec["evaluations"] * rec["n_corners"]
    counts["total"] = sum(counts[p] for p in PHASES)
    return counts


def learning_curve(records: Sequence[dict]) -> list[tuple[int, float]]:
    """(cumulative simulations, average reward) points from a trace."""
    points = []
    for rec in records:
        if rec["kind"] in ("episode", "eval", "generation") and "avg_reward" in rec:
            points.append((int(rec["sims"]), float(rec["avg_reward"])))
    return points
