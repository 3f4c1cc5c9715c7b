"""Seeded synthetic benchmarks with a planted feasible point.

Metric j at corner c is a quadratic bowl in the normalized sizing,
``b_j + a_j * ||x - center_j - shift_j(c)||^2``. The corner shift is affine in
the corner's normalized vdd/temperature plus a per-process offset, so it is a
function of the corner's identity rather than its position in a list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import PROCESSES, Constraint, DesignSpace, Parameter, PvtCorner, denormalize_action

SHIFT_SCALE = 0.15
CENTER_SPREAD = 0.25   # std of each bowl center's offset from the witness
BOUND_SLACK = 0.05


@dataclass
class SyntheticModel:
    centers: np.ndarray         # (m, n)
    amplitudes: np.ndarray      # (m,)
    baselines: np.ndarray       # (m,)
    process_shift: np.ndarray   # (m, 5, n)
    vdd_shift: np.ndarray       # (m, n)
    temp_shift: np.ndarray      # (m, n)
    difficulty: float
    witness: np.ndarray         # physical sizing, on grid
    voltage_range: tuple[float, float]
    temp_range: tuple[float, float]

    @property
    def n_metrics(self) -> int:
        return self.centers.shape[0]

    def unit_coords(self, corners: Sequence[PvtCorner]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        (vlo, vhi), (tlo, thi) = self.voltage_range, self.temp_range
        proc = np.array([PROCESSES.index(c.process) for c in corners])
        s = np.array([2 * (c.vdd - vlo) / (vhi - vlo) - 1 if vhi > vlo else 0.0 for c in corners])
        tau = np.array([2 * (c.temp - tlo) / (thi - tlo) - 1 if thi > tlo else 0.0 for c in corners])
        return proc, s, tau

    def shifts(self, corners: Sequence[PvtCorner]) -> np.ndarray:
        """Corner shifts, shape (m, len(corners), n)."""
        proc, s, tau = self.unit_coords(corners)
        return self.difficulty * (
            self.process_shift[:, proc, :]
            + self.vdd_shift[:, None, :] * s[None, :, None]
            + self.temp_shift[:, None, :] * tau[None, :, None]
        )

    def values(self, x_norm: np.ndarray, shifts: np.ndarray) -> np.ndarray:
        """Metric matrix (corners, m) at a normalized sizing."""
        diff = x_norm[None, None, :] - self.centers[:, None, :] - shifts
        f = self.baselines[:, None] + self.amplitudes[:, None] * np.einsum("jcn,jcn->jc", diff, diff)
        return f.T


def synthetic_design_space(n_params: int) -> DesignSpace:
    return DesignSpace(tuple(Parameter(f"x{k}", 0.0, 10.0, 0.01, "") for k in range(n_params)))


def _box_extremes(u: np.ndarray, v: np.ndarray, t: np.ndarray) -> tuple[float, float]:
    """Exact min and max of ||u - s*v - tau*t||^2 over s, tau in [-1, 1]."""
    def g(s, tau):
        d = u - s * v - tau * t
        return float(d @ d)

    candidates = [(s, tau) for s in (-1.0, 1.0) for tau in (-1.0, 1.0)]
    vv, tt, vt = v @ v, t @ t, v @ t
    uv, ut = u @ v, u @ t
    det = vv * tt - vt * vt
    if det > 1e-14:
        s0 = (uv * tt - ut * vt) / det
        t0 = (ut * vv - uv * vt) / det
        if -1 <= s0 <= 1 and -1 <= t0 <= 1:
            candidates.append((s0, t0))
    for tau in (-1.0, 1.0):
        if vv > 0:
            candidates.append((float(np.clip((uv - tau * vt) / vv, -1, 1)), tau))
    for s in (-1.0, 1.0):
        if tt > 0:
            candidates.append((s, float(np.clip((ut - s * vt) / tt, -1, 1))))
    vals = [g(s, tau) for s, tau in candidates]
    return min(vals), max(vals)


def generate_synthetic_benchmark(
    seed: int,
    n_params: int,
    n_metrics: int,
    corners: Sequence[PvtCorner],
    difficulty: float = 1.0,
    voltage_range: tuple[float, float] = (1.0, 1.2),
    temp_range: tuple[float, float] = (0.0, 100.0),
    bounds_over: str = "corners",
    name: str | None = None,
):
    """Build a benchmark whose witness sizing passes every corner.

    ``bounds_over="envelope"`` sets bounds from the worst case over the whole
    continuous vdd/temperature box for all five process models, so the
    witness also passes any other corner drawn from those ranges.
    """
    from .benchmark import Benchmark

    if n_params < 1 or n_metrics < 1:
        raise ValueError("synthetic benchmark needs n_params >= 1 and n_metrics >= 1")
    if bounds_over not in ("corners", "envelope"):
        raise ValueError(f"bounds_over must be 'corners' or 'envelope', got {bounds_over!r}")
    rng = np.random.default_rng(seed)
    m, n = n_metrics, n_params
    space = synthetic_design_space(n)
    witness = denormalize_action(rng.uniform(-0.5, 0.5, size=n), space)
    x_star = space.normalize(witness)
    model = SyntheticModel(
        # centers sit near the witness so the feasible region is a narrow lens
        centers=x_star + rng.normal(0.0, CENTER_SPREAD, size=(m, n)),
        amplitudes=rng.uniform(0.5, 1.5, size=m),
        baselines=rng.uniform(0.5, 1.0, size=m),
        process_shift=rng.normal(0.0, SHIFT_SCALE, size=(m, len(PROCESSES), n)),
        vdd_shift=rng.normal(0.0, SHIFT_SCALE, size=(m, n)),
        temp_shift=rng.normal(0.0, SHIFT_SCALE, size=(m, n)),
        difficulty=float(difficulty),
        witness=witness,
        voltage_range=(float(voltage_range[0]), float(voltage_range[1])),
        temp_range=(float(temp_range[0]), float(temp_range[1])),
    )

    directions = ["at_most" if j % 2 == 0 else "at_least" for j in range(m)]
    if bounds_over == "corners":
        f = model.values(x_star, model.shifts(corners))
        lo_vals, hi_vals = f.min(axis=0), f.max(axis=0)
    else:
        lo_vals, hi_vals = np.full(m, np.inf), np.full(m, -np.inf)
        d = model.difficulty
        for j in range(m):
            for p in range(len(PROCESSES)):
                u = x_star - model.centers[j] - d * model.process_shift[j, p]
                lo_d, hi_d = _box_extremes(u, d * model.vdd_shift[j], d * model.temp_shift[j])
                a, b = model.amplitudes[j], model.baselines[j]
                lo_vals[j] = min(lo_vals[j], b + a * lo_d)
                hi_vals[j] = max(hi_vals[j], b + a * hi_d)
    constraints = [
        Constraint(
            f"f{j}",
            directions[j],
            float(hi_vals[j] * (1 + BOUND_SLACK) if directions[j] == "at_most" else lo_vals[j] * (1 - BOUND_SLACK)),
        )
        for j in range(m)
    ]
    return Benchmark(
        name=name or f"synthetic-s{seed}-n{n}-m{m}-d{difficulty:g}",
        space=space,
        constraints=constraints,
        corners=list(corners),
        voltage_range=model.voltage_range,
        temp_range=model.temp_range,
        surrogate="synthetic",
        model=model,
    )


def evaluate_synthetic(sizing: np.ndarray, corner: PvtCorner, benchmark) -> dict[str, float]:
    model: SyntheticModel = benchmark.model
    x_norm = benchmark.space.normalize(sizing)
    row = model.values(x_norm, model.shifts([corner]))[0]
    return {c.metric: float(v) for c, v in zip(benchmark.constraints, row)}
