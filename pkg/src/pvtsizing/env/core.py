"""Corners, design spaces, constraints and the corner reward."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

PROCESSES = ("TT", "SS", "FF", "SF", "FS")
PASS_REWARD = 0.2
PASS_SLACK = -0.02
STATE_DIM = len(PROCESSES) + 2


@dataclass(frozen=True)
class PvtCorner:
    process: str
    vdd: float
    temp: float
    is_nominal: bool = False

    def __post_init__(self) -> None:
        if self.process not in PROCESSES:
            raise ValueError(f"unknown process model {self.process!r}; expected one of {PROCESSES}")

    @property
    def key(self) -> tuple[str, float, float]:
        return (self.process, float(self.vdd), float(self.temp))

    def to_dict(self) -> dict:
        return {"process": self.process, "vdd": self.vdd, "temp": self.temp, "is_nominal": self.is_nominal}


@dataclass(frozen=True)
class Parameter:
    name: str
    lower: float
    upper: float
    precision: float
    unit: str = ""

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower bound {self.lower} must be below upper bound {self.upper}")
        if self.precision <= 0:
            raise ValueError(f"{self.name}: precision must be positive")
        steps = (self.upper - self.lower) / self.precision
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"{self.name}: range {self.upper - self.lower} is not a multiple of precision {self.precision}")

    @property
    def n_steps(self) -> int:
        return int(round((self.upper - self.lower) / self.precision))


@dataclass(frozen=True)
class DesignSpace:
    params: tuple[Parameter, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))
        if not self.params:
            raise ValueError("design space needs at least one parameter")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")

    def __len__(self) -> int:
        return len(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    @property
    def lower(self) -> np.ndarray:
        return np.array([p.lower for p in self.params])

    @property
    def upper(self) -> np.ndarray:
        return np.array([p.upper for p in self.params])

    @property
    def precision(self) -> np.ndarray:
        return np.array([p.precision for p in self.params])

    def grid_size(self) -> int:
        return math.prod(p.n_steps + 1 for p in self.params)

    def contains(self, sizing: np.ndarray, tol: float = 1e-9) -> bool:
        """True when every value is inside its bounds and on the precision grid."""
        x = np.asarray(sizing, dtype=np.float64)
        if x.shape != (len(self),):
            return False
        lo, hi, step = self.lower, self.upper, self.precision
        if np.any(x < lo - tol * step) or np.any(x > hi + tol * step):
            return False
        k = (x - lo) / step
        return bool(np.all(np.abs(k - np.round(k)) <= 1e-6))

    def normalize(self, sizing: np.ndarray) -> np.ndarray:
        """Physical sizing -> [-1, 1]^n (inverse of the affine part of denormalize)."""
        x = np.asarray(sizing, dtype=np.float64)
        return 2.0 * (x - self.lower) / (self.upper - self.lower) - 1.0


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # the 1e-9 absorbs representation error at exact halves
    return np.sign(x) * np.floor(np.abs(x) + 0.5 + 1e-9)


def denormalize_action(raw: np.ndarray, space: DesignSpace) -> np.ndarray:
    """Map a raw action in [-1, 1]^n to an on-grid sizing vector.

    Out-of-range entries are clipped first, so the map is total.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1] != len(space):
        raise ValueError(f"action has {raw.shape[-1]} entries, design space has {len(space)}")
    raw = np.clip(raw, -1.0, 1.0)
    lo, hi, step = space.lower, space.upper, space.precision
    k = _round_half_away((raw + 1.0) / 2.0 * (hi - lo) / step)
    k = np.clip(k, 0, np.array([p.n_steps for p in space.params]))
    return lo + k * step


def encode_state(
    corner: PvtCorner,
    voltage_range: Sequence[float],
    temp_range: Sequence[float],
) -> np.ndarray:
    """One-hot process (TT, SS, FF, SF, FS) followed by vdd and temp mapped to [-1, 1]."""
    vlo, vhi = voltage_range
    tlo, thi = temp_range
    if not vlo <= corner.vdd <= vhi:
        raise ValueError(f"vdd {corner.vdd} outside declared range [{vlo}, {vhi}]")
    if not tlo <= corner.temp <= thi:
        raise ValueError(f"temperature {corner.temp} outside declared range [{tlo}, {thi}]")
    state = np.zeros(STATE_DIM)
    state[PROCESSES.index(corner.process)] = 1.0
    state[5] = _to_unit(corner.vdd, vlo, vhi)
    state[6] = _to_unit(corner.temp, tlo, thi)
    return state


def _to_unit(x: float, lo: float, hi: float) -> float:
    if hi == lo:
        return 0.0
    return 2.0 * (x - lo) / (hi - lo) - 1.0


@dataclass(frozen=True)
class Constraint:
    metric: str
    direction: str  # "at_least" | "at_most"
    bound: float
    unit: str = ""

    def __post_init__(self) -> None:
        if self.direction not in ("at_least", "at_most"):
            raise ValueError(f"constraint direction must be at_least or at_most, got {self.direction!r}")
        if not self.bound > 0:
            raise ValueError(f"constraint bound for {self.metric} must be positive")

    def to_dict(self) -> dict:
        return {"metric": self.metric, "direction": self.direction, "bound": self.bound, "unit": self.unit}


def deficits(values: np.ndarray, constraints: Sequence[Constraint]) -> np.ndarray:
    """Relative per-metric deficit, <= 0 when violated and 0 when met.

    ``values`` has metrics along the last axis, in constraint order. Negative
    metric values are floored at zero so the deficit stays in [-1, 0].
    """
    m = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
    bound = np.array([c.bound for c in constraints])
    sign = np.array([1.0 if c.direction == "at_least" else -1.0 for c in constraints])
    return np.minimum(sign * (m - bound) / (m + bound), 0.0)


def rewards_from_values(values: np.ndarray, constraints: Sequence[Constraint]) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized reward: returns (r, R) over the leading axes of ``values``."""
    r = deficits(values, constraints).sum(axis=-1)
    big_r = np.where(r >= PASS_SLACK, PASS_REWARD, r)
    return r, big_r


def compute_reward(metrics: Mapping[str, float], constraints: Sequence[Constraint]) -> tuple[float, float]:
    missing = [c.metric for c in constraints if c.metric not in metrics]
    if missing:
        raise KeyError(f"metrics missing for constraints: {', '.join(missing)}")
    values = np.array([float(metrics[c.metric]) for c in constraints])
    r, big_r = rewards_from_values(values, constraints)
    return float(r), float(big_r)


def _nominal_pick(values: Sequence[float]) -> float:
    mid = (min(values) + max(values)) / 2.0
    # rounding keeps float noise from breaking ties toward the later value
    return min(values, key=lambda v: round(abs(v - mid), 9))


def factorial_corners(
    processes: Sequence[str], voltages: Sequence[float], temps: Sequence[float]
) -> list[PvtCorner]:
    """Full Cartesian product, process-major. The nominal corner is TT (or the
    first process) at the axis values closest to each axis midpoint; ties go
    to the earlier-listed value."""
    for name, axis in (("processes", processes), ("voltages", voltages), ("temperatures", temps)):
        if len(axis) == 0:
            raise ValueError(f"factorial corner spec has an empty {name} axis")
    nom = ("TT" if "TT" in processes else processes[0], _nominal_pick(voltages), _nominal_pick(temps))
    return [
        PvtCorner(p, float(v), float(t), (p, v, t) == nom)
        for p, v, t in itertools.product(processes, voltages, temps)
    ]


def monte_carlo_corners(
    count: int,
    seed: int,
    voltage_range: Sequence[float],
    temp_range: Sequence[float],
) -> list[PvtCorner]:
    """``count`` random corners plus the nominal (TT, mid vdd, mid temp).

    Corners are drawn one at a time from one stream, so the first 20 corners
    for a seed are the same whatever ``count`` is.
    """
    if count < 1:
        raise ValueError("Monte Carlo corner count must be at least 1")
    rng = np.random.default_rng(seed)
    vlo, vhi = voltage_range
    tlo, thi = temp_range
    corners = []
    for _ in range(count):
        p = PROCESSES[int(rng.integers(len(PROCESSES)))]
        v = float(rng.uniform(vlo, vhi))
        t = float(rng.uniform(tlo, thi))
        corners.append(PvtCorner(p, v, t))
    nominal = PvtCorner("TT", (vlo + vhi) / 2.0, (tlo + thi) / 2.0, True)
    if not any(c.key == nominal.key for c in corners):
        corners.append(nominal)
    else:
        corners = [PvtCorner(c.process, c.vdd, c.temp, c.key == nominal.key) for c in corners]
    return corners


def build_corner_set(spec: Mapping) -> list[PvtCorner]:
    """Dispatch on ``spec["kind"]``: ``factorial`` or ``monte_carlo``."""
    kind = spec.get("kind")
    if kind == "factorial":
        return factorial_corners(spec["processes"], spec["voltages"], spec["temperatures"])
    if kind == "monte_carlo":
        return monte_carlo_corners(
            int(spec["count"]), int(spec.get("seed", 0)), spec["voltage_range"], spec["temperature_range"]
        )
    raise ValueError(f"unknown corner spec kind {kind!r}; expected factorial or monte_carlo")
