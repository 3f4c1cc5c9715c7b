"""Benchmark container, the built-in OTA2 benchmark, and the INI file format."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import ota2
from .core import (
    Constraint,
    DesignSpace,
    Parameter,
    PvtCorner,
    build_corner_set,
    encode_state,
    rewards_from_values,
)
from .synthetic import SyntheticModel, generate_synthetic_benchmark

OTA2_CORNER_SPEC = {
    "kind": "factorial",
    "processes": ["TT", "SS", "FF", "FS", "SF"],
    "voltages": [1.0, 1.1, 1.2],
    "temperatures": [0.0, 100.0],
}


@dataclass
class Benchmark:
    name: str
    space: DesignSpace
    constraints: list[Constraint]
    corners: list[PvtCorner]
    voltage_range: tuple[float, float]
    temp_range: tuple[float, float]
    surrogate: str
    model: ota2.Ota2Constants | SyntheticModel
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.corners:
            raise ValueError("benchmark needs at least one corner")
        nominal = [i for i, c in enumerate(self.corners) if c.is_nominal]
        if len(nominal) != 1:
            raise ValueError(f"corner set must flag exactly one nominal corner, found {len(nominal)}")
        if self.surrogate not in ("ota2", "synthetic"):
            raise ValueError(f"unknown surrogate {self.surrogate!r}")
        if self.surrogate == "ota2" and len(self.space) != 7:
            raise ValueError("the ota2 surrogate needs a 7-parameter design space (w1..w6, cc)")
        for c in self.corners:
            encode_state(c, self.voltage_range, self.temp_range)

    @property
    def nominal_index(self) -> int:
        return next(i for i, c in enumerate(self.corners) if c.is_nominal)

    @property
    def n_corners(self) -> int:
        return len(self.corners)

    @property
    def metric_names(self) -> list[str]:
        return [c.metric for c in self.constraints]

    def states(self) -> np.ndarray:
        if "states" not in self._cache:
            self._cache["states"] = np.stack(
                [encode_state(c, self.voltage_range, self.temp_range) for c in self.corners]
            )
        return self._cache["states"]

    def _factors(self):
        if "factors" not in self._cache:
            if self.surrogate == "ota2":
                self._cache["factors"] = ota2.corner_factors(self.corners)
            else:
                self._cache["factors"] = self.model.shifts(self.corners)
        return self._cache["factors"]

    def evaluate(self, sizing: np.ndarray, indices: Sequence[int] | None = None) -> np.ndarray:
        """Metric matrix (len(indices), m) in constraint order. Pure."""
        idx = np.arange(self.n_corners) if indices is None else np.asarray(indices, dtype=int)
        x = np.asarray(sizing, dtype=np.float64)
        if self.surrogate == "ota2":
            mu_n, mu_p, theta, supply = (f[idx] for f in self._factors())
            values = ota2.ota2_metrics(x, mu_n, mu_p, theta, supply, self.model)
            order = [ota2.METRICS.index(name) for name in self.metric_names]
            return values[:, order]
        return self.model.values(self.space.normalize(x), self._factors()[:, idx, :])

    def rewards(self, sizing: np.ndarray, indices: Sequence[int] | None = None):
        """(metrics, r, R) for the given corners."""
        values = self.evaluate(sizing, indices)
        r, big_r = rewards_from_values(values, self.constraints)
        return values, r, big_r

    def with_corners(self, corners: Sequence[PvtCorner], name: str | None = None) -> "Benchmark":
        """Same design space, constraints and model on another corner set."""
        return replace(self, corners=list(corners), name=name or self.name, _cache={})

    def describe(self) -> dict:
        return {
            "name": self.name,
            "surrogate": self.surrogate,
            "design_space": [
                {"name": p.name, "lower": p.lower, "upper": p.upper, "precision": p.precision, "unit": p.unit}
                for p in self.space.params
            ],
            "constraints": [c.to_dict() for c in self.constraints],
            "n_corners": self.n_corners,
            "nominal_index": self.nominal_index,
        }


def ota2_benchmark(constants: ota2.Ota2Constants | None = None, corners: Sequence[PvtCorner] | None = None) -> Benchmark:
    return Benchmark(
        name="ota2",
        space=ota2.ota2_design_space(),
        constraints=ota2.ota2_constraints(),
        corners=list(corners) if corners is not None else build_corner_set(OTA2_CORNER_SPEC),
        voltage_range=(1.0, 1.2),
        temp_range=(0.0, 100.0),
        surrogate="ota2",
        model=constants or ota2.load_ota2_constants(),
    )


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _corner_spec(section: configparser.SectionProxy) -> dict:
    kind = section.get("kind", "factorial")
    if kind == "factorial":
        return {
            "kind": "factorial",
            "processes": section.get("processes", "TT SS FF SF FS").split(),
            "voltages": _floats(section["voltages"]),
            "temperatures": _floats(section["temperatures"]),
        }
    return {
        "kind": kind,
        "count": section.getint("count"),
        "seed": section.getint("seed", 0),
        "voltage_range": _floats(section["voltage_range"]),
        "temperature_range": _floats(section["temperature_range"]),
    }


def _ranges(section: configparser.SectionProxy, corners: list[PvtCorner]):
    if "voltage_range" in section:
        vr = tuple(_floats(section["voltage_range"]))
    else:
        vr = (min(c.vdd for c in corners), max(c.vdd for c in corners))
    if "temperature_range" in section:
        tr = tuple(_floats(section["temperature_range"]))
    else:
        tr = (min(c.temp for c in corners), max(c.temp for c in corners))
    return vr, tr


def load_benchmark_file(path: str | Path) -> Benchmark:
    """Read a benchmark definition (INI). See README for the layout."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep parameter-name case
    if not cp.read(path):
        raise FileNotFoundError(f"benchmark file not found: {path}")
    if "benchmark" not in cp:
        raise ValueError(f"{path}: missing [benchmark] section")
    head = cp["benchmark"]
    surrogate = head.get("surrogate", "ota2")
    corners = build_corner_set(_corner_spec(cp["corners"])) if "corners" in cp else None
    if surrogate == "synthetic":
        syn = cp["synthetic"] if "synthetic" in cp else head
        if corners is None:
            raise ValueError(f"{path}: synthetic benchmark needs a [corners] section")
        vr, tr = _ranges(cp["corners"], corners)
        return generate_synthetic_benchmark(
            seed=syn.getint("seed", 0),
            n_params=syn.getint("n_params"),
            n_metrics=syn.getint("n_metrics"),
            corners=corners,
            difficulty=syn.getfloat("difficulty", 1.0),
            voltage_range=vr,
            temp_range=tr,
            bounds_over=syn.get("bounds_over", "corners"),
            name=head.get("name"),
        )
    if surrogate != "ota2":
        raise ValueError(f"{path}: unknown surrogate {surrogate!r}")
    const_ref = head.get("constants", "builtin")
    if const_ref == "builtin":
        constants = ota2.load_ota2_constants()
    else:
        ref = Path(const_ref)
        constants = ota2.load_ota2_constants(ref if ref.is_absolute() else path.parent / ref)
    space = ota2.ota2_design_space()
    if "design_space" in cp:
        rows = []
        for name, row in cp["design_space"].items():
            parts = row.split()
            rows.append(Parameter(name, float(parts[0]), float(parts[1]), float(parts[2]), parts[3] if len(parts) > 3 else ""))
        space = DesignSpace(tuple(rows))
    constraints = ota2.ota2_constraints()
    if "constraints" in cp:
        constraints = []
        for metric, row in cp["constraints"].items():
            parts = row.split()
            constraints.append(Constraint(metric, parts[0], float(parts[1]), parts[2] if len(parts) > 2 else ""))
        unknown = [c.metric for c in constraints if c.metric not in ota2.METRICS]
        if unknown:
            raise ValueError(f"{path}: ota2 has no metric(s) {unknown}; available {list(ota2.METRICS)}")
    corners = corners if corners is not None else build_corner_set(OTA2_CORNER_SPEC)
    vr, tr = _ranges(cp["corners"], corners) if "corners" in cp else ((1.0, 1.2), (0.0, 100.0))
    return Benchmark(
        name=head.get("name", path.stem),
        space=space,
        constraints=constraints,
        corners=corners,
        voltage_range=vr,
        temp_range=tr,
        surrogate="ota2",
        model=constants,
    )
