"""Experiment configuration files.

A config is an INI file. Only ``[experiment]`` is required::

    [experiment]
    benchmark = ota2          # ota2 | synthetic | path to a benchmark file
    method = robustanalog     # robustanalog | es | ddpg-single | mtl-noprune
    seeds = 0 1 2 3 4
    budget = 100000
    max_iterations = 20
    episode_cap = 2000
    output = runs

    [synthetic]               # used when benchmark = synthetic, and by the sweep
    seed = 0
    n_params = 4
    n_metrics = 3
    corners = 20
    corner_seed = 0
    difficulty = 0.5
    bounds_over = corners

    [agent]                   # any AgentConfig field
    [es]                      # any EsConfig field
    [sweep]
    counts = 20 40 80 100 150

Errors raise :class:`ConfigError` with a ``[section] key:`` prefix.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .agent import AgentConfig
from .baselines import EsConfig
from .env.benchmark import Benchmark, load_benchmark_file, ota2_benchmark
from .env.core import PvtCorner, monte_carlo_corners
from .env.synthetic import generate_synthetic_benchmark
from .orchestrator import RunConfig

ALL_METHODS = ("robustanalog", "es", "ddpg-single", "mtl-noprune")
DEFAULT_SWEEP_COUNTS = (20, 40, 80, 100, 150)


class ConfigError(ValueError):
    pass


def _err(section: str, key: str, msg: str) -> ConfigError:
    return ConfigError(f"[{section}] {key}: {msg}")


@dataclass
class SyntheticSpec:
    """Synthetic benchmark over Monte Carlo corners (``corners`` random plus
    the nominal)."""

    seed: int = 0
    n_params: int = 4
    n_metrics: int = 3
    corners: int = 20
    corner_seed: int = 0
    difficulty: float = 0.5
    bounds_over: str = "corners"
    voltage_range: tuple[float, float] = (1.0, 1.2)
    temperature_range: tuple[float, float] = (0.0, 100.0)

    def corner_set(self, count: int | None = None, seed: int | None = None) -> list[PvtCorner]:
        return monte_carlo_corners(
            self.corners if count is None else count,
            self.corner_seed if seed is None else seed,
            self.voltage_range,
            self.temperature_range,
        )

    def build(self, bounds_over: str | None = None) -> Benchmark:
        mode = bounds_over or self.bounds_over
        return generate_synthetic_benchmark(
            self.seed,
            self.n_params,
            self.n_metrics,
            self.corner_set(),
            difficulty=self.difficulty,
            voltage_range=self.voltage_range,
            temp_range=self.temperature_range,
            bounds_over=mode,
            name=f"synthetic-s{self.seed}-n{self.n_params}-m{self.n_metrics}-d{self.difficulty:g}",
        )


@dataclass
class ExperimentConfig:
    benchmark: str = "ota2"
    method: str = "robustanalog"
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    budget: int = 100_000
    max_iterations: int = 20
    episode_cap: int = 2000
    output: str = "runs"
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    agent: AgentConfig = field(default_factory=AgentConfig)
    es: EsConfig = field(default_factory=EsConfig)
    sweep_counts: tuple[int, ...] = DEFAULT_SWEEP_COUNTS
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.method not in ALL_METHODS:
            raise _err("experiment", "method",
                       f"unknown method {self.method!r}; valid methods: {', '.join(ALL_METHODS)}")
        if not self.seeds:
            raise _err("experiment", "seeds", "at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise _err("experiment", "seeds", f"duplicate seeds in {list(self.seeds)}")
        if any(s < 0 for s in self.seeds):
            raise _err("experiment", "seeds", "seeds must be non-negative")
        if self.budget <= 0:
            raise _err("experiment", "budget", f"must be positive, got {self.budget}")
        if self.max_iterations < 1:
            raise _err("experiment", "max_iterations", f"must be >= 1, got {self.max_iterations}")
        if self.episode_cap < 1:
            raise _err("experiment", "episode_cap", f"must be >= 1, got {self.episode_cap}")
        if not self.sweep_counts or any(c < 1 for c in self.sweep_counts):
            raise _err("sweep", "counts", f"needs one or more counts >= 1, got {list(self.sweep_counts)}")
        if self.benchmark not in ("ota2", "synthetic") and not self.benchmark_path().is_file():
            raise _err("experiment", "benchmark",
                       f"expected 'ota2', 'synthetic' or an existing file, got {self.benchmark!r}")

    def benchmark_path(self) -> Path:
        p = Path(self.benchmark)
        return p if p.is_absolute() else self.base_dir / p

    def build_benchmark(self) -> Benchmark:
        if self.benchmark == "ota2":
            return ota2_benchmark()
        if self.benchmark == "synthetic":
            return self.synthetic.build()
        return load_benchmark_file(self.benchmark_path())

    def run_config(self, seed: int) -> RunConfig:
        return RunConfig(seed=seed, budget=self.budget, max_iterations=self.max_iterations,
                         episode_cap=self.episode_cap, agent=self.agent)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "experiment": {
                "benchmark": self.benchmark,
                "method": self.method,
                "seeds": list(self.seeds),
                "budget": self.budget,
                "max_iterations": self.max_iterations,
                "episode_cap": self.episode_cap,
                "output": self.output,
            },
            "synthetic": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.synthetic).items()},
            "agent": self.agent.to_dict(),
            "es": self.es.to_dict(),
            "sweep": {"counts": list(self.sweep_counts)},
        }


# -- parsing ---------------------------------------------------------------

def _int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise _err(section, key, f"expected an integer, got {raw!r}") from None


def _int_list(section: str, key: str, raw: str) -> tuple[int, ...]:
    return tuple(_int(section, key, tok) for tok in raw.replace(",", " ").split())


def _float_pair(section: str, key: str, raw: str) -> tuple[float, float]:
    toks = raw.replace(",", " ").split()
    try:
        vals = tuple(float(t) for t in toks)
    except ValueError:
        raise _err(section, key, f"expected two numbers, got {raw!r}") from None
    if len(vals) != 2 or vals[0] >= vals[1]:
        raise _err(section, key, f"expected 'low high' with low < high, got {raw!r}")
    return vals


def _dataclass_section(cls, section: str, items: dict):
    try:
        return cls.from_mapping(items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


_EXPERIMENT_KEYS = {"benchmark", "method", "seeds", "budget", "max_iterations", "episode_cap", "output"}
_SECTIONS = {"experiment", "synthetic", "agent", "es", "sweep"}


def _parse_synthetic(items: dict) -> SyntheticSpec:
    known = {f.name for f in fields(SyntheticSpec)}
    unknown = sorted(set(items) - known)
    if unknown:
        raise _err("synthetic", unknown[0], f"unknown key; valid keys: {', '.join(sorted(known))}")
    kw: dict = {}
    for key, raw in items.items():
        if key in ("voltage_range", "temperature_range"):
            kw[key] = _float_pair("synthetic", key, raw)
        elif key == "difficulty":
            try:
                kw[key] = float(raw)
            except ValueError:
                raise _err("synthetic", key, f"expected a number, got {raw!r}") from None
            if kw[key] < 0:
                raise _err("synthetic", key, "must be >= 0")
        elif key == "bounds_over":
            if raw not in ("corners", "envelope"):
                raise _err("synthetic", key, f"expected 'corners' or 'envelope', got {raw!r}")
            kw[key] = raw
        else:
            kw[key] = _int("synthetic", key, raw)
    spec = SyntheticSpec(**kw)
    for key in ("n_params", "n_metrics", "corners"):
        if getattr(spec, key) < 1:
            raise _err("synthetic", key, "must be >= 1")
    return spec


def parse_config(text: str, base_dir: str | Path = ".") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    unknown = sorted(set(cp.sections()) - _SECTIONS)
    if unknown:
        raise ConfigError(f"[{unknown[0]}]: unknown section; valid sections: {', '.join(sorted(_SECTIONS))}")
    if "experiment" not in cp:
        raise ConfigError("[experiment]: section is required")
    exp = dict(cp["experiment"])
    bad = sorted(set(exp) - _EXPERIMENT_KEYS)
    if bad:
        raise _err("experiment", bad[0], f"unknown key; valid keys: {', '.join(sorted(_EXPERIMENT_KEYS))}")
    kw: dict = {"base_dir": Path(base_dir)}
    for key in ("benchmark", "method", "output"):
        if key in exp:
            kw[key] = exp[key].strip()
    for key in ("budget", "max_iterations", "episode_cap"):
        if key in exp:
            kw[key] = _int("experiment", key, exp[key])
    if "seeds" in exp:
        kw["seeds"] = _int_list("experiment", "seeds", exp["seeds"])
    if "synthetic" in cp:
        kw["synthetic"] = _parse_synthetic(dict(cp["synthetic"]))
    if "agent" in cp:
        kw["agent"] = _dataclass_section(AgentConfig, "agent", dict(cp["agent"]))
    if "es" in cp:
        kw["es"] = _dataclass_section(EsConfig, "es", dict(cp["es"]))
    if "sweep" in cp:
        sweep = dict(cp["sweep"])
        extra = sorted(set(sweep) - {"counts"})
        if extra:
            raise _err("sweep", extra[0], "unknown key; valid keys: counts")
        if "counts" in sweep:
            kw["sweep_counts"] = _int_list("sweep", "counts", sweep["counts"])
    return ExperimentConfig(**kw)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, path.parent)
