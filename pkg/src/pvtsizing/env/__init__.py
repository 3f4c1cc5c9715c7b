from .benchmark import OTA2_CORNER_SPEC, Benchmark, load_benchmark_file, ota2_benchmark
from .core import (
    PASS_REWARD,
    PASS_SLACK,
    PROCESSES,
    STATE_DIM,
    Constraint,
    DesignSpace,
    Parameter,
    PvtCorner,
    build_corner_set,
    compute_reward,
    denormalize_action,
    encode_state,
    factorial_corners,
    monte_carlo_corners,
    rewards_from_values,
)
from .ota2 import Ota2Constants, evaluate_ota2, load_ota2_constants
from .synthetic import SyntheticModel, evaluate_synthetic, generate_synthetic_benchmark

__all__ = [
    "Benchmark",
    "Constraint",
    "DesignSpace",
    "OTA2_CORNER_SPEC",
    "Ota2Constants",
    "PASS_REWARD",
    "PASS_SLACK",
    "PROCESSES",
    "Parameter",
    "PvtCorner",
    "STATE_DIM",
    "SyntheticModel",
    "build_corner_set",
    "compute_reward",
    "denormalize_action",
    "encode_state",
    "evaluate_ota2",
    "evaluate_synthetic",
    "factorial_corners",
    "generate_synthetic_benchmark",
    "load_benchmark_file",
    "load_ota2_constants",
    "monte_carlo_corners",
    "ota2_benchmark",
    "rewards_from_values",
]
