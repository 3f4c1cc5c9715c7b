"""Variation-aware sizing across PVT corners with multi-task actor-critic RL."""

__version__ = "0.1.0"
