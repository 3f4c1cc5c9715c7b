"""Closed-form behavioral model of a two-stage OTA.

Stands in for a transistor-level simulation. Only w1, w5, w6 and cc enter the
formulas; w2..w4 are carried as free design parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import Constraint, DesignSpace, Parameter, PvtCorner

CONSTANTS_SCHEMA_VERSION = 1
METRICS = ("i", "ugb", "phm")

# (mu_n, mu_p) multipliers per process model
PROCESS_FACTORS = {
    "TT": (1.0, 1.0),
    "FF": (1.12, 1.12),
    "SS": (0.88, 0.88),
    "FS": (1.12, 0.88),
    "SF": (0.88, 1.12),
}
NOMINAL_VDD = 1.1


@dataclass(frozen=True)
class Ota2Constants:
    g0: float
    i0: float
    k6: float
    CL: float
    cpar: float

    def to_dict(self) -> dict:
        return {"g0": self.g0, "i0": self.i0, "k6": self.k6, "CL": self.CL, "cpar": self.cpar}


def load_ota2_constants(path: str | Path | None = None) -> Ota2Constants:
    if path is None:
        text = resources.files("pvtsizing.data").joinpath("ota2_constants.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    if doc.get("schema_version") != CONSTANTS_SCHEMA_VERSION:
        raise ValueError(
            f"OTA2 constants schema {doc.get('schema_version')!r} unsupported (expected {CONSTANTS_SCHEMA_VERSION})"
        )
    return Ota2Constants(**{k: float(doc[k]) for k in ("g0", "i0", "k6", "CL", "cpar")})


def ota2_design_space() -> DesignSpace:
    widths = [Parameter(f"w{k}", 0.5, 50.0, 0.5, "um") for k in range(1, 7)]
    return DesignSpace(tuple(widths) + (Parameter("cc", 0.1, 10.0, 0.1, "pF"),))


def ota2_constraints() -> list[Constraint]:
    return [
        Constraint("i", "at_most", 5.0, "mA"),
        Constraint("ugb", "at_least", 15.0, "MHz"),
        Constraint("phm", "at_least", 60.0, "deg"),
    ]


def temperature_factor(temp_c):
    return ((np.asarray(temp_c, dtype=np.float64) + 273.15) / 300.0) ** -1.5


def ota2_metrics(sizing: np.ndarray, mu_n, mu_p, theta, supply, k: Ota2Constants) -> np.ndarray:
    """Vectorized model; corner factors broadcast against the sizing.

    Returns metrics on the last axis in (i [mA], ugb [MHz], phm [deg]) order.
    """
    x = np.asarray(sizing, dtype=np.float64)
    w1, w5, w6, cc = x[..., 0], x[..., 4], x[..., 5], x[..., 6]
    gm1 = k.g0 * mu_n * theta * np.sqrt(w1 * w5)
    gm6 = k.g0 * mu_p * theta * np.sqrt(w6 * w5)
    current = k.i0 * supply * (w5 + k.k6 * w6)
    ugb = gm1 / (2 * np.pi * cc)
    p2 = gm6 / (2 * np.pi * (k.CL + k.cpar * w6))
    zero = gm6 / (2 * np.pi * cc)
    phm = 90.0 - np.degrees(np.arctan(ugb / p2)) - np.degrees(np.arctan(ugb / zero))
    return np.stack(np.broadcast_arrays(current, ugb, phm), axis=-1)


def corner_factors(corners: list[PvtCorner]) -> tuple[np.ndarray, ...]:
    mu_n = np.array([PROCESS_FACTORS[c.process][0] for c in corners])
    mu_p = np.array([PROCESS_FACTORS[c.process][1] for c in corners])
    theta = temperature_factor([c.temp for c in corners])
    supply = np.array([c.vdd for c in corners]) / NOMINAL_VDD
    return mu_n, mu_p, theta, supply


def evaluate_ota2(sizing: np.ndarray, corner: PvtCorner, constants: Ota2Constants) -> dict[str, float]:
    x = np.asarray(sizing, dtype=np.float64)
    if x.shape != (7,):
        raise ValueError(f"OTA2 sizing needs 7 parameters (w1..w6, cc), got shape {x.shape}")
    mu_n, mu_p = PROCESS_FACTORS[corner.process]
    values = ota2_metrics(x, mu_n, mu_p, temperature_factor(corner.temp), corner.vdd / NOMINAL_VDD, constants)
    return dict(zip(METRICS, (float(v) for v in values)))
