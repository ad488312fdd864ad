"""
Source Registry - named radial sources and toy configurations
"""

import re
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import make_interp_spline

from .errors import DomainError

# Smoke sources for the Green-vs-oracle comparison: (callable, declared order)
SMOKE_SOURCES = {
    "z^-2": {"func": lambda z: z ** -2.0, "order": -2.0},
    "z^-1": {"func": lambda z: z ** -1.0, "order": -1.0},
    "z^-3": {"func": lambda z: z ** -3.0, "order": -3.0},
    "z^-1.5": {"func": lambda z: z ** -1.5, "order": -1.5},
    "z e^-z": {"func": lambda z: z * np.exp(-z), "order": -10.0},  # faster than any power
}

# Modes of the Green-vs-oracle and bound-shape checks, per branch
SMOKE_MODES = {
    "zero": [{"lam": 1.0, "j": 0}, {"lam": 4.0, "j": 0}, {"lam": 16.0, "j": 0}],
    "nonzero": [{"lam": 0.5, "j": 1}, {"lam": 2.0, "j": 2}, {"lam": 4.0, "j": 3}],
}

# Wronskian grid at n = 3
WRONSKIAN_GRID = {
    "n": 3,
    "lams": [1.0, 2.0, 4.0],
    "js": [1, 2, 3],
    "z_range": [1.0, 5.0],
}

# Toy configurations (overrides of the defaults in config.py)
TOY_CONFIGS = {
    "standard": {"model": {"n": 3, "c": [0.3, 0.05]}},
    "flat": {"model": {"n": 3, "c": []}},
    "surface": {"model": {"n": 2, "c": [0.2]}},
}

_POWER = re.compile(r"^z\^(?P<p>[-+]?\d+(\.\d*)?)$")


def parse_source(spec: str) -> Tuple[Callable[[np.ndarray], np.ndarray], Optional[float]]:
    """
    Registry name, a power 'z^p', or a CSV file with columns z and v.

    Returns:
        (callable, declared order); CSV sources leave the order to be fitted
    """
    spec = spec.strip()
    if spec in SMOKE_SOURCES:
        entry = SMOKE_SOURCES[spec]
        return entry["func"], entry["order"]
    if spec.endswith(".csv"):
        return _csv_source(Path(spec)), None
    match = _POWER.match(spec)
    if match is None:
        raise DomainError(f"unknown source '{spec}' (expected one of {sorted(SMOKE_SOURCES)}, 'z^p' or a CSV file)")
    p = float(match.group("p"))
    return (lambda z: np.asarray(z, dtype=float) ** p), p


def _csv_source(path: Path) -> Callable[[np.ndarray], np.ndarray]:
    """Cubic spline in ln z through the tabulated (z, v) samples, continued as a power law."""
    if not path.exists():
        raise DomainError(f"source file {path} not found")
    table = pd.read_csv(path)
    if not {"z", "v"} <= set(table.columns):
        raise DomainError(f"source file {path} needs columns z and v, got {list(table.columns)}")
    table = table.sort_values("z")
    z = table["z"].to_numpy(dtype=float)
    if z.size < 4 or np.any(z <= 0) or np.any(np.diff(z) <= 0):
        raise DomainError(f"source file {path} needs at least 4 distinct positive z samples")
    v = table["v"].to_numpy(dtype=float)
    spline = make_interp_spline(np.log(z), v, k=3)
    # past the last sample: power law through the last two samples, zero across a sign change
    p = float(np.log(v[-1] / v[-2]) / np.log(z[-1] / z[-2])) if v[-1] * v[-2] > 0 else None

    def source(s):
        s = np.asarray(s, dtype=float)
        inside = spline(np.log(np.minimum(s, z[-1])))
        outside = v[-1] * (s / z[-1]) ** p if p is not None else np.zeros_like(s)
        return np.where(s <= z[-1], inside, outside)

    return source


def get_toy_config(name: str) -> Dict:
    """Get the overrides of a named toy configuration"""
    if name not in TOY_CONFIGS:
        raise DomainError(f"unknown toy configuration '{name}'")
    return TOY_CONFIGS[name]
