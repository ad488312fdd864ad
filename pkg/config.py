"""
Configuration file for the Calabi laboratory
Contains model, grid, solver and output defaults
Reads overrides from environment variables, falls back to the defaults below
"""

import os
from typing import Any, Dict


def _get_setting(key_path: str, default: Any = None) -> Any:
    """
    Get value from an environment variable or default.
    key_path: dot-separated path like 'calabi.output_dir'
    """
    env_key = key_path.upper().replace('.', '_')
    return os.getenv(env_key, default)


# Calabi model: complex dimension, divisor volume, circle-fiber length and
# the wedge ratios c_1..c_{n-1} of the divisor form
MODEL_DEFAULTS = {
    "n": 3,
    "base_volume": 1.0,
    "fiber_normalization": 1.0,
    "c": [0.3, 0.05],
}

# Radial grid for the decay iteration (log-uniform in z)
GRID_DEFAULTS = {
    "z_min": 5.0,
    "z_max": 200.0,
    "num": 4000,
    "fit_window": [10.0, 100.0],
    "gradient_window": [40.0, 200.0],
}

# Quadrature tolerances of the special-function layer
QUADRATURE_DEFAULTS = {
    "epsabs": 1e-15,
    "epsrel": 1e-12,
    "limit": 400,
    "tail_tol": 1e-17,
    "tail_rtol": 1e-10,
}

ITERATION_DEFAULTS = {
    "steps": 3,
    "order_slack": 0.2,
}

# Damped Newton on a truncated window, phi = 0 at both ends
NEWTON_DEFAULTS = {
    "z_min": 5.0,
    "z_max": 50.0,
    "tol": 1e-10,
    "max_iter": 12,
}

# Surrogate cross-section spectrum and the Poisson grid
SPECTRAL_DEFAULTS = {
    "z0": 1.0,
    "resolution": 6,
    "truncation": 64,
    "z_min": 1.0,
    "z_max": 20.0,
    "num": 400,
    "weyl_window": [50.0, 500.0],
}

OUTPUT_DEFAULTS = {
    "output_dir": _get_setting("calabi.output_dir", "results"),
    "threads": 1,
    "seed": 0,
    "plots": True,
}


def get_output_dir() -> str:
    """Get the output directory, CALABI_OUTPUT_DIR when set"""
    return _get_setting("calabi.output_dir", OUTPUT_DEFAULTS["output_dir"])


def get_defaults() -> Dict[str, Dict[str, Any]]:
    """Get every default section keyed by its config name"""
    return {
        "model": dict(MODEL_DEFAULTS),
        "grid": dict(GRID_DEFAULTS),
        "quadrature": dict(QUADRATURE_DEFAULTS),
        "iteration": dict(ITERATION_DEFAULTS),
        "newton": dict(NEWTON_DEFAULTS),
        "spectral": dict(SPECTRAL_DEFAULTS),
        "output": dict(OUTPUT_DEFAULTS, output_dir=get_output_dir()),
    }
