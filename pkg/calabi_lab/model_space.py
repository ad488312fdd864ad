"""
Calabi model geometry in separated coordinates
Metric coefficients, separated Laplacian, radial distance and volume growth
"""

import logging
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import DomainError
from .radial import DecayReport, RadialFunction, fit_decay

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class ModelParams(BaseModel):
    """Complex dimension, base volume and circle-fiber length."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=2)
    base_volume: float = Field(1.0, gt=0)
    fiber_normalization: float = Field(1.0, gt=0)

    @property
    def end_measure(self) -> float:
        """Volume form of the end in t-units: dVol = end_measure * dt."""
        return self.base_volume * self.fiber_normalization


class Mode(BaseModel):
    """One separated mode: divisor eigenvalue lam and fiber degree j."""

    model_config = ConfigDict(frozen=True)

    lam: float = Field(ge=0)
    j: int = Field(0, ge=0)

    @property
    def is_fiber_mode(self) -> bool:
        return self.lam == 0 and self.j == 0


def _positive(z: ArrayLike, name: str = "z") -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError(f"{name} must be positive")
    return z


def metric_coefficients(params: ModelParams, z: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """Coefficients of i dd^c t and i dt ^ dbar t in the model form."""
    z = _positive(z)
    n = params.n
    return z, 1.0 / (n * z ** (n - 1))


def mode_potential(n: int, mode: Mode, z: ArrayLike) -> np.ndarray:
    """V(z) = (n lam + j^2 n^2 z^n / 4) z^(n-2), the zeroth-order term of the mode ODE."""
    z = np.asarray(z, dtype=float)
    return (n * mode.lam + 0.25 * mode.j ** 2 * n * n * z ** n) * z ** (n - 2)


def laplacian_separated(params: ModelParams, u: RadialFunction, mode: Mode) -> RadialFunction:
    """
    Radial coefficient of the model Laplacian applied to u(z) psi(y).

    Args:
        params: model parameters (n must match the grid)
        u: radial factor, twice differentiable on its grid
        mode: (lam, j) of the divisor/fiber factor psi

    Returns:
        (u'' - V u) / (n z^(n-1)) on the grid of u
    """
    n = params.n
    if u.n != n:
        raise DomainError(f"grid built for n={u.n}, model has n={n}")
    z = u.z
    values = (u.dzz() - mode_potential(n, mode, z) * u.values) / (n * z ** (n - 1))
    return RadialFunction(grid=u.grid, values=values)


def laplacian_t(params: ModelParams, u: RadialFunction, mode: Mode = Mode(lam=0.0)) -> RadialFunction:
    """The same operator written in t: (n-1) u_t / z + n z^(n-1) u_tt - V u / (n z^(n-1))."""
    n = params.n
    z = u.z
    values = (n - 1) * u.dt() / z + n * z ** (n - 1) * u.dtt()
    if not mode.is_fiber_mode:
        values = values - mode_potential(n, mode, z) * u.values / (n * z ** (n - 1))
    return RadialFunction(grid=u.grid, values=values)


def radial_distance(params: ModelParams, z1: float, z2: float) -> float:
    """Length of the radial segment, (2 sqrt(n)/(n+1)) (z2^((n+1)/2) - z1^((n+1)/2))."""
    if z1 < 0 or z2 < 0:
        raise DomainError("radial levels must be nonnegative")
    if z1 > z2:
        raise DomainError(f"z1={z1} exceeds z2={z2}")
    n = params.n
    half = 0.5 * (n + 1)
    return 2.0 * np.sqrt(n) / (n + 1) * (z2 ** half - z1 ** half)


def volume_of_shell(params: ModelParams, z1: float, z2: float) -> float:
    """Volume of {z1 <= z <= z2}; the volume form is end_measure * dt."""
    if z1 < 0 or z2 < 0:
        raise DomainError("radial levels must be nonnegative")
    if z1 > z2:
        raise DomainError(f"z1={z1} exceeds z2={z2}")
    n = params.n
    return params.end_measure * (z2 ** n - z1 ** n)


def level_at_distance(params: ModelParams, r: ArrayLike, z_ref: float = 1.0) -> np.ndarray:
    """Inverse of radial_distance(z_ref, .)."""
    n = params.n
    half = 0.5 * (n + 1)
    r = np.asarray(r, dtype=float)
    return ((n + 1) * r / (2.0 * np.sqrt(n)) + z_ref ** half) ** (1.0 / half)


def volume_growth_exponent(
    params: ModelParams,
    r_window: Tuple[float, float] = (1e3, 1e5),
    num: int = 64,
    z_ref: float = 1.0,
) -> DecayReport:
    """
    Fitted exponent of Vol(B(R)) against R, balls measured from the level z_ref.
    Expected 2n/(n+1).
    """
    radii = np.geomspace(r_window[0], r_window[1], num)
    levels = level_at_distance(params, radii, z_ref)
    volumes = np.array([volume_of_shell(params, z_ref, level) for level in levels])
    report = fit_decay(radii, volumes, r_window, target=2.0 * params.n / (params.n + 1), min_points=min(20, num))
    logger.debug(f"volume growth exponent {report.exponent:.4f} (n={params.n})")
    return report
