"""
Radial sampling layer
Grids in the t = z^n variable, sampled radial functions with derivative and
quadrature access, and log-log decay fits.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import make_interp_spline

from .errors import DomainError, FitError

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps

# 4th-order stencils, coefficients over 12h (first) and 12h^2 (second)
_D1_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0])
_D1_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
_D1_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0])
_D2_CENTRAL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0])
_D2_EDGE0 = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0])
_D2_EDGE1 = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0])

MIN_STENCIL_POINTS = 6


def _is_equispaced(x: np.ndarray, rtol: float = 1e-9) -> bool:
    if x.size < 3:
        return True
    steps = np.diff(x)
    return bool(np.all(np.abs(steps - steps.mean()) <= rtol * abs(steps.mean())))


def fourth_order_derivatives(values: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    First and second derivatives on an equispaced axis.

    Args:
        values: samples f_i at x_0 + i*h
        h: spacing

    Returns:
        (f', f'') with 4th-order central stencils in the interior and
        one-sided 4th-order stencils on the two outermost points per side
    """
    f = np.asarray(values, dtype=float)
    size = f.size
    if size < MIN_STENCIL_POINTS:
        raise DomainError(f"grid too coarse for the second-difference stencil ({size} points)")

    d1 = np.empty_like(f)
    d2 = np.empty_like(f)

    d1[2:-2] = (f[:-4] * _D1_CENTRAL[0] + f[1:-3] * _D1_CENTRAL[1]
                + f[3:-1] * _D1_CENTRAL[3] + f[4:] * _D1_CENTRAL[4])
    d2[2:-2] = (f[:-4] * _D2_CENTRAL[0] + f[1:-3] * _D2_CENTRAL[1] + f[2:-2] * _D2_CENTRAL[2]
                + f[3:-1] * _D2_CENTRAL[3] + f[4:] * _D2_CENTRAL[4])

    d1[0] = _D1_EDGE0 @ f[:5]
    d1[1] = _D1_EDGE1 @ f[:5]
    d1[-1] = -(_D1_EDGE0 @ f[::-1][:5])
    d1[-2] = -(_D1_EDGE1 @ f[::-1][:5])

    d2[0] = _D2_EDGE0 @ f[:6]
    d2[1] = _D2_EDGE1 @ f[:6]
    d2[-1] = _D2_EDGE0 @ f[::-1][:6]
    d2[-2] = _D2_EDGE1 @ f[::-1][:6]

    return d1 / (12.0 * h), d2 / (12.0 * h * h)


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing samples of t > 0 with z = t^(1/n)."""

    t: np.ndarray
    n: int
    z: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if self.n < 2:
            raise DomainError(f"complex dimension must be >= 2, got {self.n}")
        if t.ndim != 1 or t.size < 2:
            raise DomainError("a radial grid needs at least two samples")
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise DomainError("grid samples must be finite with t > 0")
        if np.any(np.diff(t) <= 0):
            raise DomainError("grid samples must be strictly increasing")
        z = t ** (1.0 / self.n) if self.z is None else np.asarray(self.z, dtype=float)
        if z.shape != t.shape or np.any(np.abs(z ** self.n - t) > 8 * EPS * self.n * t):
            raise DomainError("z = t^(1/n) violated on the grid")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "z", z)

    @classmethod
    def from_z(cls, z, n: int) -> "RadialGrid":
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0):
            raise DomainError("z samples must be positive")
        return cls(t=z ** n, n=n, z=z)

    @classmethod
    def log_uniform(cls, z_min: float, z_max: float, num: int, n: int) -> "RadialGrid":
        """Grid equispaced in x = ln z (graded: denser at small z)."""
        if not 0 < z_min < z_max:
            raise DomainError(f"need 0 < z_min < z_max, got [{z_min}, {z_max}]")
        return cls.from_z(np.exp(np.linspace(np.log(z_min), np.log(z_max), num)), n)

    @classmethod
    def uniform(cls, z_min: float, z_max: float, num: int, n: int) -> "RadialGrid":
        if not 0 < z_min < z_max:
            raise DomainError(f"need 0 < z_min < z_max, got [{z_min}, {z_max}]")
        return cls.from_z(np.linspace(z_min, z_max, num), n)

    @property
    def size(self) -> int:
        return self.t.size

    @cached_property
    def x(self) -> np.ndarray:
        return np.log(self.z)

    @cached_property
    def is_log_uniform(self) -> bool:
        return _is_equispaced(self.x)

    @cached_property
    def is_uniform(self) -> bool:
        return _is_equispaced(self.z)

    def window(self, z_lo: float, z_hi: float) -> np.ndarray:
        """Boolean mask of samples with z_lo <= z <= z_hi."""
        tol = 1e-12 * max(1.0, z_hi)
        return (self.z >= z_lo - tol) & (self.z <= z_hi + tol)

    def restrict(self, z_lo: float, z_hi: float) -> Tuple["RadialGrid", np.ndarray]:
        mask = self.window(z_lo, z_hi)
        if mask.sum() < 2:
            raise DomainError(f"window [{z_lo}, {z_hi}] holds fewer than two samples")
        return RadialGrid(t=self.t[mask], n=self.n, z=self.z[mask]), mask

    def derivatives(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(df/dz, d2f/dz2) of samples on this grid."""
        values = np.asarray(values, dtype=float)
        if self.is_log_uniform:
            h = (self.x[-1] - self.x[0]) / (self.size - 1)
            fx, fxx = fourth_order_derivatives(values, h)
            return fx / self.z, (fxx - fx) / self.z ** 2
        if self.is_uniform:
            h = (self.z[-1] - self.z[0]) / (self.size - 1)
            return fourth_order_derivatives(values, h)
        if self.size < 3:
            raise DomainError("grid too coarse for the second-difference stencil")
        logger.debug("non-equispaced grid, falling back to np.gradient")
        first = np.gradient(values, self.z, edge_order=2)
        return first, np.gradient(first, self.z, edge_order=2)

    def integrate(self, values: np.ndarray) -> float:
        """Definite integral of f dz over the grid (Simpson in x = ln z)."""
        return float(simpson(np.asarray(values) * self.z, x=self.x))

    def cumulative(self, values: np.ndarray) -> np.ndarray:
        """Running integral from the inner edge, zero at z_0."""
        return cumulative_simpson(np.asarray(values) * self.z, x=self.x, initial=0.0)


@dataclass(frozen=True)
class RadialFunction:
    """
    A scalar function of the radial variable sampled on a RadialGrid.

    When `first`/`second` are attached they are exact z-derivatives and take
    precedence over finite differences.
    """

    grid: RadialGrid
    values: np.ndarray
    first: Optional[np.ndarray] = None
    second: Optional[np.ndarray] = None
    order: Optional[float] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.z.shape:
            raise DomainError("values do not match the grid")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: RadialGrid, func, order: Optional[float] = None) -> "RadialFunction":
        return cls(grid=grid, values=np.asarray(func(grid.z), dtype=float) * np.ones(grid.size), order=order)

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "RadialFunction":
        zero = np.zeros(grid.size)
        return cls(grid=grid, values=zero, first=zero, second=zero)

    @property
    def z(self) -> np.ndarray:
        return self.grid.z

    @property
    def n(self) -> int:
        return self.grid.n

    @cached_property
    def _stencil(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.grid.derivatives(self.values)

    def dz(self) -> np.ndarray:
        return self.first if self.first is not None else self._stencil[0]

    def dzz(self) -> np.ndarray:
        return self.second if self.second is not None else self._stencil[1]

    def dt(self) -> np.ndarray:
        """du/dt = u'/(n z^(n-1))."""
        n, z = self.n, self.z
        return self.dz() / (n * z ** (n - 1))

    def dtt(self) -> np.ndarray:
        """d2u/dt2 = (u'' - (n-1) u'/z) / (n^2 z^(2n-2))."""
        n, z = self.n, self.z
        return (self.dzz() - (n - 1) * self.dz() / z) / (n * n * z ** (2 * n - 2))

    @cached_property
    def interpolant(self):
        """Quintic spline in ln z (cubic on short grids)."""
        k = 5 if self.grid.size > 5 else min(3, self.grid.size - 1)
        return make_interp_spline(self.grid.x, self.values, k=k)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return self.interpolant(np.log(z))

    def integrate(self) -> float:
        return self.grid.integrate(self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def restrict(self, z_lo: float, z_hi: float) -> "RadialFunction":
        grid, mask = self.grid.restrict(z_lo, z_hi)
        return RadialFunction(
            grid=grid,
            values=self.values[mask],
            first=None if self.first is None else self.first[mask],
            second=None if self.second is None else self.second[mask],
            order=self.order,
        )

    def _combine(self, other: "RadialFunction", sign: float) -> "RadialFunction":
        if other.grid is not self.grid and not np.array_equal(other.grid.t, self.grid.t):
            raise DomainError("cannot combine radial functions on different grids")

        def merge(a, b):
            if a is None or b is None:
                return None
            return a + sign * b

        return RadialFunction(
            grid=self.grid,
            values=self.values + sign * other.values,
            first=merge(self.first, other.first),
            second=merge(self.second, other.second),
        )

    def __add__(self, other: "RadialFunction") -> "RadialFunction":
        return self._combine(other, 1.0)

    def __sub__(self, other: "RadialFunction") -> "RadialFunction":
        return self._combine(other, -1.0)

    def scale(self, factor: float) -> "RadialFunction":
        return RadialFunction(
            grid=self.grid,
            values=factor * self.values,
            first=None if self.first is None else factor * self.first,
            second=None if self.second is None else factor * self.second,
            order=self.order,
        )

    def with_order(self, order: Optional[float]) -> "RadialFunction":
        return replace(self, order=order)


@dataclass(frozen=True)
class DecayReport:
    """Least-squares slope of log|f| against log z over a window."""

    z_lo: float
    z_hi: float
    exponent: float
    intercept: float
    residual: float
    n_points: int
    index: Optional[int] = None
    target: Optional[float] = None
    sign: float = 1.0
    degenerate: bool = False

    @property
    def coefficient(self) -> float:
        """Signed K in f ~ K z^p."""
        if self.degenerate:
            return 0.0
        return self.sign * float(np.exp(self.intercept))

    def r_exponent(self, n: int) -> float:
        """Same exponent measured against r ~ z^((n+1)/2)."""
        return 2.0 * self.exponent / (n + 1)

    def within(self, slack: float = 0.2) -> bool:
        """Fitted order at or below the target plus slack."""
        if self.target is None:
            return True
        return self.degenerate or self.exponent <= self.target + slack

    def as_row(self) -> dict:
        return {
            "index": -1 if self.index is None else self.index,
            "z_lo": self.z_lo,
            "z_hi": self.z_hi,
            "exponent": self.exponent,
            "target": np.nan if self.target is None else self.target,
            "residual": self.residual,
            "n_points": self.n_points,
            "degenerate": int(self.degenerate),
        }


def fit_decay(
    z: np.ndarray,
    values: np.ndarray,
    window: Optional[Tuple[float, float]] = None,
    *,
    index: Optional[int] = None,
    target: Optional[float] = None,
    noise_scale: Optional[np.ndarray] = None,
    floor_factor: float = 1e3,
    min_points: int = 20,
) -> DecayReport:
    """
    Fit log|f| = p log z + c over a z-window.

    Args:
        z, values: samples
        window: (z_lo, z_hi); defaults to the upper half of the samples
        noise_scale: magnitude of the terms cancelling inside f; points with
            |f| < floor_factor * eps * noise_scale are excluded
        min_points: minimum usable samples

    Returns:
        DecayReport; degenerate when f vanishes to the noise floor everywhere
    """
    z = np.asarray(z, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (float(z[z.size // 2]), float(z[-1]))
    z_lo, z_hi = window
    if z_lo < z[0] or z_hi > z[-1]:
        logger.warning(f"fit window [{z_lo:g}, {z_hi:g}] clipped to grid [{z[0]:g}, {z[-1]:g}]")
        z_lo, z_hi = max(z_lo, float(z[0])), min(z_hi, float(z[-1]))

    mask = (z >= z_lo) & (z <= z_hi)
    if mask.sum() < min_points:
        raise FitError(f"fit window [{z_lo:g}, {z_hi:g}] holds {int(mask.sum())} < {min_points} samples")

    scale = 1.0 if noise_scale is None else np.asarray(noise_scale, dtype=float)[mask]
    floor = floor_factor * EPS * scale
    zw, vw = z[mask], values[mask]
    usable = np.isfinite(vw) & (np.abs(vw) > floor)

    if not np.any(usable):
        return DecayReport(z_lo=z_lo, z_hi=z_hi, exponent=float("-inf"), intercept=float("-inf"),
                           residual=0.0, n_points=0, index=index, target=target, degenerate=True)
    if usable.sum() < min_points:
        raise FitError(f"only {int(usable.sum())} samples above the noise floor in [{z_lo:g}, {z_hi:g}]")

    log_z = np.log(zw[usable])
    log_f = np.log(np.abs(vw[usable]))
    slope, intercept = np.polyfit(log_z, log_f, 1)
    fitted = slope * log_z + intercept
    residual = float(np.sqrt(np.mean((log_f - fitted) ** 2)))
    sign = float(np.sign(vw[usable][-1]))

    return DecayReport(
        z_lo=z_lo,
        z_hi=z_hi,
        exponent=float(slope),
        intercept=float(intercept),
        residual=residual,
        n_points=int(usable.sum()),
        index=index,
        target=target,
        sign=sign,
    )
