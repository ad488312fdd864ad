"""
Spectral Poisson solves on the model end

The divisor-with-fiber cross-section Y is replaced by a flat torus T^(2n-2)
times the circle fiber. Its real Fourier modes

    sqrt(2) cos(m.theta + j phi),  sqrt(2) sin(m.theta + j phi),  1

separate the Laplacian with divisor eigenvalue lam = |m|^2 and fiber degree |j|.
Sources are projected onto these modes with an FFT over the angles, each
mode is solved radially, and the pieces are summed in mode order.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import AliasingError, DomainError, SpectralTruncationError
from .mode_ode import fiber_mode_solve, green_solve
from .model_space import Mode, ModelParams, laplacian_separated
from .radial import DecayReport, RadialFunction, RadialGrid, fit_decay
from .special_functions import DEFAULT_QUADRATURE, QuadratureConfig

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 6
DEFAULT_TRUNCATION = 64
WEYL_WINDOW = (50.0, 500.0)
NYQUIST_TOL = 1e-12
VANISHING_TOL = 1e-14
SOURCE_ORDER_TOL = 0.1


def level(n: int, lam: float, j: int, z0: float = 1.0) -> float:
    """Lambda = lam / z0 + n z0^(n-1) j^2."""
    return lam / z0 + n * z0 ** (n - 1) * j * j


@dataclass(frozen=True)
class SpectralMode:
    """One real eigenfunction of the surrogate cross-section."""

    index: int
    m: Tuple[int, ...]
    j: int
    kind: str          # "const", "cos" or "sin"
    lam: float
    level: float

    @property
    def mode(self) -> Mode:
        return Mode(lam=self.lam, j=abs(self.j))

    @property
    def frequency(self) -> Tuple[int, ...]:
        return self.m + (self.j,)


def _lattice(dim: int, radius: int) -> np.ndarray:
    axis = np.arange(-radius, radius + 1)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, dim)


class SpectrumProvider:
    """
    Enumerates the surrogate spectrum T^(2n-2) x S^1 at a reference level z0.

    Args:
        n: complex dimension
        z0: level at which Lambda_k is evaluated
        resolution: samples per angle; modes with every |frequency| < resolution/2 are representable
    """

    def __init__(self, n: int, z0: float = 1.0, resolution: int = DEFAULT_RESOLUTION):
        if n < 2:
            raise DomainError(f"complex dimension must be >= 2, got {n}")
        if z0 <= 0:
            raise DomainError(f"reference level must be positive, got {z0}")
        if resolution < 3:
            raise DomainError(f"angular resolution must be >= 3, got {resolution}")
        self.n = n
        self.z0 = float(z0)
        self.resolution = resolution

    @property
    def torus_dim(self) -> int:
        return 2 * self.n - 2

    @property
    def angle_shape(self) -> Tuple[int, ...]:
        return (self.resolution,) * (self.torus_dim + 1)

    def level_of(self, lam, j):
        return np.asarray(lam) / self.z0 + self.n * self.z0 ** (self.n - 1) * np.asarray(j) ** 2

    @cached_property
    def modes(self) -> List[SpectralMode]:
        """Representable modes sorted by Lambda at z0; index 0 is the constant."""
        radius = (self.resolution - 1) // 2
        vectors = _lattice(self.torus_dim + 1, radius)
        nonzero = vectors != 0
        keep = nonzero.any(axis=1)
        vectors, nonzero = vectors[keep], nonzero[keep]
        first = vectors[np.arange(len(vectors)), np.argmax(nonzero, axis=1)]
        vectors = vectors[first > 0]

        lam = np.sum(vectors[:, :-1] ** 2, axis=1)
        j = vectors[:, -1]
        levels = self.level_of(lam, j)
        keys = [vectors[:, i] for i in reversed(range(vectors.shape[1]))] + [np.abs(j), lam, np.round(levels, 12)]
        order = np.lexsort(keys)

        modes = [SpectralMode(index=0, m=(0,) * self.torus_dim, j=0, kind="const", lam=0.0, level=0.0)]
        for row in order:
            m = tuple(int(value) for value in vectors[row, :-1])
            for kind in ("cos", "sin"):
                modes.append(SpectralMode(index=len(modes), m=m, j=int(j[row]), kind=kind,
                                          lam=float(lam[row]), level=float(levels[row])))
        logger.debug(f"surrogate spectrum: {len(modes)} representable modes at resolution {self.resolution}")
        return modes

    def __len__(self) -> int:
        return len(self.modes)

    def mode(self, k: int) -> SpectralMode:
        if not 0 <= k < len(self.modes):
            raise DomainError(f"mode index {k} outside [0, {len(self.modes) - 1}]")
        return self.modes[k]

    def angles(self) -> List[np.ndarray]:
        """Sampled (theta_1, ..., theta_{2n-2}, phi), each of shape angle_shape."""
        axis = 2.0 * np.pi * np.arange(self.resolution) / self.resolution
        return list(np.meshgrid(*([axis] * (self.torus_dim + 1)), indexing="ij"))

    def basis_function(self, k: int) -> np.ndarray:
        """psi_k sampled on the angle grid, normalized in L2 of the unit-volume measure."""
        mode = self.mode(k)
        if mode.kind == "const":
            return np.ones(self.angle_shape)
        phase = sum(f * angle for f, angle in zip(mode.frequency, self.angles()))
        wave = np.cos(phase) if mode.kind == "cos" else np.sin(phase)
        return math.sqrt(2.0) * wave

    def counting_function(self, max_level: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Distinct levels L <= max_level and N(L), the number of lattice vectors
        (m, j) with Lambda <= L.
        """
        reach = max(self.z0, 1.0 / (self.n * self.z0 ** (self.n - 1)))
        radius = int(math.ceil(math.sqrt(max_level * reach)))
        vectors = _lattice(self.torus_dim + 1, radius)
        levels = self.level_of(np.sum(vectors[:, :-1] ** 2, axis=1), vectors[:, -1])
        levels = np.sort(levels[levels <= max_level + 1e-12])
        distinct, counts = np.unique(np.round(levels, 12), return_counts=True)
        return distinct, np.cumsum(counts)


def eigenvalue_at_level(provider: SpectrumProvider, k: int, z0: Optional[float] = None) -> float:
    """Lambda_k(z0) = lam_k / z0 + n z0^(n-1) j_k^2."""
    mode = provider.mode(k)
    z0 = provider.z0 if z0 is None else z0
    return level(provider.n, mode.lam, abs(mode.j), z0)


def weyl_exponent(provider: SpectrumProvider, window: Tuple[float, float] = WEYL_WINDOW) -> DecayReport:
    """Fitted exponent of Lambda against the mode count k; expected 2/(2n-1)."""
    max_level = 4.0
    levels, counts = provider.counting_function(max_level)
    while counts[-1] <= window[1]:
        max_level *= 2.0
        levels, counts = provider.counting_function(max_level)
    report = fit_decay(counts.astype(float), levels, window, target=2.0 / (2 * provider.n - 1), min_points=3)
    logger.info(f"Weyl exponent {report.exponent:.4f} from {report.n_points} levels")
    return report


# ============================================================================
# Fields on grid x torus
# ============================================================================

@dataclass(frozen=True)
class TorusField:
    """Samples v(z_i, theta, phi) with shape (grid size,) + angle_shape."""

    grid: RadialGrid
    provider: SpectrumProvider
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.grid.size,) + self.provider.angle_shape
        if values.shape != expected:
            raise DomainError(f"field shape {values.shape} does not match {expected}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: RadialGrid, provider: SpectrumProvider,
                      func: Callable[[np.ndarray, List[np.ndarray]], np.ndarray]) -> "TorusField":
        """func(z, angles) with z broadcastable against the angle grid."""
        z = grid.z.reshape((-1,) + (1,) * len(provider.angle_shape))
        angles = [angle[np.newaxis] for angle in provider.angles()]
        values = np.broadcast_to(func(z, angles), (grid.size,) + provider.angle_shape)
        return cls(grid=grid, provider=provider, values=np.array(values))

    @classmethod
    def from_modes(cls, grid: RadialGrid, provider: SpectrumProvider,
                   components: Dict[int, Union[RadialFunction, np.ndarray, Callable]]) -> "TorusField":
        """Sum of f_k(z) psi_k(y), accumulated in increasing k."""
        values = np.zeros((grid.size,) + provider.angle_shape)
        for k in sorted(components):
            radial = components[k]
            if isinstance(radial, RadialFunction):
                radial = radial.values
            elif callable(radial):
                radial = radial(grid.z)
            radial = np.asarray(radial, dtype=float) * np.ones(grid.size)
            values += radial.reshape((-1,) + (1,) * len(provider.angle_shape)) * provider.basis_function(k)
        return cls(grid=grid, provider=provider, values=values)

    def __add__(self, other: "TorusField") -> "TorusField":
        return TorusField(grid=self.grid, provider=self.provider, values=self.values + other.values)

    def __sub__(self, other: "TorusField") -> "TorusField":
        return TorusField(grid=self.grid, provider=self.provider, values=self.values - other.values)

    def scale(self, factor: float) -> "TorusField":
        return TorusField(grid=self.grid, provider=self.provider, values=factor * self.values)

    def mean_square(self) -> np.ndarray:
        """||v(z, .)||^2 in L2(Y) per slice."""
        axes = tuple(range(1, self.values.ndim))
        return np.mean(self.values ** 2, axis=axes)

    def sup(self) -> np.ndarray:
        axes = tuple(range(1, self.values.ndim))
        return np.max(np.abs(self.values), axis=axes)

    @cached_property
    def fourier(self) -> np.ndarray:
        """Normalized angular Fourier coefficients per slice; rejects Nyquist content."""
        axes = tuple(range(1, self.values.ndim))
        count = int(np.prod(self.provider.angle_shape))
        coefficients = np.fft.fftn(self.values, axes=axes) / count
        resolution = self.provider.resolution
        if resolution % 2 == 0:
            nyquist = np.zeros(self.provider.angle_shape, dtype=bool)
            for axis in range(nyquist.ndim):
                index = [slice(None)] * nyquist.ndim
                index[axis] = resolution // 2
                nyquist[tuple(index)] = True
            energy = np.sum(np.abs(coefficients[:, nyquist]) ** 2, axis=1)
            total = self.mean_square()
            fraction = energy / np.maximum(total, np.finfo(float).tiny)
            worst = int(np.argmax(fraction))
            if energy[worst] > NYQUIST_TOL * max(total[worst], 1e-300) and energy[worst] > 1e-300:
                raise AliasingError(
                    f"energy fraction {fraction[worst]:.3e} at the Nyquist frequency (z={self.grid.z[worst]:.6g}); "
                    f"increase the angular resolution beyond {resolution}")
        return coefficients


def project(v: TorusField, k: int) -> RadialFunction:
    """
    P_k(v)(z) = int_Y v(z, y) psi_k(y) over the unit-volume cross-section.

    Raises:
        AliasingError: v carries energy at the angular Nyquist frequency
    """
    mode = v.provider.mode(k)
    coefficients = v.fourier
    resolution = v.provider.resolution
    index = (slice(None),) + tuple(f % resolution for f in mode.frequency)
    c = coefficients[index]
    if mode.kind == "const":
        values = c.real
    elif mode.kind == "cos":
        values = math.sqrt(2.0) * c.real
    else:
        values = -math.sqrt(2.0) * c.imag
    return RadialFunction(grid=v.grid, values=values)


def project_all(v: TorusField, count: Optional[int] = None) -> List[RadialFunction]:
    count = len(v.provider) if count is None else count
    return [project(v, k) for k in range(count)]


# ============================================================================
# Poisson solve
# ============================================================================

@dataclass(frozen=True)
class ModeCoefficient:
    """Projected source v_k and its radial solution u_k."""

    index: int
    mode: SpectralMode
    v: RadialFunction
    u: RadialFunction
    diagnostics: Dict[str, float] = field(default_factory=dict)


@dataclass
class PoissonSolution:
    u: TorusField
    u0: RadialFunction
    coefficients: List[ModeCoefficient]
    report: Dict[str, object]

    def centered(self) -> TorusField:
        """u - u_0, the part orthogonal to the fiber direction."""
        return self.u - TorusField.from_modes(self.u.grid, self.u.provider, {0: self.u0})


def _solve_mode(n: int, grid: RadialGrid, coefficient: Tuple[SpectralMode, RadialFunction],
                order: float, cfg: QuadratureConfig) -> Tuple[RadialFunction, Dict[str, float]]:
    mode, v_k = coefficient
    if mode.kind == "const":
        u = fiber_mode_solve(n, v_k.with_order(order), order=order)
        return u, {"bound_ratio": float("nan"), "tail_bound": 0.0, "max_residual": 0.0}
    solution = green_solve(n, mode.mode, v_k, float(grid.z[-1]), grid=grid, order=order, cfg=cfg)
    return solution.u, {
        "bound_ratio": solution.bound_ratio,
        "tail_bound": solution.tail_bound,
        "max_residual": solution.max_residual,
    }


def solve_poisson(
    provider: SpectrumProvider,
    v: TorusField,
    truncation: int = DEFAULT_TRUNCATION,
    order: float = -2.0,
    threads: int = 1,
    tail_ratio: float = 1e-2,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> PoissonSolution:
    """
    u = u_0 + sum_{k=1}^{N} u_k psi_k with Delta u = v mode by mode.

    Args:
        provider: surrogate spectrum
        v: source on grid x torus
        truncation: N, the last mode index kept
        order: declared polynomial order delta of v
        threads: workers for the per-mode solves
        tail_ratio: largest energy fraction tolerated in the top quarter of the
            kept modes and beyond the truncation

    Returns:
        PoissonSolution with fitted orders of sup|u| (target delta+n+1) and
        sup|u - u_0| (target delta+1)

    Raises:
        SpectralTruncationError: source energy does not decay across the kept spectrum
        DomainError: the sampled source decays slower than the declared order
    """
    n = provider.n
    grid = v.grid
    if grid.n != n:
        raise DomainError(f"grid built for n={grid.n}, spectrum for n={n}")
    source_order = _source_order(v, order)
    truncation = min(truncation, len(provider) - 1)
    projections = project_all(v, truncation + 1)

    energies = np.array([grid.integrate(p.values ** 2) for p in projections])
    total = grid.integrate(v.mean_square())
    captured = float(np.sum(energies))
    discarded = max(total - captured, 0.0) / total if total > 0 else 0.0
    top = energies[max(1, (3 * (truncation + 1)) // 4):]
    top_fraction = float(np.sum(top)) / captured if captured > 0 else 0.0
    if discarded > tail_ratio or top_fraction > tail_ratio:
        raise SpectralTruncationError(
            f"source spectrum not resolved by N={truncation}: top-quarter fraction {top_fraction:.3e}, "
            f"discarded fraction {discarded:.3e}")

    scale = max((p.max_abs() for p in projections), default=0.0)
    active = [k for k, p in enumerate(projections) if p.max_abs() > VANISHING_TOL * scale]
    skipped = truncation + 1 - len(active)
    if skipped:
        logger.info(f"skipping {skipped} modes with vanishing projection")

    work = [(provider.mode(k), projections[k]) for k in active]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        solved = list(executor.map(lambda item: _solve_mode(n, grid, item, order, cfg), work))

    coefficients = []
    components: Dict[int, RadialFunction] = {}
    for k, (u_k, diagnostics) in zip(active, solved):
        coefficients.append(ModeCoefficient(index=k, mode=provider.mode(k), v=projections[k], u=u_k,
                                            diagnostics=diagnostics))
        components[k] = u_k
    u = TorusField.from_modes(grid, provider, components)
    u0 = components.get(0, RadialFunction.zeros(grid))

    solution = PoissonSolution(u=u, u0=u0, coefficients=coefficients, report={})
    solution.report.update({
        "truncation": truncation,
        "source_order": source_order,
        "active_modes": len(active),
        "top_quarter_fraction": top_fraction,
        "discarded_fraction": discarded,
        "order_u": _sup_order(u, order + n + 1),
        "order_centered": _sup_order(solution.centered(), order + 1),
        "coefficient_decay": _coefficient_decay(provider, energies),
    })
    logger.info(f"Poisson solve: {len(active)} active modes of {truncation + 1}")
    return solution


def _source_order(v: TorusField, order: float) -> Optional[float]:
    """Fitted decay of sup|v| over the angles; the declared order must bound it."""
    sup = v.sup()
    if not np.any(sup > 0):
        return None
    report = fit_decay(v.grid.z, sup, min_points=min(20, v.grid.size // 2))
    if report.degenerate:
        return None
    if report.exponent > order + SOURCE_ORDER_TOL:
        raise DomainError(
            f"source decays like z^{report.exponent:.3f}, slower than the declared order {order:g}")
    return report.exponent


def _sup_order(field_: TorusField, target: float) -> Optional[DecayReport]:
    sup = field_.sup()
    if not np.any(sup > 0):
        return None
    return fit_decay(field_.grid.z, sup, target=target, min_points=min(20, field_.grid.size // 2))


def _coefficient_decay(provider: SpectrumProvider, energies: np.ndarray) -> float:
    """Semilog slope of log ||v_k|| against Lambda_k over the nonvanishing modes."""
    levels = np.array([provider.mode(k).level for k in range(energies.size)])
    usable = (energies > 0) & (levels > 0)
    if usable.sum() < 3:
        return float("nan")
    slope, _ = np.polyfit(levels[usable], 0.5 * np.log(energies[usable]), 1)
    return float(slope)


def laplace_residual(u: Union[PoissonSolution, TorusField], v: TorusField,
                     provider: Optional[SpectrumProvider] = None) -> Dict[str, object]:
    """
    Delta u - v per slice in L2(Y), through the mode decomposition.

    A PoissonSolution contributes its exact radial derivatives; a bare
    TorusField is projected and differentiated with finite differences.

    Returns:
        dict with per-slice absolute and relative residual norms and their maxima
    """
    provider = v.provider if provider is None else provider
    grid = v.grid
    params = ModelParams(n=provider.n)
    v_projections = project_all(v)

    if isinstance(u, PoissonSolution):
        u_modes = {c.index: c.u for c in u.coefficients}
    else:
        u_modes = {k: p for k, p in enumerate(project_all(u)) if not p.is_zero()}

    squared = np.zeros(grid.size)
    for k, v_k in enumerate(v_projections):
        if k in u_modes:
            applied = laplacian_separated(params, u_modes[k], provider.mode(k).mode).values
            squared += (applied - v_k.values) ** 2
        elif not v_k.is_zero():
            squared += v_k.values ** 2

    absolute = np.sqrt(squared)
    reference = np.sqrt(v.mean_square())
    relative = absolute / np.maximum(reference, np.finfo(float).tiny)
    inner = slice(2, -2) if grid.size > 4 else slice(None)
    result = {
        "z": grid.z,
        "absolute": absolute,
        "relative": relative,
        "max_absolute": float(np.max(absolute[inner])),
        "max_relative": float(np.max(relative[inner])),
    }
    logger.info(f"Laplace residual: max {result['max_absolute']:.3e} (relative {result['max_relative']:.3e})")
    return result
