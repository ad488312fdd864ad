"""
Per-mode radial ODE

    u'' - V(z) u = n z^(n-1) v(z),   V = (n lam + j^2 n^2 z^n / 4) z^(n-2)

Fundamental pairs (decaying D, growing G) for the zero (j = 0) and nonzero
(j >= 1) fiber modes, Green's-operator solves built from them, the double
integral for the pure fiber mode (lam = j = 0), and a finite-difference
boundary value oracle.

Products of D and G are only ever formed in log space: each side is tabulated
with its exponential phase removed and the phases recombined before a single
exponentiation.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.linalg import solve_banded

from .errors import DomainError, FitError, QuadratureError
from .model_space import Mode, mode_potential
from .radial import RadialFunction, RadialGrid, fit_decay
from .special_functions import (
    DEFAULT_QUADRATURE,
    KummerParams,
    QuadratureConfig,
    _quad,
    bessel_I_prime_over_n,
    bessel_I_scaled,
    bessel_K_prime_over_n,
    bessel_K_scaled,
    log_gamma,
    log_phi_sharp,
    log_psi_flat,
)

logger = logging.getLogger(__name__)

Source = Union[Callable[[np.ndarray], np.ndarray], RadialFunction]

TABULATION_NODES = 96
BOUND_FROM = 3.0
MAX_TAIL_STEPS = 60


# ============================================================================
# Exact log-evaluations of the fundamental solutions
# ============================================================================

def _zero_mode_logs(n: int, lam: float, z: float, cfg: QuadratureConfig) -> Tuple[float, float, float, float]:
    """(log D, log G, D'/D, G'/G) for D = sqrt(z) K_{1/n}(y), G = sqrt(z) I_{1/n}(y), y = 2 sqrt(lam/n) z^(n/2)."""
    nu = 1.0 / n
    y = 2.0 * math.sqrt(lam / n) * z ** (0.5 * n)
    dy = math.sqrt(n * lam) * z ** (0.5 * n - 1.0)
    k_scaled = bessel_K_scaled(nu, y, cfg)
    i_scaled = bessel_I_scaled(nu, y, cfg)
    log_d = 0.5 * math.log(z) + math.log(k_scaled) - y
    log_g = 0.5 * math.log(z) + math.log(i_scaled) + y
    dlog_d = 0.5 / z + bessel_K_prime_over_n(n, y, cfg, scaled=True) / k_scaled * dy
    dlog_g = 0.5 / z + bessel_I_prime_over_n(n, y, cfg, scaled=True) / i_scaled * dy
    return log_d, log_g, dlog_d, dlog_g


def _nonzero_mode_logs(n: int, lam: float, j: int, z: float, cfg: QuadratureConfig) -> Tuple[float, float, float, float]:
    """
    (log D, log G, D'/D, G'/G) for D = e^(x/2) Psi(beta, alpha, -x), G = e^(x/2) Phi(beta, alpha, -x), x = j z^n.

    Derivatives use the alpha + 1 companions:
        D'/D = (n x / z) (-1/2 - a Psi(beta, alpha+1) / Psi(beta, alpha))
        G'/G = (n x / z) (-1/2 + (a/alpha) Phi(beta, alpha+1) / Phi(beta, alpha))
    """
    p = KummerParams.from_mode(n, lam, j)
    x = j * z ** n
    log_psi = log_psi_flat(p, -x, cfg)
    log_phi = log_phi_sharp(p, -x, cfg)
    psi_ratio = math.exp(log_psi_flat(p, -x, cfg, shift=1) - log_psi)
    phi_ratio = math.exp(log_phi_sharp(p, -x, cfg, shift=1) - log_phi)
    rate = n * x / z
    return (
        0.5 * x + log_psi,
        0.5 * x + log_phi,
        rate * (-0.5 - p.a * psi_ratio),
        rate * (-0.5 + p.a / p.alpha * phi_ratio),
    )


def _mode_logs(n: int, mode: Mode, z: float, cfg: QuadratureConfig) -> Tuple[float, float, float, float]:
    if mode.j == 0:
        return _zero_mode_logs(n, mode.lam, float(z), cfg)
    return _nonzero_mode_logs(n, mode.lam, mode.j, float(z), cfg)


# ============================================================================
# Fundamental pairs
# ============================================================================

@dataclass(frozen=True)
class FundamentalPair:
    """
    Decaying/growing homogeneous solutions of one mode, tabulated on [z_lo, z_hi].

    The splines hold log D + phase and log G - phase (phase = y for the zero
    mode, x/2 for nonzero modes) and the matching log-derivatives.
    """

    n: int
    mode: Mode
    z_lo: float
    z_hi: float
    expected_wronskian: float
    cfg: QuadratureConfig = field(default=DEFAULT_QUADRATURE, repr=False)
    nodes: int = field(default=TABULATION_NODES, repr=False)
    _splines: Dict[str, object] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.z_lo < self.z_hi:
            raise DomainError(f"bad tabulation range [{self.z_lo}, {self.z_hi}]")
        z_nodes = np.geomspace(self.z_lo, self.z_hi, self.nodes)
        table = np.array([self.exact(z) for z in z_nodes])
        phase, dphase = self.phase(z_nodes), self.dphase(z_nodes)
        x = np.log(z_nodes)
        self._splines["log_d"] = make_interp_spline(x, table[:, 0] + phase, k=5)
        self._splines["log_g"] = make_interp_spline(x, table[:, 1] - phase, k=5)
        self._splines["dlog_d"] = make_interp_spline(x, table[:, 2] + dphase, k=5)
        self._splines["dlog_g"] = make_interp_spline(x, table[:, 3] - dphase, k=5)
        logger.debug(f"tabulated fundamental pair for {self.mode} on [{self.z_lo:g}, {self.z_hi:g}]")

    def exact(self, z: float) -> Tuple[float, float, float, float]:
        """(log D, log G, D'/D, G'/G) straight from the integral representations."""
        return _mode_logs(self.n, self.mode, z, self.cfg)

    def phase(self, z):
        z = np.asarray(z, dtype=float)
        if self.mode.j == 0:
            return 2.0 * np.sqrt(self.mode.lam / self.n) * z ** (0.5 * self.n)
        return 0.5 * self.mode.j * z ** self.n

    def dphase(self, z):
        z = np.asarray(z, dtype=float)
        if self.mode.j == 0:
            return np.sqrt(self.n * self.mode.lam) * z ** (0.5 * self.n - 1.0)
        return 0.5 * self.n * self.mode.j * z ** (self.n - 1)

    def _check(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        tol = 1e-12 * self.z_hi
        if np.any(z < self.z_lo - tol) or np.any(z > self.z_hi + tol):
            raise DomainError(f"z outside the tabulated range [{self.z_lo:g}, {self.z_hi:g}]")
        return z

    def log_D(self, z):
        z = self._check(z)
        return self._splines["log_d"](np.log(z)) - self.phase(z)

    def log_G(self, z):
        z = self._check(z)
        return self._splines["log_g"](np.log(z)) + self.phase(z)

    def dlog_D(self, z):
        z = self._check(z)
        return self._splines["dlog_d"](np.log(z)) - self.dphase(z)

    def dlog_G(self, z):
        z = self._check(z)
        return self._splines["dlog_g"](np.log(z)) + self.dphase(z)

    def D(self, z):
        return np.exp(self.log_D(z))

    def G(self, z):
        return np.exp(self.log_G(z))

    def wronskian(self, z, exact: bool = False):
        """G D' - G' D, formed as exp(log D + log G) (D'/D - G'/G)."""
        if exact:
            values = np.array([self.exact(s) for s in np.atleast_1d(z)])
            return np.exp(values[:, 0] + values[:, 1]) * (values[:, 2] - values[:, 3])
        return np.exp(self.log_D(z) + self.log_G(z)) * (self.dlog_D(z) - self.dlog_G(z))

    def potential(self, z):
        return mode_potential(self.n, self.mode, z)


def _expected_wronskian(n: int, mode: Mode) -> float:
    """G D' - G' D: -n/2 for the zero mode, Gamma(alpha-1)/Gamma(alpha-beta) j^(1/n) otherwise."""
    if mode.j == 0:
        return -0.5 * n
    p = KummerParams.from_mode(n, mode.lam, mode.j)
    # Gamma(alpha - 1) = Gamma(alpha) / (alpha - 1) = -n Gamma(alpha)
    return -n * math.exp(log_gamma(p.alpha) - log_gamma(p.a)) * mode.j ** (1.0 / n)


@lru_cache(maxsize=64)
def fundamental_zero(n: int, lam: float, z_lo: float = 1.0, z_hi: float = 16.0,
                     cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> FundamentalPair:
    """
    Zero-mode pair D = sqrt(z) K_{1/n}(2 sqrt(lam/n) z^(n/2)), G = sqrt(z) I_{1/n}(...).

    Args:
        n: complex dimension
        lam: divisor eigenvalue, lam > 0
        z_lo, z_hi: tabulation range

    Returns:
        FundamentalPair with expected Wronskian -n/2
    """
    if lam <= 0:
        raise DomainError(f"zero-mode pairs need lam > 0, got {lam}")
    mode = Mode(lam=lam, j=0)
    return FundamentalPair(n=n, mode=mode, z_lo=z_lo, z_hi=z_hi,
                           expected_wronskian=_expected_wronskian(n, mode), cfg=cfg)


@lru_cache(maxsize=64)
def fundamental_nonzero(n: int, lam: float, j: int, z_lo: float = 1.0, z_hi: float = 16.0,
                        cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> FundamentalPair:
    """
    Nonzero-mode pair D = e^(jz^n/2) Psi(beta, alpha, -jz^n), G = e^(jz^n/2) Phi(beta, alpha, -jz^n).

    Returns:
        FundamentalPair with expected Wronskian Gamma(alpha-1)/Gamma(alpha-beta) j^(1/n)
    """
    if z_lo < 1.0 / j ** (1.0 / n):
        raise DomainError("nonzero-mode pairs need j z^n >= 1 on the whole range")
    mode = Mode(lam=lam, j=j)
    return FundamentalPair(n=n, mode=mode, z_lo=z_lo, z_hi=z_hi,
                           expected_wronskian=_expected_wronskian(n, mode), cfg=cfg)


def fundamental_pair(n: int, mode: Mode, z_lo: float, z_hi: float,
                     cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> FundamentalPair:
    if mode.j == 0:
        return fundamental_zero(n, float(mode.lam), float(z_lo), float(z_hi), cfg)
    return fundamental_nonzero(n, float(mode.lam), int(mode.j), float(z_lo), float(z_hi), cfg)


# ============================================================================
# Green's-operator solves
# ============================================================================

@dataclass(frozen=True)
class GreenSolution:
    """Mode solution with its sampled source and diagnostics."""

    u: RadialFunction
    source: RadialFunction
    mode: Mode
    bound_report: Dict[str, float]
    tail_bound: float
    residual: np.ndarray

    @property
    def bound_ratio(self) -> float:
        return self.bound_report["u"]

    @property
    def max_residual(self) -> float:
        interior = self.residual[2:-2] if self.residual.size > 4 else self.residual
        return float(np.max(np.abs(interior)))


def _as_callable(v: Source) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(v, RadialFunction):
        return v.__call__
    return v


def _source_order(v: Source, samples: np.ndarray, z: np.ndarray, order: Optional[float]) -> float:
    if order is not None:
        return float(order)
    if isinstance(v, RadialFunction) and v.order is not None:
        return float(v.order)
    try:
        report = fit_decay(z, samples, min_points=min(20, z.size // 2))
    except FitError as exc:
        raise DomainError(f"source order not declared and could not be fitted: {exc}") from exc
    return report.exponent


def _extended_source(v: Source, delta: float) -> Callable[[np.ndarray], np.ndarray]:
    """Callable source; sampled sources continue past their grid as the declared power z^delta."""
    if not isinstance(v, RadialFunction):
        return v
    z_end, v_end = float(v.z[-1]), float(v.values[-1])

    def func(s):
        s = np.asarray(s, dtype=float)
        inside = np.minimum(s, z_end)
        return np.where(s <= z_end, v(inside), v_end * (s / z_end) ** delta)

    return func


def _tail_cutoff(n: int, mode: Mode, f_hat: Callable[[float], float], delta: float, z_end: float,
                 log_scale: float, log_prefactor: float, cfg: QuadratureConfig) -> Tuple[float, float]:
    """
    Upper limit Z >= z_end of the decaying-side integral and the log of its certified remainder.

    The remainder int_Z^inf D s^(n-1) |v| ds is bounded by D(Z) |f_hat(Z)| / slope with
    slope = -D'/D(Z) - (n-1+delta)/Z. Z moves outward until |n/W| G(z_end) times the
    remainder is below tail_rtol * |u(z_end)| + epsabs.

    Raises:
        QuadratureError: no admissible Z within MAX_TAIL_STEPS moves
    """
    log_g_end = _mode_logs(n, mode, z_end, cfg)[1]
    log_target = math.log(cfg.tail_rtol * math.exp(log_scale) + cfg.epsabs)
    Z = z_end
    for _ in range(MAX_TAIL_STEPS):
        log_d, _, dlog_d, _ = _mode_logs(n, mode, Z, cfg)
        slope = -dlog_d - (n - 1 + delta) / Z
        if slope > 0:
            log_remainder = log_d + math.log(abs(f_hat(Z)) + 1e-300) - math.log(slope)
            deficit = log_prefactor + log_g_end + log_remainder - log_target
            if deficit <= 0:
                return Z, log_remainder
            Z += max(1.1 * deficit / slope, 1e-3 * Z)
        else:
            Z *= 1.25
    raise QuadratureError(
        f"tail of the {mode} Green integral not certifiable below rtol={cfg.tail_rtol:g} "
        f"with source order {delta:g} (reached z={Z:g})")


def asymptotic_mode_solution(n: int, mode: Mode, v_values: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Leading integration-by-parts term -n z^(n-1) v / V."""
    return -n * z ** (n - 1) * v_values / mode_potential(n, mode, z)


def _bound_report(n: int, mode: Mode, z: np.ndarray, u: np.ndarray, du: np.ndarray, ddu: np.ndarray,
                  delta: float, bound_from: float) -> Dict[str, float]:
    mask = z >= bound_from
    if not np.any(mask):
        mask = np.ones_like(z, dtype=bool)
    zm = z[mask]
    if mode.j == 0:
        weight = mode.lam
        report = {
            "u": np.max(np.abs(u[mask]) * weight / zm ** (delta + 1)),
            "du": np.max(np.abs(du[mask]) * math.sqrt(mode.lam) / zm ** (delta + 0.5 * n)),
            "ddu": np.max(np.abs(ddu[mask]) / zm ** (delta + n - 1)),
        }
    else:
        weight = 0.25 * mode.j ** 2 * n * n * zm ** n + n * mode.lam
        report = {
            "u": np.max(np.abs(u[mask]) * weight / zm ** (delta + 1)),
            "du": np.max(np.abs(du[mask]) / zm ** (delta + n)),
        }
    return {key: float(value) for key, value in report.items()}


def green_solve(
    n: int,
    mode: Mode,
    v: Source,
    z_max: float,
    grid: Optional[RadialGrid] = None,
    order: Optional[float] = None,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    bound_from: float = BOUND_FROM,
) -> GreenSolution:
    """
    u(z) = (n/W) (D(z) int_{z_lo}^z G s^(n-1) v ds + G(z) int_z^inf D s^(n-1) v ds)

    The decaying-side integral is cut at the first Z past the grid end where the
    certified remainder falls below tail_rtol relative to |u| there. Sampled
    sources continue past their grid as z^delta.

    Args:
        n: complex dimension
        mode: (lam, j) with (lam, j) != (0, 0)
        v: source, callable in z or a sampled RadialFunction
        z_max: outer end of the evaluation domain
        grid: evaluation grid inside [z_lo, z_max]; log-uniform [1, z_max] by default
        order: declared polynomial order delta of v (fitted when omitted)

    Returns:
        GreenSolution with exact u' and u'' attached

    Raises:
        QuadratureError: the tail cannot be certified for this mode and source order
    """
    if mode.is_fiber_mode:
        raise DomainError("the (0, 0) mode is handled by fiber_mode_solve")
    if grid is None:
        grid = RadialGrid.log_uniform(1.0, z_max, 240, n)
    if grid.n != n:
        raise DomainError(f"grid built for n={grid.n}, solve requested for n={n}")
    z = grid.z
    if z[-1] > z_max * (1 + 1e-12):
        raise DomainError(f"evaluation grid reaches {z[-1]:g} beyond z_max={z_max:g}")

    v_values = np.asarray(_as_callable(v)(z), dtype=float) * np.ones_like(z)
    source = RadialFunction(grid=grid, values=v_values, order=order)
    potential = mode_potential(n, mode, z)

    if not np.any(v_values):
        zero = np.zeros_like(z)
        u = RadialFunction(grid=grid, values=zero, first=zero, second=zero)
        return GreenSolution(u=u, source=source, mode=mode, bound_report={"u": 0.0, "du": 0.0},
                             tail_bound=0.0, residual=zero)

    delta = _source_order(v, v_values, z, order)
    func = _extended_source(v, delta)

    def f_hat(s: float) -> float:
        return s ** (n - 1) * float(func(s))

    z_end = float(z[-1])
    u_scale = abs(float(asymptotic_mode_solution(n, mode, v_values[-1:], z[-1:])[0]))
    log_prefactor = math.log(n / abs(_expected_wronskian(n, mode)))
    z_cut, log_remainder = _tail_cutoff(n, mode, f_hat, delta, z_end, math.log(u_scale + 1e-300),
                                        log_prefactor, cfg)
    pair = fundamental_pair(n, mode, float(z[0]), z_cut, cfg)
    prefactor = n / pair.expected_wronskian

    lower = np.empty_like(z)
    upper = np.empty_like(z)
    log_d, log_g = pair.log_D(z), pair.log_G(z)
    for i, zi in enumerate(z):
        ld, lg = float(log_d[i]), float(log_g[i])
        lower[i] = _quad(lambda s: math.exp(ld + float(pair.log_G(s))) * f_hat(s), float(z[0]), zi, cfg, epsabs=0.0)
        upper[i] = _quad(lambda s: math.exp(lg + float(pair.log_D(s))) * f_hat(s), zi, z_cut, cfg, epsabs=0.0)

    u = prefactor * (lower + upper)
    du = prefactor * (pair.dlog_D(z) * lower + pair.dlog_G(z) * upper)
    f = n * z ** (n - 1) * v_values
    ddu = potential * u + f
    tail_bound = float(np.max(abs(prefactor) * np.exp(log_g + log_remainder)))
    tail_end = abs(prefactor) * math.exp(float(log_g[-1]) + log_remainder)
    if tail_end > 10.0 * (cfg.tail_rtol * abs(u[-1]) + cfg.epsabs):
        raise QuadratureError(
            f"remainder {tail_end:.2e} beyond z={z_cut:g} exceeds tolerance against |u(z_end)|={abs(u[-1]):.2e}")

    solution = RadialFunction(grid=grid, values=u, first=du, second=ddu, order=delta + 1)
    fd_second = grid.derivatives(du)[0]
    residual = (fd_second - ddu) / (np.abs(f) + np.abs(potential * u) + 1e-300)

    bounds = _bound_report(n, mode, z, u, du, ddu, delta, bound_from)
    bounds["tail_cut"] = z_cut
    bounds["tail_relative"] = tail_end / (abs(u[-1]) + cfg.epsabs)
    leading = asymptotic_mode_solution(n, mode, v_values, z)
    window = z >= bound_from
    if np.any(window):
        bounds["asymptotic_gap"] = float(np.max(np.abs(u[window] - leading[window]) / (np.abs(leading[window]) + 1e-300)))
    logger.info(f"Green solve {mode}: bound ratio {bounds['u']:.4g}, tail bound {tail_bound:.2e}")
    return GreenSolution(u=solution, source=source, mode=mode, bound_report=bounds,
                         tail_bound=tail_bound, residual=residual)


def green_solve_zero(n: int, lam: float, v: Source, z_max: float, **kwargs) -> GreenSolution:
    """Zero fiber mode (j = 0, lam > 0); prefactor n/W = -2."""
    return green_solve(n, Mode(lam=lam, j=0), v, z_max, **kwargs)


def green_solve_nonzero(n: int, lam: float, j: int, v: Source, z_max: float, **kwargs) -> GreenSolution:
    """Nonzero fiber mode (j >= 1); prefactor Gamma(alpha-beta) n / (Gamma(alpha-1) j^(1/n))."""
    if j < 1:
        raise DomainError("nonzero-mode solves need j >= 1")
    return green_solve(n, Mode(lam=lam, j=j), v, z_max, **kwargs)


# ============================================================================
# Pure fiber mode: u'' = n z^(n-1) v
# ============================================================================

def _power_tail(v: RadialFunction, noise_scale: Optional[np.ndarray]):
    """Fitted (K, p) of v ~ K z^p on the upper half of its grid, or None when v is below noise there."""
    try:
        report = fit_decay(v.z, v.values, noise_scale=noise_scale, min_points=20)
    except FitError as exc:
        logger.debug(f"no tail model for fiber-mode source: {exc}")
        return None
    if report.degenerate:
        return None
    return report.coefficient, report.exponent


def fiber_mode_solve(n: int, v: RadialFunction, order: Optional[float] = None,
                     noise_scale: Optional[np.ndarray] = None) -> RadialFunction:
    """
    u0(z) = int_{C1}^z ( int_{C2}^t n s^(n-1) v(s) ds ) dt with C1, C2 in {inner edge, +inf}.

    A limit is +inf exactly when the corresponding antiderivative converges at
    infinity for the declared order delta of v; the piece beyond the grid is
    taken from a power-law fit of v.

    Args:
        n: complex dimension
        v: sampled source
        order: declared order delta (falls back to v.order, then to a fit)
        noise_scale: cancellation scale of v for the tail fit

    Returns:
        RadialFunction with first = u0' and second = n z^(n-1) v exactly
    """
    if v.n != n:
        raise DomainError(f"source grid built for n={v.n}, solve requested for n={n}")
    grid = v.grid
    z = grid.z
    if v.is_zero():
        zero = np.zeros_like(z)
        return RadialFunction(grid=grid, values=zero, first=zero, second=zero, order=order)

    tail = _power_tail(v, noise_scale)
    delta = order if order is not None else v.order
    if delta is None:
        delta = tail[1] if tail is not None else float("-inf")
    if np.isnan(delta) or delta == float("inf"):
        raise DomainError(f"source order {delta} admits no convergent limit choice")

    f = n * z ** (n - 1) * v.values
    inner = grid.cumulative(f)
    first = inner
    converges_inner = delta + n - 1 < -1
    if converges_inner:
        tail_inner = 0.0
        if tail is not None:
            K, p = tail
            if n + p >= 0:
                raise QuadratureError(f"non-convergent tail: fitted order {p:.3f} for declared {delta:.3f}")
            tail_inner = -n * K * z[-1] ** (n + p) / (n + p)
        first = inner - inner[-1] - tail_inner

    values = grid.cumulative(first)
    if converges_inner and delta + n < -1:
        tail_outer = 0.0
        if tail is not None:
            K, p = tail
            if n + p + 1 >= 0:
                raise QuadratureError(f"non-convergent tail: fitted order {p:.3f} for declared {delta:.3f}")
            tail_outer = -n * K * z[-1] ** (n + p + 1) / ((n + p) * (n + p + 1))
        values = values - values[-1] - tail_outer

    logger.debug(f"fiber mode solve: delta={delta:.3f}, limits "
                 f"C2={'inf' if converges_inner else 'edge'}, C1={'inf' if converges_inner and delta + n < -1 else 'edge'}")
    return RadialFunction(grid=grid, values=values, first=first, second=f, order=delta + n + 1)


# ============================================================================
# Finite-difference oracle
# ============================================================================

def brute_force_bvp(
    n: int,
    mode: Mode,
    v: Callable[[np.ndarray], np.ndarray],
    domain: Tuple[float, float],
    boundary: Tuple[float, float],
    num: int = 4001,
    order: int = 4,
) -> RadialFunction:
    """
    Two-point problem u'' - V u = n z^(n-1) v on a uniform z-grid with Dirichlet data.

    Args:
        order: 4 for Numerov, 2 for the three-point scheme

    Returns:
        RadialFunction on the uniform grid
    """
    if order not in (2, 4):
        raise DomainError(f"scheme order must be 2 or 4, got {order}")
    grid = RadialGrid.uniform(domain[0], domain[1], num, n)
    z = grid.z
    h = z[1] - z[0]
    g = mode_potential(n, mode, z)
    if np.any(g < 0):
        raise DomainError("negative potential: the two-point problem may be singular")
    s = n * z ** (n - 1) * np.asarray(v(z), dtype=float) * np.ones_like(z)

    if order == 4:
        off = 1.0 - h * h * g / 12.0
        diag = -2.0 * (1.0 + 5.0 * h * h * g / 12.0)
        rhs = h * h / 12.0 * (s[:-2] + 10.0 * s[1:-1] + s[2:])
    else:
        off = np.ones_like(z)
        diag = -2.0 - h * h * g
        rhs = h * h * s[1:-1]

    rhs = rhs.copy()
    rhs[0] -= off[0] * boundary[0]
    rhs[-1] -= off[-1] * boundary[1]

    m = z.size - 2
    banded = np.zeros((3, m))
    banded[0, 1:] = off[2:-1]
    banded[1, :] = diag[1:-1]
    banded[2, :-1] = off[1:-2]
    interior = solve_banded((1, 1), banded, rhs)

    values = np.concatenate(([boundary[0]], interior, [boundary[1]]))
    return RadialFunction(grid=grid, values=values)


def observed_order(n: int, mode: Mode, v: Callable, exact: Callable, domain: Tuple[float, float],
                   num: int = 201, order: int = 4) -> float:
    """Richardson exponent log2(e_h / e_{h/2}) against a known solution."""
    errors = []
    for size in (num, 2 * num - 1):
        bc = (float(exact(domain[0])), float(exact(domain[1])))
        u = brute_force_bvp(n, mode, v, domain, bc, num=size, order=order)
        errors.append(np.max(np.abs(u.values - exact(u.z))))
    return float(np.log2(errors[0] / errors[1]))
