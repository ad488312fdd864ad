"""
Damped Newton solver for the radial Monge-Ampere equation

    (omega + i dd^c phi)^n = target * omega_C^n

on a truncated window [z_min, z_max] with phi = 0 at both ends. Derivatives
use three-point stencils in x = ln z so the linearized operator is exactly
tridiagonal.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import solve_banded

from .decay_iteration import RadialMetricState, ratio_terms
from .errors import ConvergenceError, DomainError, FitError, MetricDegenerationError
from .model_space import ModelParams
from .radial import DecayReport, RadialFunction, RadialGrid, fit_decay

logger = logging.getLogger(__name__)

Target = Union[float, np.ndarray]

QUADRATIC_REGIME = 0.1


class NewtonConfig(BaseModel):
    """Window, tolerance and damping schedule of the Newton solve."""

    model_config = ConfigDict(frozen=True)

    z_min: float = Field(5.0, ge=1.0)
    z_max: float = Field(50.0, gt=1.0)
    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(12, gt=0)
    min_damping: float = Field(2.0 ** -20, gt=0, le=1)

    @model_validator(mode="after")
    def _check_window(self) -> "NewtonConfig":
        if self.z_max <= self.z_min:
            raise ValueError(f"z_max={self.z_max} must exceed z_min={self.z_min}")
        return self


@dataclass
class ConvergenceTrace:
    """Per-iteration max residual, step norm and damping."""

    residuals: List[float] = field(default_factory=list)
    step_norms: List[float] = field(default_factory=list)
    damping: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.step_norms)

    def contraction_constant(self, regime: float = QUADRATIC_REGIME) -> float:
        """max r_{k+1} / r_k^2 over steps starting below `regime`; nan when none qualify."""
        ratios = [
            after / before ** 2
            for before, after in zip(self.residuals[:-1], self.residuals[1:])
            if 0.0 < before < regime
        ]
        return max(ratios) if ratios else float("nan")

    def as_rows(self) -> List[dict]:
        rows = []
        for k, r in enumerate(self.residuals):
            rows.append({
                "iteration": k,
                "max_residual": r,
                "step_norm": self.step_norms[k] if k < len(self.step_norms) else np.nan,
                "damping": self.damping[k] if k < len(self.damping) else np.nan,
            })
        return rows


# ============================================================================
# Discrete operators in x = ln z
# ============================================================================

class Stencils(NamedTuple):
    """Tridiagonal weights at interior nodes: (lower, diagonal, upper)."""

    d1: Tuple[np.ndarray, np.ndarray, np.ndarray]
    d2: Tuple[np.ndarray, np.ndarray, np.ndarray]


def stencils(x: np.ndarray) -> Stencils:
    """
    Three-point weights in x = ln z, second order on nonuniform nodes.

    The Newton Jacobian is tridiagonal only on these; the five-point fourth-order
    derivatives of RadialGrid would make it pentadiagonal.
    """
    h_minus = x[1:-1] - x[:-2]
    h_plus = x[2:] - x[1:-1]
    span = h_minus + h_plus
    d1 = (-h_plus / (h_minus * span), (h_plus - h_minus) / (h_minus * h_plus), h_minus / (h_plus * span))
    d2 = (2.0 / (h_minus * span), -2.0 / (h_minus * h_plus), 2.0 / (h_plus * span))
    return Stencils(d1=d1, d2=d2)


def _apply(weights, phi: np.ndarray) -> np.ndarray:
    lower, diag, upper = weights
    return lower * phi[:-2] + diag * phi[1:-1] + upper * phi[2:]


def x_derivatives(grid: RadialGrid, phi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(phi_x, phi_xx) on every node; end nodes reuse the neighbouring parabola."""
    x = grid.x
    fx = np.gradient(phi, x, edge_order=2)
    fxx = np.empty_like(phi)
    fxx[1:-1] = _apply(stencils(x).d2, phi)
    fxx[0], fxx[-1] = fxx[1], fxx[-2]
    return fx, fxx


def potential_increments(n: int, z: np.ndarray, phi_x: np.ndarray, phi_xx: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """dphi/dt = phi_x/(n z^n) and d2phi/dt2 = (phi_xx - n phi_x)/(n^2 z^(2n))."""
    return phi_x / (n * z ** n), (phi_xx - n * phi_x) / (n * n * z ** (2 * n))


def _window(state: RadialMetricState, phi: RadialFunction) -> RadialMetricState:
    if np.array_equal(phi.grid.t, state.grid.t):
        return state
    return state.restrict(float(phi.z[0]), float(phi.z[-1]))


def _ratio(state: RadialMetricState, phi_values: np.ndarray):
    n, z = state.n, state.z
    phi_x, phi_xx = x_derivatives(state.grid, phi_values)
    dA, dB = potential_increments(n, z, phi_x, phi_xx)
    return ratio_terms(n, state.c, z, state.A.values + dA, state.B.values + dB)


def residual(state: RadialMetricState, phi: RadialFunction, target: Target = 1.0) -> RadialFunction:
    """
    target - (omega + i dd^c phi)^n / omega_C^n on the grid of phi.

    With target = 1 this is the ratio F of the composite state.

    Raises:
        MetricDegenerationError: the composite form is not positive
    """
    window = _window(state, phi)
    terms = _ratio(window, phi.values)
    values = (np.asarray(target) - 1.0) + terms.F
    return RadialFunction(grid=phi.grid, values=values * np.ones_like(phi.values))


def jacobian(state: RadialMetricState, phi: RadialFunction) -> np.ndarray:
    """
    Derivative of the residual with respect to interior phi values, as a
    (3, m) banded array for scipy.linalg.solve_banded.

        J = -[diag(S/(n z^(n+1))) (D2 - n D1) + diag((1 + b) S_A/(n z^n)) D1]
    """
    window = _window(state, phi)
    n, z = window.n, window.z
    terms = _ratio(window, phi.values)
    ops = stencils(window.grid.x)
    zi = z[1:-1]
    fiber_weight = terms.S[1:-1] / (n * zi ** (n + 1))
    horizontal_weight = terms.fiber[1:-1] * terms.dS_dA[1:-1] / (n * zi ** n)

    bands = []
    for k in range(3):
        bands.append(-(fiber_weight * (ops.d2[k] - n * ops.d1[k]) + horizontal_weight * ops.d1[k]))
    lower, diag, upper = bands

    m = zi.size
    banded = np.zeros((3, m))
    banded[0, 1:] = upper[:-1]
    banded[1, :] = diag
    banded[2, :-1] = lower[1:]
    return banded


def banded_matvec(banded: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Product of a (1, 1)-banded matrix in solve_banded layout with v."""
    out = banded[1] * v
    out[:-1] += banded[0, 1:] * v[1:]
    out[1:] += banded[2, :-1] * v[:-1]
    return out


# ============================================================================
# Newton
# ============================================================================

def _interior_max(values: np.ndarray) -> float:
    return float(np.max(np.abs(values[1:-1])))


def newton_solve(state: RadialMetricState, config: NewtonConfig = NewtonConfig(),
                 target: Target = 1.0) -> Tuple[RadialFunction, ConvergenceTrace]:
    """
    Solve residual(state, phi, target) = 0 at the interior nodes of the window.

    Args:
        state: radial state covering [config.z_min, config.z_max]
        config: window, tolerance and damping schedule
        target: volume ratio to reach (array on the window grid or scalar)

    Returns:
        (phi on the window grid, ConvergenceTrace)

    Raises:
        ConvergenceError: damping exhausted or iteration cap reached; trace attached
        MetricDegenerationError: the starting state itself is degenerate
    """
    z = state.z
    if config.z_min < z[0] * (1 - 1e-12) or config.z_max > z[-1] * (1 + 1e-12):
        raise DomainError(f"Newton window [{config.z_min:g}, {config.z_max:g}] outside the state grid "
                          f"[{z[0]:g}, {z[-1]:g}]")
    window = state.restrict(config.z_min, config.z_max)
    grid = window.grid
    if grid.size < 3:
        raise DomainError("Newton window needs at least one interior node")

    phi = np.zeros(grid.size)
    trace = ConvergenceTrace()
    current = residual(window, RadialFunction(grid=grid, values=phi), target).values
    trace.residuals.append(_interior_max(current))
    logger.info(f"Newton start on [{grid.z[0]:g}, {grid.z[-1]:g}]: residual {trace.residuals[-1]:.3e}")

    while trace.residuals[-1] > config.tol:
        if trace.iterations >= config.max_iter:
            raise ConvergenceError(
                f"no convergence in {config.max_iter} Newton steps (residual {trace.residuals[-1]:.3e})", trace)

        banded = jacobian(window, RadialFunction(grid=grid, values=phi))
        step = solve_banded((1, 1), banded, -current[1:-1])

        damping = 1.0
        while True:
            trial = phi.copy()
            trial[1:-1] += damping * step
            try:
                trial_residual = residual(window, RadialFunction(grid=grid, values=trial), target).values
                trial_max = _interior_max(trial_residual)
            except MetricDegenerationError as exc:
                logger.debug(f"step {trace.iterations}: positivity lost at z={exc.z:g}, halving")
                trial_max = float("inf")
            if trial_max < trace.residuals[-1] or trial_max <= config.tol:
                break
            damping *= 0.5
            if damping < config.min_damping:
                raise ConvergenceError(f"damping exhausted at residual {trace.residuals[-1]:.3e}", trace)

        phi, current = trial, trial_residual
        trace.step_norms.append(damping * float(np.max(np.abs(step))))
        trace.damping.append(damping)
        trace.residuals.append(trial_max)
        logger.info(f"Newton step {trace.iterations}: residual {trial_max:.3e}, damping {damping:g}")

    trace.converged = True
    return RadialFunction(grid=grid, values=phi), trace


# ============================================================================
# Diagnostics
# ============================================================================

class PhiDecay(NamedTuple):
    potential: DecayReport
    hessian: DecayReport


def ddbar_norm(phi: RadialFunction) -> np.ndarray:
    """|i dd^c phi| in the model metric for radial phi."""
    n, z = phi.n, phi.z
    phi_x, phi_xx = x_derivatives(phi.grid, phi.values)
    dA, dB = potential_increments(n, z, phi_x, phi_xx)
    return np.sqrt((n - 1) * (dA / z) ** 2 + (n * z ** (n - 1) * dB) ** 2)


def phi_decay_report(phi: RadialFunction, window: Optional[Tuple[float, float]] = None,
                     target: Optional[float] = None) -> PhiDecay:
    """
    Fitted orders of |phi| and |i dd^c phi| away from the Dirichlet ends.

    The default window is [1.5 z_min, z_max / 2] of the solve.

    Raises:
        FitError: window too short
    """
    z = phi.z
    if window is None:
        window = (1.5 * float(z[0]), 0.5 * float(z[-1]))
    if window[1] <= window[0]:
        raise FitError(f"fit window [{window[0]:g}, {window[1]:g}] is empty")
    reports = []
    for values, goal in ((np.abs(phi.values), None), (ddbar_norm(phi), target)):
        if not np.any(values):
            reports.append(DecayReport(z_lo=window[0], z_hi=window[1], exponent=float("-inf"),
                                       intercept=float("-inf"), residual=0.0, n_points=0,
                                       target=goal, degenerate=True))
        else:
            reports.append(fit_decay(z, values, window, target=goal))
    return PhiDecay(potential=reports[0], hessian=reports[1])


def window_energy(phi: RadialFunction, params: Optional[ModelParams] = None) -> float:
    """
    Dirichlet energy of phi over the window,
    base * fiber * int n z^(n-1) phi_t^2 dt = base * fiber * int phi'(z)^2 dz.
    """
    measure = 1.0 if params is None else params.end_measure
    if phi.is_zero():
        return 0.0
    phi_x, _ = x_derivatives(phi.grid, phi.values)
    return measure * phi.grid.integrate((phi_x / phi.z) ** 2)


def interior_agreement(state: RadialMetricState, config: NewtonConfig, z_max_values: Tuple[float, float],
                       interior: Optional[Tuple[float, float]] = None) -> Dict[str, float]:
    """
    Solve on two windows differing in z_max and compare on a common interior.

    Returns:
        max difference, the scale of the solutions there and the window used
    """
    z_small, z_large = sorted(z_max_values)
    if interior is None:
        interior = (config.z_min, 0.5 * z_small)
    solutions = []
    for z_max in (z_small, z_large):
        phi, _ = newton_solve(state, config.model_copy(update={"z_max": z_max}))
        solutions.append(phi.restrict(*interior))
    # the shorter window's nodes are a prefix of the longer one's
    difference = float(np.max(np.abs(solutions[0].values - solutions[1].values)))
    scale = max(solutions[0].max_abs(), solutions[1].max_abs())
    logger.info(f"interior agreement on [{interior[0]:g}, {interior[1]:g}]: "
                f"difference {difference:.3e}, scale {scale:.3e}")
    return {"z_lo": interior[0], "z_hi": interior[1], "max_difference": difference, "scale": scale,
            "relative": difference / scale if scale > 0 else 0.0}
