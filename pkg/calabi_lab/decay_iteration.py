"""
Radial decay iteration on the Calabi model end

A radial state is the model form plus a parallel divisor form (encoded by its
wedge ratios c_j) plus i dd^c of an accumulated radial potential U. Only dU/dt
and d2U/dt2 matter, stored as A and B:

    ratio = (1 + n z^(n-1) B) * sum_j binom(n-1, j) (z + A)^(n-1-j) c_j / z^(n-1)
    F     = 1 - ratio

The iteration solves the flat Laplacian against F, folds the solution into
A and B, and recomputes F from the full nonlinear ratio.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, FitError, MetricDegenerationError, QuadratureError
from .mode_ode import fiber_mode_solve
from .radial import DecayReport, RadialFunction, RadialGrid, fit_decay
from .special_functions import DEFAULT_QUADRATURE, QuadratureConfig

logger = logging.getLogger(__name__)

FIT_WINDOW = (10.0, 100.0)
GRADIENT_WINDOW = (40.0, 200.0)
REFINE_STEPS = 4


# ============================================================================
# State
# ============================================================================

@dataclass(frozen=True)
class RadialMetricState:
    """
    Radial Kahler state on the end.

    Args:
        n: complex dimension
        c: wedge ratios c_1..c_{n-1} (c_0 = 1 implied, missing entries are 0)
        A: accumulated horizontal addition, sum of du_i/dt
        B: accumulated fiber addition, sum of d2u_i/dt2
        glued_lambda: total coefficient of the linear-in-z potentials applied
    """

    n: int
    c: Tuple[float, ...]
    A: RadialFunction
    B: RadialFunction
    glued_lambda: float = 0.0

    def __post_init__(self):
        c = tuple(float(value) for value in self.c)
        if len(c) > self.n - 1:
            raise DomainError(f"at most n-1 = {self.n - 1} wedge ratios, got {len(c)}")
        c = c + (0.0,) * (self.n - 1 - len(c))
        object.__setattr__(self, "c", c)
        if self.A.n != self.n or self.B.n != self.n:
            raise DomainError("state components built for a different dimension")
        if not np.array_equal(self.A.grid.t, self.B.grid.t):
            raise DomainError("A and B must share a grid")

    @classmethod
    def model(cls, grid: RadialGrid, c: Sequence[float] = ()) -> "RadialMetricState":
        """Model form plus the parallel divisor form, no potential."""
        zero = RadialFunction.zeros(grid)
        return cls(n=grid.n, c=tuple(c), A=zero, B=zero)

    @property
    def grid(self) -> RadialGrid:
        return self.A.grid

    @property
    def z(self) -> np.ndarray:
        return self.A.grid.z

    @property
    def wedge_ratios(self) -> np.ndarray:
        """(c_0, c_1, ..., c_{n-1}) with c_0 = 1."""
        return np.array((1.0,) + self.c)

    def is_flat(self) -> bool:
        return not any(self.c) and self.A.is_zero() and self.B.is_zero()

    def with_potential(self, u: RadialFunction) -> "RadialMetricState":
        """State plus i dd^c u for a radial u on the same grid."""
        A = RadialFunction(grid=self.grid, values=self.A.values + u.dt())
        B = RadialFunction(grid=self.grid, values=self.B.values + u.dtt())
        return replace(self, A=A, B=B)

    def with_arrays(self, A: np.ndarray, B: np.ndarray) -> "RadialMetricState":
        return replace(self,
                       A=RadialFunction(grid=self.grid, values=A),
                       B=RadialFunction(grid=self.grid, values=B))

    def restrict(self, z_lo: float, z_hi: float) -> "RadialMetricState":
        return replace(self, A=self.A.restrict(z_lo, z_hi), B=self.B.restrict(z_lo, z_hi))


def wedge_ratios_from_eigenvalues(mu: Sequence[float]) -> Tuple[float, ...]:
    """
    c_j for a divisor form with eigenvalues mu relative to the divisor metric:
    c_j = e_j(mu) / binom(n-1, j).
    """
    mu = np.asarray(mu, dtype=float)
    coefficients = np.poly(-mu)  # prod (X + mu_i), leading 1, then e_1, e_2, ...
    m = mu.size
    return tuple(float(coefficients[j]) / math.comb(m, j) for j in range(1, m + 1))


# ============================================================================
# Monge-Ampere ratio
# ============================================================================

class RatioTerms(NamedTuple):
    """Pieces of the volume ratio on a grid."""

    F: np.ndarray
    noise: np.ndarray       # magnitude of the terms cancelling inside F
    S: np.ndarray           # horizontal determinant factor
    fiber: np.ndarray       # 1 + n z^(n-1) B
    dS_dA: np.ndarray


def ratio_terms(n: int, c: Sequence[float], z: np.ndarray, A: np.ndarray, B: np.ndarray) -> RatioTerms:
    """
    F = -(b + s + b s) with b = n z^(n-1) B and s = S - 1 expanded without the leading 1.

    Raises:
        MetricDegenerationError: where 1 + A/z, 1 + b or S is not positive
    """
    z = np.asarray(z, dtype=float)
    a = np.asarray(A, dtype=float) / z
    b = n * z ** (n - 1) * np.asarray(B, dtype=float)
    _require_positive(1.0 + a, z, "horizontal factor 1 + A/z")
    _require_positive(1.0 + b, z, "fiber factor 1 + n z^(n-1) B")

    log_h = np.log1p(a)
    leading = np.expm1((n - 1) * log_h)
    s = leading.copy()
    noise_s = np.abs(leading)
    dS_da = (n - 1) * np.exp((n - 2) * log_h)
    for j, cj in enumerate(c, start=1):
        if cj == 0.0:
            continue
        weight = math.comb(n - 1, j) * cj * z ** (-j)
        term = weight * np.exp((n - 1 - j) * log_h)
        s += term
        noise_s += np.abs(term)
        if n - 1 - j > 0:
            dS_da += weight * (n - 1 - j) * np.exp((n - 2 - j) * log_h)

    S = 1.0 + s
    _require_positive(S, z, "horizontal determinant factor")
    F = -(b + s + b * s)
    noise = np.abs(b) + noise_s + np.abs(b * s)
    return RatioTerms(F=F, noise=noise, S=S, fiber=1.0 + b, dS_dA=dS_da / z)


def _require_positive(values: np.ndarray, z: np.ndarray, what: str):
    bad = ~(values > 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise MetricDegenerationError(f"{what} not positive at z={z[i]:.6g} (value {values[i]:.3e})",
                                      z=float(z[i]), value=float(values[i]))


def ma_ratio(state: RadialMetricState) -> RadialFunction:
    """F(eta) = 1 - (omega_C + eta)^n / omega_C^n for the radial state."""
    terms = ratio_terms(state.n, state.c, state.z, state.A.values, state.B.values)
    return RadialFunction(grid=state.grid, values=terms.F)


def ma_ratio_terms(state: RadialMetricState) -> RatioTerms:
    return ratio_terms(state.n, state.c, state.z, state.A.values, state.B.values)


def determinant_ratio(n: int, mu: Sequence[float], z: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    Volume ratio from diagonalized forms: horizontal eigenvalues z + A + mu_i
    against z, fiber coefficient (1/(n z^(n-1)) + B) against 1/(n z^(n-1)).
    """
    z = np.asarray(z, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if mu.size != n - 1:
        raise DomainError(f"need n-1 = {n - 1} divisor eigenvalues, got {mu.size}")
    A = np.broadcast_to(np.asarray(A, dtype=float), z.shape)
    B = np.broadcast_to(np.asarray(B, dtype=float), z.shape)
    fiber_model = 1.0 / (n * z ** (n - 1))

    omega = np.zeros(z.shape + (n, n))
    model = np.zeros(z.shape + (n, n))
    for i in range(n - 1):
        omega[..., i, i] = z + A + mu[i]
        model[..., i, i] = z
    omega[..., n - 1, n - 1] = fiber_model + B
    model[..., n - 1, n - 1] = fiber_model
    return np.linalg.det(omega) / np.linalg.det(model)


def F0_leading_sum(state: RadialMetricState) -> RadialFunction:
    """
    sum_{j=1}^{n} (n-j)/(n z^j) c_j, compared against the exact ratio.

    Only the wedge ratios enter; the leading coefficients of both expansions
    are logged side by side.
    """
    n, z = state.n, state.z
    values = np.zeros_like(z)
    for j, cj in enumerate(state.c, start=1):
        values += (n - j) / (n * z ** j) * cj
    exact_leading = -(n - 1) * state.c[0]
    displayed_leading = (n - 1) / n * state.c[0]
    if exact_leading != displayed_leading:
        logger.warning(f"F0 leading coefficient: ratio expansion {exact_leading:.6g}, "
                       f"displayed sum {displayed_leading:.6g}")
    return RadialFunction(grid=state.grid, values=values)


def metric_closeness(state: RadialMetricState) -> RadialFunction:
    """
    |omega - omega_C| measured in omega_C.

    Horizontal eigenvalues of the difference are (A + mu_i)/z, so the sum of
    their squares needs only e_1 = (n-1) c_1 and e_2 = binom(n-1, 2) c_2.
    """
    n, z = state.n, state.z
    A = state.A.values
    e1 = (n - 1) * state.c[0]
    e2 = math.comb(n - 1, 2) * state.c[1] if n > 2 else 0.0
    horizontal = ((n - 1) * A * A + 2.0 * A * e1 + e1 * e1 - 2.0 * e2) / z ** 2
    b = n * z ** (n - 1) * state.B.values
    return RadialFunction(grid=state.grid, values=np.sqrt(np.maximum(horizontal, 0.0) + b * b))


def gradient_norm(u: RadialFunction) -> np.ndarray:
    """|du| in the model metric, |u'| / sqrt(n z^(n-1))."""
    n, z = u.n, u.z
    return np.abs(u.dz()) / np.sqrt(n * z ** (n - 1))


# ============================================================================
# Iteration
# ============================================================================

@dataclass
class IterationResult:
    """F_0..F_m, u_1..u_m and the states between them, with their decay fits."""

    states: List[RadialMetricState]
    F: List[RadialFunction]
    u: List[RadialFunction]
    noise: List[np.ndarray]
    reports: List[DecayReport]
    gradient_reports: List[DecayReport] = field(default_factory=list)
    solve_residuals: List[float] = field(default_factory=list)

    @property
    def final_state(self) -> RadialMetricState:
        return self.states[-1]

    @property
    def exponents(self) -> List[float]:
        return [report.exponent for report in self.reports]

    def decay_table(self) -> Dict[str, np.ndarray]:
        """Columns z, F_0, ..., F_m."""
        table = {"z": self.states[0].z}
        for j, F in enumerate(self.F):
            table[f"F_{j}"] = F.values
        return table


def fit_ratio(F: RadialFunction, noise: np.ndarray, index: Optional[int] = None,
              target: Optional[float] = None, window: Tuple[float, float] = FIT_WINDOW) -> DecayReport:
    """Decay fit of F with the cancellation-aware noise floor."""
    return fit_decay(F.z, F.values, window, index=index, target=target, noise_scale=noise)


def linear_solve_residual(u: RadialFunction, F: RadialFunction) -> float:
    """Relative L2 mismatch between d(u')/dz and n z^(n-1) F on the interior."""
    n, z = u.n, u.z
    f = n * z ** (n - 1) * F.values
    derivative = u.grid.derivatives(u.dz())[0]
    interior, mask = u.grid.restrict(z[2], z[-3])
    scale = interior.integrate(f[mask] ** 2)
    if scale == 0.0:
        return 0.0
    return math.sqrt(interior.integrate((derivative - f)[mask] ** 2) / scale)


def iterate(state0: RadialMetricState, steps: int, window: Tuple[float, float] = FIT_WINDOW,
            gradient_window: Tuple[float, float] = GRADIENT_WINDOW) -> IterationResult:
    """
    F_{j-1} -> u_j with u_j'' = n z^(n-1) F_{j-1} -> state + i dd^c u_j -> F_j.

    Args:
        state0: radial starting state
        steps: number of solves m, at most n + 2
        window: decay-fit window for F_j (target -(j+1))
        gradient_window: fit window for |du_j| (target -j + (n+1)/2)

    Returns:
        IterationResult with m + 1 ratios and m potentials

    Raises:
        MetricDegenerationError, QuadratureError from the underlying steps
    """
    n = state0.n
    if steps < 0 or steps > n + 2:
        raise DomainError(f"steps must lie in [0, n+2] = [0, {n + 2}], got {steps}")

    terms = ma_ratio_terms(state0)
    F = RadialFunction(grid=state0.grid, values=terms.F)
    result = IterationResult(states=[state0], F=[F], u=[], noise=[terms.noise],
                             reports=[_fit_or_degenerate(F, terms.noise, 0, -1.0, window)])
    logger.info(f"F_0 order {result.reports[0].exponent:.3f}")

    state = state0
    for j in range(1, steps + 1):
        u = fiber_mode_solve(n, F, noise_scale=terms.noise)
        result.solve_residuals.append(linear_solve_residual(u, F))
        state = state.with_potential(u)
        terms = ma_ratio_terms(state)
        F = RadialFunction(grid=state.grid, values=terms.F)

        result.u.append(u)
        result.states.append(state)
        result.F.append(F)
        result.noise.append(terms.noise)
        report = _fit_or_degenerate(F, terms.noise, j, -(j + 1.0), window)
        result.reports.append(report)
        result.gradient_reports.append(_gradient_report(u, j, gradient_window))
        logger.info(f"F_{j} order {report.exponent:.3f} (target {-(j + 1)})")

    return result


def ratio_report(state: RadialMetricState, index: Optional[int] = None, target: Optional[float] = None,
                 window: Tuple[float, float] = FIT_WINDOW) -> DecayReport:
    """Decay fit of the ratio F of a state."""
    terms = ma_ratio_terms(state)
    F = RadialFunction(grid=state.grid, values=terms.F)
    return _fit_or_degenerate(F, terms.noise, index, target, window)


def _fit_or_degenerate(F: RadialFunction, noise: np.ndarray, index: Optional[int], target: Optional[float],
                       window: Tuple[float, float]) -> DecayReport:
    if F.is_zero():
        return DecayReport(z_lo=window[0], z_hi=window[1], exponent=float("-inf"), intercept=float("-inf"),
                           residual=0.0, n_points=0, index=index, target=target, degenerate=True)
    return fit_ratio(F, noise, index=index, target=target, window=window)


def _gradient_report(u: RadialFunction, j: int, window: Tuple[float, float]) -> DecayReport:
    n = u.n
    target = -j + 0.5 * (n + 1)
    values = gradient_norm(u)
    if not np.any(values):
        return DecayReport(z_lo=window[0], z_hi=window[1], exponent=float("-inf"), intercept=float("-inf"),
                           residual=0.0, n_points=0, index=j, target=target, degenerate=True)
    return fit_decay(u.z, values, window, index=j, target=target)


# ============================================================================
# Compatibility
# ============================================================================

@dataclass(frozen=True)
class EndIntegral:
    """C = -vol_D * fiber * int F dt over the end, grid part plus power-law tail."""

    value: float
    grid_part: float
    tail_part: float
    tail_order: float


def end_integral(state: RadialMetricState, base_volume: float = 1.0, fiber_normalization: float = 1.0,
                 terms: Optional[RatioTerms] = None) -> EndIntegral:
    """
    Integral of (omega_C + eta)^n - omega_C^n over {z >= z_0}.

    Raises:
        QuadratureError: F does not decay faster than z^(-n)
    """
    n, z = state.n, state.z
    terms = ma_ratio_terms(state) if terms is None else terms
    F = terms.F
    measure = base_volume * fiber_normalization
    if not np.any(F):
        return EndIntegral(value=0.0, grid_part=0.0, tail_part=0.0, tail_order=float("-inf"))

    grid_part = -measure * state.grid.integrate(F * n * z ** (n - 1))
    try:
        report = fit_decay(z, F, noise_scale=terms.noise)
    except FitError as exc:
        raise QuadratureError(f"tail of F could not be modelled: {exc}") from exc
    if report.degenerate:
        return EndIntegral(value=grid_part, grid_part=grid_part, tail_part=0.0, tail_order=float("-inf"))

    K, p = report.coefficient, report.exponent
    if p >= -n:
        raise QuadratureError(f"F is not integrable on the end: fitted order {p:.3f} >= -{n}")
    tail_part = measure * n * K * z[-1] ** (n + p) / (n + p)
    logger.debug(f"end integral: grid {grid_part:.6e}, tail {tail_part:.3e} (order {p:.3f})")
    return EndIntegral(value=grid_part + tail_part, grid_part=grid_part, tail_part=tail_part, tail_order=p)


def solve_compatibility(C: float, base_volume: float, fiber_normalization: float = 1.0) -> float:
    """Root of lambda * vol_D * fiber + C = 0."""
    measure = base_volume * fiber_normalization
    if measure <= 0:
        raise DomainError(f"divisor volume must be positive, got {measure}")
    return -C / measure


def compatibility_lambda(state: RadialMetricState, base_volume: float = 1.0,
                         fiber_normalization: float = 1.0) -> float:
    """Coefficient lambda of lambda*z that cancels the end integral."""
    integral = end_integral(state, base_volume, fiber_normalization)
    lam = solve_compatibility(integral.value, base_volume, fiber_normalization)
    logger.info(f"compatibility: C={integral.value:.6e}, lambda={lam:.6e}")
    return lam


def wedge_primitive(n: int, c: Sequence[float], X: np.ndarray) -> np.ndarray:
    """
    H(X) = sum_j binom(n-1, j) n/(n-j) X^(n-j) c_j, so that d H(z + A)/dt is the
    volume ratio of the state.
    """
    X = np.asarray(X, dtype=float)
    total = X ** n
    for j, cj in enumerate(c, start=1):
        total = total + math.comb(n - 1, j) * n / (n - j) * X ** (n - j) * cj
    return total


def compatibility_defect(before: RadialMetricState, after: RadialMetricState, base_volume: float = 1.0,
                         fiber_normalization: float = 1.0) -> float:
    """
    End integral of the glued state, net of the inner-edge change of H.

    The linear potential moves the boundary term at z_0; on a closed manifold that
    term is absorbed by the cutoff, so it is added back here.
    """
    n = after.n
    z0 = after.z[0]
    edge = (wedge_primitive(n, after.c, z0 + after.A.values[0])
            - wedge_primitive(n, before.c, z0 + before.A.values[0]))
    measure = base_volume * fiber_normalization
    return end_integral(after, base_volume, fiber_normalization).value + measure * float(edge)


def defect_tolerance(before: RadialMetricState, after: RadialMetricState, base_volume: float = 1.0,
                     fiber_normalization: float = 1.0, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Error budget of compatibility_defect: quadrature and rounding of the grid part and rounding of H at z_0."""
    n, z = after.n, after.z
    eps = float(np.finfo(float).eps)
    terms = ma_ratio_terms(after)
    weight = n * z ** (n - 1)
    grid_part = (cfg.epsrel * after.grid.integrate(np.abs(terms.F) * weight)
                 + eps * after.grid.integrate(terms.noise * weight))
    z0 = after.z[0]
    edge = eps * (abs(float(wedge_primitive(n, after.c, z0 + after.A.values[0])))
                  + abs(float(wedge_primitive(n, before.c, z0 + before.A.values[0]))))
    return base_volume * fiber_normalization * (grid_part + edge) + cfg.epsabs


@dataclass(frozen=True)
class CompatibilitySolve:
    """lambda of the linear equation, its refinement on the measured defect, and the glued state."""

    lam_linear: float
    lam: float
    state: RadialMetricState
    defect: float
    tolerance: float
    steps: int


def refine_compatibility(before: RadialMetricState, lam: float, base_volume: float = 1.0,
                         fiber_normalization: float = 1.0, cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                         max_steps: int = REFINE_STEPS) -> CompatibilitySolve:
    """
    Newton steps lam -= defect / (vol_D * fiber) until the defect is inside its error budget.

    The defect is linear in lambda up to discretization of the end integral, so
    each step contracts it by that relative error.
    """
    measure = base_volume * fiber_normalization
    lam_linear = lam
    after = apply_linear_z(before, lam)
    defect = compatibility_defect(before, after, base_volume, fiber_normalization)
    tolerance = defect_tolerance(before, after, base_volume, fiber_normalization, cfg)
    steps = 0
    while abs(defect) > tolerance and steps < max_steps:
        lam -= defect / measure
        after = apply_linear_z(before, lam)
        defect = compatibility_defect(before, after, base_volume, fiber_normalization)
        tolerance = defect_tolerance(before, after, base_volume, fiber_normalization, cfg)
        steps += 1
        logger.debug(f"compatibility refinement {steps}: lambda={lam:.12e}, defect {defect:.3e}")
    return CompatibilitySolve(lam_linear=lam_linear, lam=lam, state=after, defect=defect,
                              tolerance=tolerance, steps=steps)


def apply_linear_z(state: RadialMetricState, lam: float) -> RadialMetricState:
    """
    State plus i dd^c (lam z): A += lam z^(1-n)/n, B += lam (1/n)(1/n - 1) t^(1/n - 2).

    Raises:
        MetricDegenerationError: the new state loses positivity
    """
    if not math.isfinite(lam):
        raise DomainError(f"lambda must be finite, got {lam}")
    if lam == 0.0:
        return state
    n = state.n
    z, t = state.z, state.grid.t
    A = state.A.values + lam * z ** (1 - n) / n
    B = state.B.values + lam * (1.0 / n) * (1.0 / n - 1.0) * t ** (1.0 / n - 2.0)
    glued = replace(state.with_arrays(A, B), glued_lambda=state.glued_lambda + lam)
    ma_ratio_terms(glued)
    return glued


def final_step(state: RadialMetricState, window: Tuple[float, float] = FIT_WINDOW) -> Tuple[RadialMetricState, DecayReport]:
    """
    One more flat solve after the linear correction.

    Returns:
        (new state, DecayReport of its F with target -(n+2))
    """
    n = state.n
    terms = ma_ratio_terms(state)
    F = RadialFunction(grid=state.grid, values=terms.F)
    if F.is_zero():
        return state, _fit_or_degenerate(F, terms.noise, n + 2, -(n + 2.0), window)
    u = fiber_mode_solve(n, F, noise_scale=terms.noise)
    new_state = state.with_potential(u)
    new_terms = ma_ratio_terms(new_state)
    F_new = RadialFunction(grid=state.grid, values=new_terms.F)
    report = _fit_or_degenerate(F_new, new_terms.noise, n + 2, -(n + 2.0), window)
    logger.info(f"final step: F order {report.exponent:.3f} in z, {report.r_exponent(n):.3f} in r")
    return new_state, report
