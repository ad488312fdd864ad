"""
Special functions from their integral representations

Modified Bessel functions K_nu and I_nu (and the 1/n-order derivatives),
the Kummer-type functions Psi-flat and Phi-sharp used by the nonzero fiber
modes, the Gamma function, and the Laplace critical points behind the
two-sided envelopes. Large arguments are handled through exponentially
scaled variants:

    K~_nu(y) = e^y K_nu(y),   I~_nu(y) = e^-y I_nu(y)
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .errors import DomainError, QuadratureError

logger = logging.getLogger(__name__)


class QuadratureConfig(BaseModel):
    """Tolerances shared by every quadrature in this module."""

    model_config = ConfigDict(frozen=True)

    epsabs: float = Field(1e-15, gt=0)
    epsrel: float = Field(1e-12, gt=0)
    limit: int = Field(400, gt=0)
    tail_tol: float = Field(1e-17, gt=0)      # dropped tail of infinite ranges
    tail_rtol: float = Field(1e-10, gt=0)     # remainder of cut Green integrals, relative to |u|
    panels: int = Field(1, gt=0)              # initial panel splits, nested quadrature
    max_panels: int = Field(64, gt=0)
    nodes_per_panel: int = Field(24, gt=1)


DEFAULT_QUADRATURE = QuadratureConfig()

K_MIN_ARGUMENT = 0.05


def _quad(func: Callable[[float], float], a: float, b: float, cfg: QuadratureConfig,
          epsabs: Optional[float] = None, points: Optional[Sequence[float]] = None) -> float:
    """scipy quad with IntegrationWarning turned into an accept/reject decision."""
    epsabs = cfg.epsabs if epsabs is None else epsabs
    kwargs = {"epsabs": epsabs, "epsrel": cfg.epsrel, "limit": cfg.limit}
    if points:
        kwargs["points"] = [p for p in points if a < p < b] or None
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(func, a, b, **kwargs)
            return value
        except IntegrationWarning as warning:
            logger.debug(f"quadrature warning on [{a:g}, {b:g}]: {warning}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, abserr = quad(func, a, b, **kwargs)
    if not np.isfinite(value) or abserr > max(100 * epsabs, 1e3 * cfg.epsrel * abs(value)):
        raise QuadratureError(f"quadrature on [{a:g}, {b:g}] did not converge (estimate {value:g}, error {abserr:g})")
    return value


def cosh_tail_cutoff(y: float, nu: float, tol: float) -> float:
    """
    T with int_T^inf e^(-y (cosh t - 1) + |nu| t) dt < tol.

    Bound used: e^(-y (cosh T - 1) + |nu| T) / (y sinh T - |nu|), valid once y sinh T > |nu|.
    """
    nu = abs(nu)
    target = math.log(tol)

    def log_bound(T: float) -> float:
        return -2.0 * y * math.sinh(0.5 * T) ** 2 + nu * T - math.log(y * math.sinh(T) - nu)

    t_lo = math.asinh(2.0 * nu / y + 1e-3)
    if log_bound(t_lo) <= target:
        return t_lo
    t_hi = 2.0 * t_lo + 1.0
    while log_bound(t_hi) > target:
        t_hi *= 2.0
    return brentq(lambda T: log_bound(T) - target, t_lo, t_hi, xtol=1e-10)


# ============================================================================
# Gamma
# ============================================================================

_LANCZOS_G = 7
_LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _lanczos_sum(x: float) -> Tuple[float, float]:
    """(series, t) for Gamma(x + 1) with x >= -0.5."""
    series = _LANCZOS_COEFFICIENTS[0]
    for i, coefficient in enumerate(_LANCZOS_COEFFICIENTS[1:], start=1):
        series += coefficient / (x + i)
    return series, x + _LANCZOS_G + 0.5


def gamma_fn(x: float) -> float:
    """Gamma(x); reflection for x < 1/2, Lanczos (g=7) otherwise."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"Gamma has a pole at {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    series, t = _lanczos_sum(x - 1.0)
    return math.sqrt(2.0 * math.pi) * t ** (x - 0.5) * math.exp(-t) * series


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    x = float(x)
    if x <= 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    if x < 0.5:
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    series, t = _lanczos_sum(x - 1.0)
    return 0.5 * math.log(2.0 * math.pi) + (x - 0.5) * math.log(t) - t + math.log(series)


# ============================================================================
# Modified Bessel functions
# ============================================================================

def bessel_K_scaled(nu: float, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """e^y K_nu(y) = int_0^inf e^(-y (cosh t - 1)) cosh(nu t) dt."""
    if y < K_MIN_ARGUMENT:
        raise DomainError(f"K_nu representation supported for y >= {K_MIN_ARGUMENT}, got {y}")
    T = cosh_tail_cutoff(y, nu, cfg.tail_tol)
    return _quad(lambda t: math.exp(-2.0 * y * math.sinh(0.5 * t) ** 2) * math.cosh(nu * t), 0.0, T, cfg)


def bessel_K(nu: float, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """K_nu(y) from int_0^inf e^(-y cosh t) cosh(nu t) dt."""
    return math.exp(-y) * bessel_K_scaled(nu, y, cfg)


def bessel_I_scaled(nu: float, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """e^-y I_nu(y) from the oscillatory plus exponential-tail representation."""
    if nu <= -1:
        raise DomainError(f"I_nu representation needs nu > -1, got {nu}")
    if y <= 0:
        raise DomainError(f"I_nu needs y > 0, got {y}")
    head = _quad(lambda th: math.exp(-2.0 * y * math.sin(0.5 * th) ** 2) * math.cos(nu * th), 0.0, math.pi, cfg)
    weight = math.sin(nu * math.pi)
    tail = 0.0
    if weight != 0.0:
        T = cosh_tail_cutoff(y, nu, cfg.tail_tol)
        tail = _quad(lambda t: math.exp(-y * (math.cosh(t) + 1.0) - nu * t), 0.0, T, cfg)
    return (head - weight * tail) / math.pi


def bessel_I(nu: float, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    return math.exp(y) * bessel_I_scaled(nu, y, cfg)


def bessel_K_prime_over_n(n: int, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                          scaled: bool = False) -> float:
    """K'_{1/n}(y) = -(K_{(n+1)/n}(y) + K_{(n-1)/n}(y)) / 2 (times e^y when scaled)."""
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    value = -0.5 * (bessel_K_scaled((n + 1) / n, y, cfg) + bessel_K_scaled((n - 1) / n, y, cfg))
    return value if scaled else math.exp(-y) * value


def bessel_I_prime_over_n(n: int, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                          scaled: bool = False) -> float:
    """
    I'_{1/n}(y) from the expansion

        (1/2pi) int_0^pi e^(y cos th) (cos((n+1)th/n) + cos((n-1)th/n)) dth
      + (sin(pi/n)/2pi) int_0^inf e^(-y cosh t) (e^(-(n+1)t/n) + e^((n-1)t/n)) dt
    """
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    if y <= 0:
        raise DomainError(f"I' needs y > 0, got {y}")
    up, down = (n + 1) / n, (n - 1) / n
    head = _quad(
        lambda th: math.exp(-2.0 * y * math.sin(0.5 * th) ** 2) * (math.cos(up * th) + math.cos(down * th)),
        0.0, math.pi, cfg,
    )
    T = cosh_tail_cutoff(y, down, cfg.tail_tol)
    tail = _quad(lambda t: math.exp(-y * (math.cosh(t) + 1.0)) * (math.exp(-up * t) + math.exp(down * t)), 0.0, T, cfg)
    value = (head + math.sin(math.pi / n) * tail) / (2.0 * math.pi)
    return value if scaled else math.exp(y) * value


# ============================================================================
# Kummer-type functions
# ============================================================================

@dataclass(frozen=True)
class KummerParams:
    """alpha = 1 - 1/n and beta = (n-1)/(2n) - lam/(n j) of a nonzero fiber mode."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.a <= 0:
            raise DomainError(f"alpha - beta must be positive, got {self.a}")

    @classmethod
    def from_mode(cls, n: int, lam: float, j: int) -> "KummerParams":
        if j < 1:
            raise DomainError("Kummer parameters need fiber degree j >= 1")
        if lam < 0:
            raise DomainError("lam must be nonnegative")
        return cls(alpha=1.0 - 1.0 / n, beta=(n - 1) / (2.0 * n) - lam / (n * j))

    @property
    def n(self) -> float:
        return 1.0 / (1.0 - self.alpha)

    @property
    def a(self) -> float:
        """alpha - beta, the first Kummer parameter."""
        return self.alpha - self.beta

    @property
    def Q(self) -> float:
        return self.alpha - self.beta - 1.0

    @property
    def gamma_n(self) -> float:
        return 0.5 + 1.0 / self.n


def _gamma_tail_cutoff(a: float, tol: float) -> float:
    """T with int_T^inf e^-s s^(a-1) ds / Gamma(a) < tol (bound 2 T^(a-1) e^-T)."""
    target = math.log(tol) + log_gamma(a)

    def log_bound(T: float) -> float:
        return math.log(2.0) + (a - 1.0) * math.log(T) - T

    t_lo = max(2.0 * (a - 1.0), 1.0)
    if log_bound(t_lo) <= target:
        return t_lo
    t_hi = 2.0 * t_lo
    while log_bound(t_hi) > target:
        t_hi *= 2.0
    return brentq(lambda T: log_bound(T) - target, t_lo, t_hi, xtol=1e-10)


def _log_psi(a: float, beta: float, x: float, cfg: QuadratureConfig) -> float:
    """log of e^(-x) x^(-a) / Gamma(a) * int_0^inf e^-s s^(a-1) (1 + s/x)^(beta-1) ds."""
    T = _gamma_tail_cutoff(a, cfg.tail_tol)
    lg = log_gamma(a)
    if a < 1.0:
        # s = w^(1/a) removes the endpoint singularity
        inv = 1.0 / a
        integral = _quad(lambda w: math.exp(-w ** inv) * (1.0 + w ** inv / x) ** (beta - 1.0),
                         0.0, T ** a, cfg) / a
        log_integral = math.log(integral) - lg
    else:
        peak = a - 1.0

        def integrand(s: float) -> float:
            if s == 0.0:
                return math.exp(-lg) if a == 1.0 else 0.0
            return math.exp(-s + (a - 1.0) * math.log(s) - lg) * (1.0 + s / x) ** (beta - 1.0)

        log_integral = math.log(_quad(integrand, 0.0, T, cfg, points=[peak]))
    return -x - a * math.log(x) + log_integral


def _panel_edges(lo: float, hi: float, splits: int, graded: bool, levels: int = 10) -> np.ndarray:
    """
    Panel edges on [lo, hi], each base panel split into `splits` equal parts.
    Graded base panels halve toward lo = 0.
    """
    if graded:
        base = np.concatenate(([0.0], hi * 0.5 ** np.arange(levels - 1, -1, -1)))
    else:
        base = np.linspace(lo, hi, levels + 1)
    fractions = np.linspace(0.0, 1.0, splits + 1)[:-1]
    inner = (base[:-1, None] + np.diff(base)[:, None] * fractions).ravel()
    return np.append(inner, base[-1])


def _gauss_panels(edges: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(order)
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    return (left + half * (nodes + 1.0)).ravel(), (half * weights).ravel()


def _weighted_I_scaled_sum(nu: float, ys: np.ndarray, weights: np.ndarray, cfg: QuadratureConfig) -> float:
    """sum_i weights_i * e^(-y_i) I_nu(y_i), integrating the weighted sum once."""
    head = _quad(lambda th: float(np.dot(weights, np.exp(-2.0 * ys * math.sin(0.5 * th) ** 2))) * math.cos(nu * th),
                 0.0, math.pi, cfg, epsabs=0.0)
    sine = math.sin(nu * math.pi)
    tail = 0.0
    if sine != 0.0:
        T = cosh_tail_cutoff(float(ys.min()), nu, cfg.tail_tol)
        tail = _quad(lambda t: float(np.dot(weights, np.exp(-ys * (math.cosh(t) + 1.0)))) * math.exp(-nu * t),
                     0.0, T, cfg, epsabs=0.0)
    return (head - sine * tail) / math.pi


def _log_phi(alpha: float, beta: float, x: float, cfg: QuadratureConfig) -> float:
    """
    log Phi-sharp via s = x^2 tau^2:

        Phi = Gamma(alpha)/Gamma(a) x^(1-beta) 2 J,
        J = int_0^inf e^(-x (tau-1)^2) tau^(2c+1) I~_{alpha-1}(2 x tau) dtau,  c = (alpha-1)/2 - beta

    The outer integral uses composite Gauss-Legendre on a window around the
    peak; the panel count doubles until two refinements agree.
    """
    a = alpha - beta
    power = alpha - 2.0 * beta                         # 2c + 1
    centre = 0.5 * (1.0 + math.sqrt(1.0 + 2.0 * power / x))
    width = 1.0 / math.sqrt(2.0 * x + power / centre ** 2)
    lo, hi = centre - 12.0 * width, centre + 12.0 * width
    graded = lo <= 0.0
    stretch = max(1, round(1.0 / (1.0 - alpha))) if (graded and alpha < 1) else 1

    def weighted_sum(splits: int) -> float:
        if graded:
            # tau = w^m flattens the algebraic endpoint behaviour at 0
            w, gw = _gauss_panels(_panel_edges(0.0, hi ** (1.0 / stretch), splits, True), cfg.nodes_per_panel)
            tau = w ** stretch
            gw = gw * stretch * w ** (stretch - 1)
        else:
            tau, gw = _gauss_panels(_panel_edges(lo, hi, splits, False), cfg.nodes_per_panel)
        weights = gw * np.exp(-x * (tau - 1.0) ** 2 + power * np.log(tau))
        return _weighted_I_scaled_sum(alpha - 1.0, 2.0 * x * tau, weights, cfg)

    splits = cfg.panels
    coarse = weighted_sum(splits)
    while True:
        splits *= 2
        if splits > cfg.max_panels:
            raise QuadratureError(f"nested quadrature budget exceeded (alpha={alpha:g}, beta={beta:g}, x={x:g})")
        fine = weighted_sum(splits)
        if abs(fine - coarse) <= 10.0 * cfg.epsrel * abs(fine):
            break
        coarse = fine
    if fine <= 0:
        raise QuadratureError(f"nonpositive Phi-sharp integral at x={x:g}")
    logger.debug(f"Phi-sharp integral converged with {splits} splits at x={x:g}")
    return log_gamma(alpha) - log_gamma(a) + (1.0 - beta) * math.log(x) + math.log(2.0 * fine)


def _check_argument(y: float) -> float:
    if y > -1:
        raise DomainError(f"Kummer representations are used for y <= -1, got {y}")
    return -float(y)


def log_psi_flat(p: KummerParams, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE, shift: int = 0) -> float:
    """log Psi-flat(beta, alpha + shift, y); shift=1 gives the derivative companion."""
    x = _check_argument(y)
    return _log_psi(p.a + shift, p.beta, x, cfg)


def log_phi_sharp(p: KummerParams, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE, shift: int = 0) -> float:
    """log Phi-sharp(beta, alpha + shift, y)."""
    x = _check_argument(y)
    return _log_phi(p.alpha + shift, p.beta, x, cfg)


def psi_flat(p: KummerParams, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """
    Psi-flat(beta, alpha, y) = e^y / Gamma(alpha-beta) int_0^inf e^(ys) s^(alpha-beta-1) (1+s)^(beta-1) ds.

    Args:
        p: Kummer parameters
        y: argument, y <= -1

    Returns:
        positive value (equal to e^y U(alpha-beta, alpha, -y))
    """
    return math.exp(log_psi_flat(p, y, cfg))


def phi_sharp(p: KummerParams, y: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """
    Phi-sharp(beta, alpha, y) = Gamma(alpha)/Gamma(alpha-beta) e^y (-y)^(beta-alpha)
        int_0^inf e^(s/y) s^((alpha-1)/2 - beta) I_{alpha-1}(2 sqrt(s)) ds.
    """
    return math.exp(log_phi_sharp(p, y, cfg))


# ============================================================================
# Laplace critical points and envelopes
# ============================================================================

class LaplaceCritical(NamedTuple):
    t0: float
    u0: float
    F_t0: float
    G_u0: float


def laplace_critical(Q: float, gamma_n: float, y: float) -> LaplaceCritical:
    """
    Critical points of F(t) = y t + Q log(t/(t+1)) and
    G(u) = -u^2 + 2 sqrt(-y) u + (2Q + gamma_n) log u.
    """
    if y >= 0:
        raise DomainError(f"y must be negative, got {y}")
    if Q < 0:
        raise DomainError(f"Q must be nonnegative, got {Q}")
    x = -y
    t0 = 0.5 * (-1.0 + math.sqrt(1.0 + 4.0 * Q / x))
    F_t0 = 0.0 if Q == 0 else y * t0 + Q * math.log(t0 / (t0 + 1.0))
    u0 = 0.5 * math.sqrt(x) * (1.0 + math.sqrt(1.0 + (4.0 * Q + 2.0 * gamma_n) / x))
    G_u0 = -u0 * u0 + 2.0 * math.sqrt(x) * u0 + (2.0 * Q + gamma_n) * math.log(u0)
    return LaplaceCritical(t0=t0, u0=u0, F_t0=F_t0, G_u0=G_u0)


def psi_flat_envelope(p: KummerParams, y: float) -> Tuple[float, float]:
    """(lower shape, upper shape) of Psi-flat; constants C are left to certification."""
    x = -y
    if p.Q <= 1:
        shape = math.exp(y - p.a * math.log(x))
        return shape, shape
    crit = laplace_critical(p.Q, p.gamma_n, y)
    base = y + crit.F_t0 - log_gamma(p.Q + 1.0)
    upper = math.exp(base + 0.25 * math.log(p.Q))
    lower = math.exp(base - (0.25 + 0.5 / p.n) * math.log(p.Q) - math.log(x))
    return lower, upper


def phi_sharp_envelope(p: KummerParams, y: float) -> Tuple[float, float]:
    x = -y
    if p.Q <= 1:
        shape = x ** (-p.beta)
        return shape, shape
    crit = laplace_critical(p.Q, p.gamma_n, y)
    upper = math.exp((2.0 - p.n) / (4.0 * p.n) * math.log(x) + y + crit.G_u0 - log_gamma(p.Q + 1.0))
    return upper * p.Q ** -0.25, upper


def log_product_bound_ratio(n: int, j: int, z: float, Q: float) -> float:
    """
    log of e^(F(t0)+G(u0)) / (j^((n+2)/4n) z^((n+2)/4) e^(j z^n) e^-Q Q^(Q+(n+2)/4n)) at y = -j z^n.
    """
    y = -j * z ** n
    crit = laplace_critical(Q, 0.5 + 1.0 / n, y)
    expo = (n + 2) / (4.0 * n)
    log_shape = expo * math.log(j) + 0.25 * (n + 2) * math.log(z) + j * z ** n - Q + (Q + expo) * math.log(Q)
    return crit.F_t0 + crit.G_u0 - log_shape


@dataclass(frozen=True)
class EnvelopeCertificate:
    """Smallest C with C^-1 lower <= value <= C upper over the sampled arguments."""

    function: str
    parameter: str
    constant: float
    spread: float
    limit: float
    rows: Tuple[dict, ...]

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.constant) and self.constant <= self.limit)


def certify_envelope(
    function: str,
    parameter: str,
    arguments: Iterable[float],
    evaluate: Callable[[float], float],
    envelope: Callable[[float], Tuple[float, float]],
    limit: float,
    upper_constant: Optional[float] = None,
) -> EnvelopeCertificate:
    """
    Evaluate a function on a sample of arguments and report the empirical envelope constant.

    Args:
        upper_constant: when the upper bound holds with a fixed constant (e.g. 1),
            the upper side is checked against it instead of the fitted C
    """
    arguments = list(arguments)
    values = np.array([evaluate(arg) for arg in arguments])
    shapes = np.array([envelope(arg) for arg in arguments])
    lower, upper = shapes[:, 0], shapes[:, 1]
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        constant = float("inf")
    else:
        upper_ratio = np.max(values / upper)
        lower_ratio = np.max(lower / values)
        if upper_constant is not None:
            constant = lower_ratio if upper_ratio <= upper_constant * (1 + 1e-10) else float("inf")
        else:
            constant = float(max(upper_ratio, lower_ratio))
    ratios = values / upper
    spread = float(ratios.max() / ratios.min()) if np.all(ratios > 0) else float("inf")
    c_hi = upper_constant if upper_constant is not None else constant
    rows = tuple(
        {
            "function": function,
            "parameter": parameter,
            "y": float(arg),
            "value": float(val),
            "envelope_lo": float(lo / constant),
            "envelope_hi": float(hi * c_hi),
            "pass": bool(np.isfinite(constant) and constant <= limit),
        }
        for arg, val, lo, hi in zip(arguments, values, lower, upper)
    )
    certificate = EnvelopeCertificate(function=function, parameter=parameter, constant=float(constant),
                                      spread=spread, limit=limit, rows=rows)
    logger.info(f"{function}[{parameter}]: envelope constant {constant:.4g} (limit {limit:g})")
    return certificate


def standard_certificates(
    ns: Sequence[int] = (2, 3, 4),
    y_grid: Optional[np.ndarray] = None,
    kummer_modes: Sequence[Tuple[int, float, int]] = ((3, 0.5, 1), (3, 2.0, 1), (3, 4.0, 2)),
    large_Q: Sequence[float] = (1.0, 4.0, 10.0, 20.0),
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    spread_limit: float = 20.0,
    loose_limit: float = 1e3,
) -> List[EnvelopeCertificate]:
    """Certificates for every two-sided bound of the Bessel and Kummer families."""
    ys = np.geomspace(1.0, 50.0, 24) if y_grid is None else np.asarray(y_grid)
    certificates: List[EnvelopeCertificate] = []

    def decaying(y):
        shape = math.exp(-y) / math.sqrt(y)
        return shape, shape

    def growing(y):
        shape = math.exp(y) / math.sqrt(y)
        return shape, shape

    for n in ns:
        nu = 1.0 / n
        label = f"nu=1/{n}"
        certificates.append(certify_envelope("K", label, ys, lambda y: bessel_K(nu, y, cfg), decaying, spread_limit))
        certificates.append(certify_envelope("I", label, ys, lambda y: bessel_I(nu, y, cfg), growing, spread_limit))
        certificates.append(certify_envelope("-K'", label, ys, lambda y: -bessel_K_prime_over_n(n, y, cfg),
                                             decaying, spread_limit))
        certificates.append(certify_envelope("I'", label, ys, lambda y: bessel_I_prime_over_n(n, y, cfg),
                                             growing, spread_limit))
        small = np.geomspace(1e-3, 1.0, 12)
        certificates.append(certify_envelope("I_small", label, small, lambda y: bessel_I(nu, y, cfg),
                                             lambda y: (y ** nu, y ** nu), spread_limit))

    for n, lam, j in kummer_modes:
        p = KummerParams.from_mode(n, lam, j)
        label = f"n={n},lam={lam:g},j={j},Q={p.Q:.4g}"
        certificates.append(certify_envelope("psi_flat", label, -ys, lambda y: psi_flat(p, y, cfg),
                                             lambda y: psi_flat_envelope(p, y), spread_limit, upper_constant=1.0))
        certificates.append(certify_envelope("phi_sharp", label, -ys, lambda y: phi_sharp(p, y, cfg),
                                             lambda y: phi_sharp_envelope(p, y), spread_limit))

    alpha = 2.0 / 3.0
    for Q in large_Q:
        p = KummerParams(alpha=alpha, beta=alpha - 1.0 - Q)
        label = f"n=3,Q={Q:g}"
        certificates.append(certify_envelope("psi_flat", label, -ys, lambda y: psi_flat(p, y, cfg),
                                             lambda y: psi_flat_envelope(p, y), loose_limit))
        certificates.append(certify_envelope("phi_sharp", label, -ys, lambda y: phi_sharp(p, y, cfg),
                                             lambda y: phi_sharp_envelope(p, y), loose_limit))
    return certificates
