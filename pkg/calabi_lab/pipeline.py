"""
Experiment runner

Stages are plain functions of (config, context, options) returning their
checks, tables and scalar values. The runner records each outcome in a
RunManifest; a stage whose prerequisites did not pass is skipped.

    iterate -> compatibility -> final -> newton      (the main chain)
    specfun, geometry, wronskian, smoke, mode_solve, poisson   (checks)
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .decay_iteration import (
    REFINE_STEPS,
    end_integral,
    final_step,
    iterate,
    ma_ratio,
    metric_closeness,
    ratio_report,
    refine_compatibility,
    solve_compatibility,
)
from .errors import CalabiLabError, ConvergenceError, DomainError, FitError
from .ma_solver import interior_agreement, newton_solve, phi_decay_report, residual, window_energy
from .mode_ode import brute_force_bvp, fundamental_pair, green_solve
from .model_space import Mode, laplacian_t, volume_growth_exponent
from .radial import RadialFunction, RadialGrid, fit_decay
from .registry import SMOKE_MODES, SMOKE_SOURCES, WRONSKIAN_GRID, parse_source
from .reporting import decay_columns, plot_decay, write_tables
from .settings import ExperimentConfig, RunManifest
from .special_functions import bessel_K, standard_certificates
from .spectral_poisson import (
    SpectrumProvider,
    TorusField,
    laplace_residual,
    solve_poisson,
    weyl_exponent,
)

logger = logging.getLogger(__name__)

CHAIN = ("iterate", "compatibility", "final", "newton")
CHECK_STAGES = ("specfun", "geometry", "wronskian", "smoke", "mode_solve", "poisson")

ORACLE_TOL = 1e-6
WRONSKIAN_TOL = 1e-5
BOUND_SPREAD = 0.2
BOUND_LAMS = (1.0, 2.0, 4.0, 8.0, 16.0)
SMOKE_Z_MAX = 6.0
SMOKE_WINDOW = (1.5, 5.0)
# sup|u| of a power source is a shifted power on a finite grid; the local slope overshoots
POISSON_ORDER_SLACK = 0.5


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: Optional[bool] = None

    def __post_init__(self):
        if self.passed is None:
            self.passed = bool(self.value <= self.threshold)


@dataclass
class StageOutcome:
    checks: List[Check] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    values: Dict[str, float] = field(default_factory=dict)


# ============================================================================
# Main chain
# ============================================================================

def stage_iterate(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    n = config.model.n
    slack = config.iteration.order_slack
    result = iterate(config.initial_state(), config.iteration.steps,
                     tuple(config.grid.fit_window), tuple(config.grid.gradient_window))
    context["iteration"] = result

    outcome = StageOutcome()
    for report in result.reports:
        outcome.checks.append(Check(f"F_{report.index} order", report.exponent, report.target + slack))
    exponents = result.exponents
    for j in range(min(len(exponents) - 1, n)):
        if result.reports[j].degenerate or result.reports[j + 1].degenerate:
            continue
        outcome.checks.append(Check(f"F_{j + 1} improves on F_{j}", exponents[j + 1] - exponents[j], -0.8))
    for report in result.gradient_reports[:2]:
        outcome.checks.append(Check(f"|du_{report.index}| order", report.exponent, report.target + slack))
    for j, value in enumerate(result.solve_residuals, start=1):
        outcome.checks.append(Check(f"u_{j} solve residual", value, 1e-8))

    outcome.tables["decay"] = pd.DataFrame(result.decay_table())
    outcome.tables["decay_reports"] = pd.DataFrame([report.as_row() for report in result.reports])
    outcome.tables["gradient_reports"] = pd.DataFrame([report.as_row() for report in result.gradient_reports])
    outcome.values.update({f"exponent_F_{j}": value for j, value in enumerate(exponents)})
    return outcome


def stage_compatibility(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    n = config.model.n
    params = config.params()
    slack = config.iteration.order_slack
    window = tuple(config.grid.fit_window)
    before = context["iteration"].final_state
    order_before = context["iteration"].reports[-1].exponent

    integral = end_integral(before, params.base_volume, params.fiber_normalization)
    lam_linear = solve_compatibility(integral.value, params.base_volume, params.fiber_normalization)
    solve = refine_compatibility(before, lam_linear, params.base_volume, params.fiber_normalization,
                                 config.quadrature, max_steps=options.get("refine_steps", REFINE_STEPS))
    lam, after, defect = solve.lam, solve.state, solve.defect
    order_after = ratio_report(after, target=-(n + 1.0), window=window).exponent
    context["glued"] = after
    logger.info(f"lambda={lam:.6e}, defect {defect:.3e}, F order {order_before:.3f} -> {order_after:.3f}")

    outcome = StageOutcome()
    outcome.checks.append(Check("end integral after lambda z", abs(defect), 10.0 * solve.tolerance))
    outcome.checks.append(Check("F order after lambda z", order_after, max(order_before, -(n + 1.0)) + slack))
    outcome.tables["compatibility"] = pd.DataFrame([{
        "C": integral.value,
        "grid_part": integral.grid_part,
        "tail_part": integral.tail_part,
        "tail_order": integral.tail_order,
        "lambda_linear": lam_linear,
        "lambda": lam,
        "refine_steps": solve.steps,
        "defect": defect,
        "tolerance": solve.tolerance,
        "order_before": order_before,
        "order_after": order_after,
    }])
    outcome.values.update({"lambda": lam, "C": integral.value, "defect": defect})
    return outcome


def stage_final(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    n = config.model.n
    slack = config.iteration.order_slack
    window = tuple(config.grid.fit_window)
    state, report = final_step(context["glued"], window)
    context["final_state"] = state

    closeness = metric_closeness(state)
    outcome = StageOutcome()
    outcome.checks.append(Check("final F order", report.exponent, -(n + 2.0) + slack))
    if report.degenerate:
        outcome.values["r_exponent"] = float("-inf")
    else:
        outcome.values["r_exponent"] = report.r_exponent(n)
        outcome.checks.append(Check("final F faster than r^-2", report.r_exponent(n), -2.0))
    if not closeness.is_zero():
        closeness_report = fit_decay(closeness.z, closeness.values, window, target=-1.0)
        outcome.checks.append(Check("metric closeness order", abs(closeness_report.exponent + 1.0), slack))
        outcome.values["closeness_exponent"] = closeness_report.exponent

    outcome.values["final_exponent"] = report.exponent
    outcome.tables["final"] = pd.DataFrame({"z": state.z, "F": ma_ratio(state).values,
                                            "closeness": closeness.values})
    return outcome


def stage_newton(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    state = context["final_state"]
    newton = config.newton
    phi, trace = newton_solve(state, newton)
    final_residual = residual(state, phi)

    outcome = StageOutcome()
    outcome.checks.append(Check("max residual", trace.residuals[-1], newton.tol))
    outcome.checks.append(Check("Newton steps", float(trace.iterations), float(newton.max_iter)))
    if trace.iterations == 0:
        outcome.checks.append(Check("phi vanishes", phi.max_abs(), 0.0))
    kappa = trace.contraction_constant()
    if not math.isnan(kappa):
        outcome.checks.append(Check("quadratic contraction", kappa, float("inf"), passed=math.isfinite(kappa)))
        outcome.values["kappa"] = kappa

    outcome.values["energy"] = window_energy(phi, config.params())
    z_top = min(2.0 * newton.z_max, float(state.z[-1]))
    if z_top > newton.z_max:
        try:
            agreement = interior_agreement(state, newton, (newton.z_max, z_top))
            outcome.values["interior_relative_difference"] = agreement["relative"]
        except ConvergenceError as exc:
            logger.warning(f"interior agreement skipped: {exc}")
    try:
        decay = phi_decay_report(phi)
        outcome.values["phi_exponent"] = decay.potential.exponent
        outcome.values["ddbar_phi_exponent"] = decay.hessian.exponent
    except FitError as exc:
        logger.warning(f"phi decay not fitted: {exc}")

    outcome.tables["newton_trace"] = pd.DataFrame(trace.as_rows())
    outcome.tables["newton_solution"] = pd.DataFrame({"z": phi.z, "phi": phi.values,
                                                      "residual": final_residual.values})
    return outcome


# ============================================================================
# Checks
# ============================================================================

def stage_specfun(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    outcome = StageOutcome()
    certificates = standard_certificates(cfg=config.quadrature)
    rows = []
    for certificate in certificates:
        rows.extend(certificate.rows)
        outcome.checks.append(Check(f"{certificate.function}[{certificate.parameter}] envelope",
                                    certificate.constant, certificate.limit, passed=certificate.passed))
    closed_form = math.sqrt(0.5 * math.pi) * math.exp(-1.0)
    error = abs(bessel_K(0.5, 1.0, config.quadrature) - closed_form) / closed_form
    outcome.checks.append(Check("K_1/2(1) closed form", error, 1e-10))
    outcome.tables["specfun"] = pd.DataFrame(rows)
    return outcome


def stage_geometry(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    params = config.params()
    n = params.n
    outcome = StageOutcome()

    grid = RadialGrid.log_uniform(1.0, 20.0, 400, n)
    linear = RadialFunction(grid=grid, values=grid.z, first=np.ones(grid.size), second=np.zeros(grid.size))
    outcome.checks.append(Check("Laplacian of z", float(np.max(np.abs(laplacian_t(params, linear).values))), 1e-10))

    growth = volume_growth_exponent(params)
    outcome.checks.append(Check("volume growth exponent", abs(growth.exponent - growth.target), 0.05))

    provider = SpectrumProvider(n, config.spectral.z0, config.spectral.resolution)
    weyl = weyl_exponent(provider, tuple(config.spectral.weyl_window))
    outcome.checks.append(Check("Weyl exponent", abs(weyl.exponent - weyl.target), 0.08))
    outcome.values.update({"volume_exponent": growth.exponent, "weyl_exponent": weyl.exponent})
    return outcome


def stage_wronskian(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    n = WRONSKIAN_GRID["n"]
    z_lo, z_hi = WRONSKIAN_GRID["z_range"]
    samples = np.linspace(z_lo, z_hi, 9)
    modes = [Mode(lam=lam, j=0) for lam in WRONSKIAN_GRID["lams"]]
    modes += [Mode(lam=lam, j=j) for lam in WRONSKIAN_GRID["lams"] for j in WRONSKIAN_GRID["js"]]

    outcome = StageOutcome()
    for mode in modes:
        pair = fundamental_pair(n, mode, z_lo, z_hi, config.quadrature)
        values = pair.wronskian(samples, exact=True)
        drift = float(np.max(np.abs(values / pair.expected_wronskian - 1.0)))
        outcome.checks.append(Check(f"Wronskian lam={mode.lam:g} j={mode.j}", drift, WRONSKIAN_TOL))
    return outcome


def _oracle_gap(n: int, mode: Mode, func, order: Optional[float], cfg,
                z_max: float = SMOKE_Z_MAX) -> Tuple[float, object]:
    """Relative sup gap between the Green solve and the Dirichlet oracle on [1.5, z_max - 1]."""
    lo, hi = SMOKE_WINDOW[0], z_max - (SMOKE_Z_MAX - SMOKE_WINDOW[1])
    if hi <= lo + 0.5:
        raise DomainError(f"z_max={z_max:g} leaves no room for the oracle window")
    grid = RadialGrid.log_uniform(1.0, z_max, 240, n)
    solution = green_solve(n, mode, func, z_max, grid=grid, order=order, cfg=cfg)
    boundary = (float(solution.u(lo)), float(solution.u(hi)))
    oracle = brute_force_bvp(n, mode, func, (lo, hi), boundary)
    inside = grid.window(lo, hi)
    z = grid.z[inside]
    gap = np.max(np.abs(solution.u.values[inside] - oracle(z))) / np.max(np.abs(solution.u.values[inside]))
    return float(gap), solution


def stage_smoke(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    n = config.model.n
    cfg = config.quadrature
    outcome = StageOutcome()

    for branch, modes in SMOKE_MODES.items():
        for entry in modes:
            mode = Mode(**entry)
            for name, source in SMOKE_SOURCES.items():
                gap, _ = _oracle_gap(n, mode, source["func"], source["order"], cfg)
                outcome.checks.append(Check(f"{branch} {mode.lam:g},{mode.j} {name} vs oracle", gap, ORACLE_TOL))

    func, order = parse_source("z^-2")
    zero_ratios = [_bound_ratio(n, Mode(lam=lam, j=0), func, order, cfg) for lam in BOUND_LAMS]
    outcome.checks.append(_spread_check("zero-mode bound shape", zero_ratios))
    for j in (1, 2, 3):
        ratios = [_bound_ratio(n, Mode(lam=lam, j=j), func, order, cfg) for lam in BOUND_LAMS]
        outcome.checks.append(_spread_check(f"j={j} bound shape", ratios))
    return outcome


def _bound_ratio(n: int, mode: Mode, func, order: float, cfg) -> float:
    return green_solve(n, mode, func, SMOKE_Z_MAX, order=order, cfg=cfg).bound_ratio


def _spread_check(name: str, ratios: Sequence[float]) -> Check:
    ratios = np.asarray(ratios)
    centre = float(np.median(ratios))
    spread = float(np.max(np.abs(ratios / centre - 1.0))) if centre > 0 else float("inf")
    return Check(name, spread, BOUND_SPREAD)


def stage_mode_solve(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    n = options.get("n", config.model.n)
    mode = Mode(lam=options.get("lam", 1.0), j=options.get("j", 0))
    func, order = parse_source(options.get("source", "z^-2"))
    gap, solution = _oracle_gap(n, mode, func, order, config.quadrature, options.get("z_max", SMOKE_Z_MAX))

    outcome = StageOutcome()
    outcome.checks.append(Check(f"mode {mode.lam:g},{mode.j} vs oracle", gap, ORACLE_TOL))
    outcome.values.update({"bound_ratio": solution.bound_ratio, "tail_bound": solution.tail_bound})
    outcome.tables["mode_solution"] = pd.DataFrame({"z": solution.u.z, "u": solution.u.values,
                                                    "residual": solution.residual})
    return outcome


def stage_poisson(config: ExperimentConfig, context: Dict, options: Dict) -> StageOutcome:
    n = config.model.n
    spectral = config.spectral
    provider = SpectrumProvider(n, spectral.z0, spectral.resolution)
    grid = RadialGrid.log_uniform(spectral.z_min, spectral.z_max, spectral.num, n)
    func, order = parse_source(options.get("source", "z^-2"))
    if order is None:
        raise DomainError("Poisson sources need a declared polynomial order")
    # fiber mode plus the first divisor mode
    source = TorusField.from_modes(grid, provider, {0: func, 1: func})

    solution = solve_poisson(provider, source, spectral.truncation, order=order,
                             threads=config.output.threads, cfg=config.quadrature)
    check = laplace_residual(solution, source)

    outcome = StageOutcome()
    outcome.checks.append(Check("Laplace residual", check["max_relative"], 1e-6))
    for key, target in (("order_u", order + n + 1), ("order_centered", order + 1)):
        report = solution.report[key]
        if report is not None:
            outcome.checks.append(Check(f"{key}", report.exponent, target + POISSON_ORDER_SLACK))
            outcome.values[key] = report.exponent

    outcome.tables["poisson"] = pd.DataFrame({
        "z": grid.z,
        "sup_u": solution.u.sup(),
        "sup_centered": solution.centered().sup(),
        "laplace_residual": check["absolute"],
    })
    outcome.tables["poisson_modes"] = pd.DataFrame([{
        "index": c.index,
        "lam": c.mode.lam,
        "j": abs(c.mode.j),
        "level": c.mode.level,
        "v_norm": math.sqrt(grid.integrate(c.v.values ** 2)),
        "u_norm": math.sqrt(grid.integrate(c.u.values ** 2)),
        "bound_ratio": c.diagnostics["bound_ratio"],
        "tail_bound": c.diagnostics["tail_bound"],
        "max_residual": c.diagnostics["max_residual"],
    } for c in solution.coefficients])
    return outcome


def _finite_or_none(value: float) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


StageFunction = Callable[[ExperimentConfig, Dict, Dict], StageOutcome]

STAGES: Dict[str, Tuple[StageFunction, Tuple[str, ...]]] = {
    "iterate": (stage_iterate, ()),
    "compatibility": (stage_compatibility, ("iterate",)),
    "final": (stage_final, ("compatibility",)),
    "newton": (stage_newton, ("final",)),
    "specfun": (stage_specfun, ()),
    "geometry": (stage_geometry, ()),
    "wronskian": (stage_wronskian, ()),
    "smoke": (stage_smoke, ()),
    "mode_solve": (stage_mode_solve, ()),
    "poisson": (stage_poisson, ()),
}


# ============================================================================
# Runner
# ============================================================================

def run_stages(config: ExperimentConfig, names: Sequence[str], out_dir: Optional[Path] = None,
               options: Optional[Dict] = None) -> RunManifest:
    """
    Run stages in order; failures are recorded and dependents skipped.

    Args:
        config: validated experiment configuration
        names: stage names from STAGES, in execution order
        out_dir: when given, every report is written there
        options: per-run extras (mode-solve mode and source)

    Returns:
        RunManifest with per-stage status and the produced tables
    """
    manifest = RunManifest(config_hash=config.config_hash(),
                           decay_columns=decay_columns(config.iteration.steps))
    context: Dict = {}
    options = options or {}
    check_rows = []

    for name in names:
        func, requires = STAGES[name]
        missing = [dep for dep in requires if manifest.stages.get(dep) is None
                   or manifest.stages[dep].status != "passed"]
        if missing:
            manifest.record(name, "skipped", diagnostic=f"prerequisite {', '.join(missing)} did not pass")
            logger.warning(f"stage {name} skipped: {', '.join(missing)} did not pass")
            continue

        logger.info(f"stage {name} started")
        try:
            outcome = func(config, context, options)
        except (CalabiLabError, ValueError) as exc:
            logger.error(f"stage {name} failed: {exc}")
            manifest.record(name, "failed", diagnostic=f"{type(exc).__name__}: {exc}")
            continue

        passed = all(check.passed for check in outcome.checks)
        failing = [check.name for check in outcome.checks if not check.passed]
        manifest.record(name, "passed" if passed else "failed",
                        diagnostic="" if passed else f"failed checks: {', '.join(failing)}",
                        checks={check.name: bool(check.passed) for check in outcome.checks},
                        values={key: _finite_or_none(value) for key, value in outcome.values.items()})
        manifest.tables.update(outcome.tables)
        check_rows.extend({"stage": name, "check": check.name, "value": check.value,
                           "threshold": check.threshold, "pass": bool(check.passed)}
                          for check in outcome.checks)
        logger.info(f"stage {name} {'passed' if passed else 'failed'}")

    if check_rows:
        manifest.tables["checks"] = pd.DataFrame(check_rows)
    if out_dir is not None:
        emit_report(manifest, out_dir, plots=config.output.plots)
    return manifest


def run_pipeline(config: ExperimentConfig, out_dir: Optional[Path] = None) -> RunManifest:
    """iterate -> compatibility lambda -> lambda z -> final step -> Newton."""
    return run_stages(config, CHAIN, out_dir)


def emit_report(manifest: RunManifest, out_dir, plots: bool = True) -> Dict[str, str]:
    """
    Write every documented CSV (header-only when a stage produced nothing),
    the decay plot and manifest.json.

    Raises:
        OSError: the output directory or a file could not be written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = write_tables(manifest.tables, out_dir, manifest.decay_columns)
    if plots and "decay" in manifest.tables:
        path = plot_decay(manifest.tables["decay"], out_dir / "decay.svg")
        if path is not None:
            outputs["decay_plot"] = path.name
    manifest.outputs = outputs
    manifest.save(out_dir / "manifest.json")
    logger.info(f"reports written to {out_dir}")
    return outputs
