import math

import numpy as np
import pytest
from pydantic import ValidationError

from calabi_lab.decay_iteration import RadialMetricState
from calabi_lab.errors import ConvergenceError, DomainError
from calabi_lab.ma_solver import (
    ConvergenceTrace,
    NewtonConfig,
    banded_matvec,
    interior_agreement,
    jacobian,
    newton_solve,
    phi_decay_report,
    residual,
    stencils,
    window_energy,
)
from calabi_lab.radial import RadialFunction


def test_stencils_are_exact_on_quadratics():
    x = np.array([0.0, 0.1, 0.3, 0.35, 0.6, 1.0])
    f = 3.0 * x ** 2 - x + 2.0
    ops = stencils(x)
    lower, diag, upper = ops.d1
    np.testing.assert_allclose(lower * f[:-2] + diag * f[1:-1] + upper * f[2:], 6.0 * x[1:-1] - 1.0, rtol=1e-12)
    lower, diag, upper = ops.d2
    np.testing.assert_allclose(lower * f[:-2] + diag * f[1:-1] + upper * f[2:], 6.0, rtol=1e-10)


def test_stencils_are_second_order():
    errors = []
    for num in (41, 81):
        x = np.linspace(0.0, 1.0, num)
        lower, diag, upper = stencils(x).d2
        approx = lower * np.sin(x[:-2]) + diag * np.sin(x[1:-1]) + upper * np.sin(x[2:])
        errors.append(np.max(np.abs(approx + np.sin(x[1:-1]))))
    assert 3.5 < errors[0] / errors[1] < 4.5


def test_jacobian_matches_finite_differences(toy_state, rng):
    state = toy_state.restrict(5.0, 6.0)
    grid = state.grid
    phi = 1e-2 * np.sin(grid.x)
    direction = np.zeros(grid.size)
    direction[1:-1] = rng.standard_normal(grid.size - 2)

    eps = 1e-5
    plus = residual(state, RadialFunction(grid=grid, values=phi + eps * direction)).values
    minus = residual(state, RadialFunction(grid=grid, values=phi - eps * direction)).values
    numeric = (plus - minus)[1:-1] / (2 * eps)
    analytic = banded_matvec(jacobian(state, RadialFunction(grid=grid, values=phi)), direction[1:-1])
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8 * np.max(np.abs(numeric)))


def test_newton_converges_on_the_iterated_state(toy_iteration):
    config = NewtonConfig()
    phi, trace = newton_solve(toy_iteration.final_state, config)
    assert trace.converged
    assert trace.residuals[-1] <= config.tol
    assert 0 < trace.iterations <= config.max_iter
    assert phi.values[0] == 0.0 and phi.values[-1] == 0.0
    assert phi.z[0] == pytest.approx(5.0) and phi.z[-1] <= 50.0
    kappa = trace.contraction_constant()
    assert math.isnan(kappa) or math.isfinite(kappa)
    assert window_energy(phi) > 0
    assert len(trace.as_rows()) == trace.iterations + 1


def test_flat_state_needs_no_steps(toy_grid):
    phi, trace = newton_solve(RadialMetricState.model(toy_grid))
    assert trace.iterations == 0
    assert phi.is_zero()
    assert window_energy(phi) == 0.0
    assert phi_decay_report(phi).potential.degenerate


def test_newton_failure_carries_the_trace(toy_iteration):
    config = NewtonConfig(max_iter=1, tol=1e-30)
    with pytest.raises(ConvergenceError) as excinfo:
        newton_solve(toy_iteration.final_state, config)
    trace = excinfo.value.trace
    assert trace is not None
    assert not trace.converged
    assert trace.residuals


def test_window_outside_the_grid(toy_state):
    with pytest.raises(DomainError):
        newton_solve(toy_state, NewtonConfig(z_min=2.0, z_max=50.0))


def test_newton_config_validation():
    with pytest.raises(ValidationError):
        NewtonConfig(z_min=50.0, z_max=10.0)
    with pytest.raises(ValidationError):
        NewtonConfig(tol=0.0)


def test_residual_against_a_constant_target(toy_grid):
    flat = RadialMetricState.model(toy_grid)
    values = residual(flat, RadialFunction.zeros(toy_grid), target=1.5).values
    np.testing.assert_allclose(values, 0.5)


def test_contraction_constant():
    trace = ConvergenceTrace(residuals=[1.0, 0.05, 1e-3, 1e-6])
    np.testing.assert_allclose(trace.contraction_constant(), 1.0)
    assert math.isnan(ConvergenceTrace(residuals=[1.0, 0.5]).contraction_constant())


def test_newton_recovers_a_manufactured_solution(toy_state):
    config = NewtonConfig(tol=1e-13)
    window = toy_state.restrict(config.z_min, config.z_max)
    x = window.grid.x
    exact = 10.0 * np.sin(np.pi * (x - x[0]) / (x[-1] - x[0]))
    exact[0] = exact[-1] = 0.0
    phi_star = RadialFunction(grid=window.grid, values=exact)
    target = 1.0 - residual(window, phi_star).values

    assert np.max(np.abs(residual(window, phi_star, target).values)) < 1e-15
    phi, trace = newton_solve(toy_state, config, target=target)
    assert trace.converged
    np.testing.assert_allclose(phi.values, exact, atol=1e-3 * np.max(np.abs(exact)))


def test_interior_agreement_between_windows(toy_iteration):
    report = interior_agreement(toy_iteration.final_state, NewtonConfig(), (50.0, 100.0))
    assert (report["z_lo"], report["z_hi"]) == (5.0, 25.0)
    assert report["scale"] > 0
    assert np.isfinite(report["relative"]) and report["max_difference"] >= 0.0
