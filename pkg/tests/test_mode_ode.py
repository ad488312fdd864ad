import numpy as np
import pytest

from calabi_lab import mode_ode
from calabi_lab.errors import DomainError, QuadratureError
from calabi_lab.mode_ode import (
    brute_force_bvp,
    fiber_mode_solve,
    fundamental_nonzero,
    fundamental_zero,
    green_solve,
    green_solve_nonzero,
    green_solve_zero,
    observed_order,
)
from calabi_lab.model_space import Mode
from calabi_lab.pipeline import _oracle_gap
from calabi_lab.radial import RadialFunction, RadialGrid
from calabi_lab.special_functions import DEFAULT_QUADRATURE


def _exact_solution_source(z):
    # u = 1/z solves u'' - 3z u = 3 z^2 v for this v (n=3, lam=1, j=0)
    return (2.0 * z ** -3.0 - 3.0) / (3.0 * z ** 2)


def test_zero_mode_wronskian():
    pair = fundamental_zero(3, 2.0, 1.0, 5.0)
    z = np.linspace(1.0, 5.0, 9)
    np.testing.assert_allclose(pair.wronskian(z, exact=True), -1.5, rtol=1e-5)
    np.testing.assert_allclose(pair.wronskian(z), -1.5, rtol=1e-5)


@pytest.mark.slow
def test_nonzero_mode_wronskian():
    pair = fundamental_nonzero(3, 2.0, 1, 1.0, 5.0)
    z = np.linspace(1.0, 5.0, 9)
    np.testing.assert_allclose(pair.wronskian(z, exact=True), pair.expected_wronskian, rtol=1e-5)


def test_fundamental_pair_domain():
    with pytest.raises(DomainError):
        fundamental_zero(3, 0.0)
    pair = fundamental_zero(3, 1.0, 1.0, 4.0)
    with pytest.raises(DomainError):
        pair.log_D(5.0)


def test_green_solve_matches_oracle():
    gap, solution = _oracle_gap(3, Mode(lam=4.0, j=0), lambda z: z ** -2.0, -2.0, DEFAULT_QUADRATURE)
    assert gap < 1e-6


def test_green_solve_sign_and_shape():
    solution = green_solve_zero(3, 1.0, lambda z: z ** -2.0, 6.0, order=-2.0)
    assert np.all(solution.u.values < 0)
    assert solution.bound_ratio > 0
    assert np.isfinite(solution.max_residual)


def test_green_solve_tail_is_certified():
    solution = green_solve_zero(3, 1.0, lambda z: z ** -2.0, 6.0, order=-2.0)
    assert solution.bound_report["tail_cut"] > 6.0
    assert solution.bound_report["tail_relative"] <= 10 * DEFAULT_QUADRATURE.tail_rtol
    assert solution.tail_bound <= 10 * (DEFAULT_QUADRATURE.tail_rtol * abs(solution.u.values[-1])
                                        + DEFAULT_QUADRATURE.epsabs)


def test_green_solve_does_not_depend_on_the_domain_end():
    small = RadialGrid.log_uniform(1.0, 6.0, 240, 3)
    near = green_solve_zero(3, 1.0, lambda z: z ** -2.0, 6.0, grid=small, order=-2.0)
    far = green_solve_zero(3, 1.0, lambda z: z ** -2.0, 12.0, grid=small, order=-2.0)
    np.testing.assert_allclose(near.u.values, far.u.values, rtol=1e-10)

    wide = green_solve_zero(3, 1.0, lambda z: z ** -2.0, 9.0, grid=RadialGrid.log_uniform(1.0, 9.0, 360, 3),
                            order=-2.0)
    np.testing.assert_allclose(wide.u(small.z), near.u.values, rtol=1e-5)


def test_green_solve_sampled_source_matches_callable():
    grid = RadialGrid.log_uniform(1.0, 6.0, 240, 3)
    sampled = RadialFunction.from_callable(grid, lambda z: z ** -2.0)
    from_samples = green_solve_zero(3, 1.0, sampled, 6.0, grid=grid, order=-2.0)
    exact = green_solve_zero(3, 1.0, lambda z: z ** -2.0, 6.0, grid=grid, order=-2.0)
    np.testing.assert_allclose(from_samples.u.values, exact.u.values, rtol=1e-6)


def test_uncertifiable_tail_raises(monkeypatch):
    monkeypatch.setattr(mode_ode, "MAX_TAIL_STEPS", 0)
    with pytest.raises(QuadratureError):
        green_solve_zero(3, 1.0, lambda z: z ** -2.0, 6.0, order=-2.0)


def test_green_solve_zero_source():
    solution = green_solve(3, Mode(lam=1.0), lambda z: 0.0 * z, 6.0)
    assert solution.u.is_zero()
    assert solution.tail_bound == 0.0


def test_green_solve_rejects_fiber_mode():
    with pytest.raises(DomainError):
        green_solve(3, Mode(lam=0.0, j=0), lambda z: z ** -2.0, 6.0)


def test_green_solve_grid_beyond_truncation():
    grid = RadialGrid.log_uniform(1.0, 8.0, 50, 3)
    with pytest.raises(DomainError):
        green_solve(3, Mode(lam=1.0), lambda z: z ** -2.0, 6.0, grid=grid)


def test_fiber_mode_slowly_decaying_source():
    grid = RadialGrid.log_uniform(1.0, 50.0, 2000, 3)
    v = RadialFunction.from_callable(grid, lambda z: z ** -4.0)
    u = fiber_mode_solve(3, v, order=-4.0)
    np.testing.assert_allclose(u.first, -3.0 / grid.z, rtol=1e-6)
    np.testing.assert_allclose(u.values, -3.0 * np.log(grid.z), atol=1e-6)


def test_fiber_mode_fast_decaying_source():
    grid = RadialGrid.log_uniform(1.0, 50.0, 2000, 3)
    v = RadialFunction.from_callable(grid, lambda z: z ** -6.0)
    u = fiber_mode_solve(3, v, order=-6.0)
    np.testing.assert_allclose(u.first, -grid.z ** -3.0, rtol=1e-6)
    np.testing.assert_allclose(u.values, 0.5 * grid.z ** -2.0, rtol=1e-5)
    np.testing.assert_allclose(u.second, 3.0 * grid.z ** -4.0, rtol=1e-12)


def test_fiber_mode_zero_source(log_grid):
    u = fiber_mode_solve(3, RadialFunction.zeros(log_grid))
    assert u.is_zero()


def test_oracle_recovers_known_solution():
    u = brute_force_bvp(3, Mode(lam=1.0), _exact_solution_source, (1.0, 3.0), (1.0, 1.0 / 3.0), num=801)
    np.testing.assert_allclose(u.values, 1.0 / u.z, atol=1e-9)


@pytest.mark.parametrize("scheme, expected", [(4, 4.0), (2, 2.0)])
def test_oracle_convergence_order(scheme, expected):
    rate = observed_order(3, Mode(lam=1.0), _exact_solution_source, lambda z: 1.0 / z, (1.0, 3.0),
                          num=101, order=scheme)
    assert abs(rate - expected) < 0.3


def test_oracle_rejects_unknown_scheme():
    with pytest.raises(DomainError):
        brute_force_bvp(3, Mode(lam=1.0), _exact_solution_source, (1.0, 3.0), (1.0, 1.0 / 3.0), order=3)


@pytest.mark.slow
def test_nonzero_mode_matches_oracle():
    gap, _ = _oracle_gap(3, Mode(lam=2.0, j=1), lambda z: z ** -2.0, -2.0, DEFAULT_QUADRATURE)
    assert gap < 1e-6
    with pytest.raises(DomainError):
        green_solve_nonzero(3, 2.0, 0, lambda z: z ** -2.0, 6.0)
