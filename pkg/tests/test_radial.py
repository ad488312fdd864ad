import numpy as np
import pytest

from calabi_lab.errors import DomainError, FitError
from calabi_lab.radial import DecayReport, RadialFunction, RadialGrid, fit_decay


def test_grid_relates_t_and_z(log_grid):
    np.testing.assert_allclose(log_grid.z ** 3, log_grid.t, rtol=1e-14)
    assert log_grid.is_log_uniform
    assert not log_grid.is_uniform
    assert log_grid.size == 400


def test_grid_rejects_bad_samples():
    with pytest.raises(DomainError):
        RadialGrid(t=np.array([1.0, 3.0, 2.0]), n=3)
    with pytest.raises(DomainError):
        RadialGrid(t=np.array([-1.0, 2.0]), n=3)
    with pytest.raises(DomainError):
        RadialGrid(t=np.array([1.0, 2.0]), n=1)
    with pytest.raises(DomainError):
        RadialGrid.log_uniform(2.0, 1.0, 10, 3)


def test_derivatives_on_log_grid(log_grid):
    z = log_grid.z
    first, second = log_grid.derivatives(z ** 3)
    np.testing.assert_allclose(first, 3 * z ** 2, rtol=1e-6)
    np.testing.assert_allclose(second, 6 * z, rtol=1e-5)


def test_derivatives_on_uniform_grid():
    grid = RadialGrid.uniform(1.0, 3.0, 201, 2)
    z = grid.z
    first, second = grid.derivatives(np.sin(z))
    np.testing.assert_allclose(first, np.cos(z), atol=1e-8)
    np.testing.assert_allclose(second, -np.sin(z), atol=1e-6)


def test_integrate_and_cumulative(log_grid):
    values = log_grid.z ** -2.0
    np.testing.assert_allclose(log_grid.integrate(values), 0.9, rtol=1e-9)
    running = log_grid.cumulative(values)
    assert running[0] == 0.0
    np.testing.assert_allclose(running, 1.0 - 1.0 / log_grid.z, atol=1e-9)


def test_t_derivatives_of_t_itself(log_grid):
    z = log_grid.z
    u = RadialFunction(grid=log_grid, values=z ** 3, first=3 * z ** 2, second=6 * z)
    np.testing.assert_allclose(u.dt(), 1.0, rtol=1e-14)
    np.testing.assert_allclose(u.dtt(), 0.0, atol=1e-14)


def test_attached_derivatives_take_precedence(log_grid):
    u = RadialFunction(grid=log_grid, values=np.zeros(log_grid.size), first=np.ones(log_grid.size))
    np.testing.assert_array_equal(u.dz(), 1.0)
    np.testing.assert_array_equal(u.dzz(), 0.0)


def test_interpolant_is_accurate_between_nodes(log_grid):
    u = RadialFunction.from_callable(log_grid, lambda z: np.exp(-z / 5.0))
    points = np.array([1.2345, 4.321, 9.87])
    np.testing.assert_allclose(u(points), np.exp(-points / 5.0), rtol=1e-9)


def test_arithmetic_and_restrict(log_grid):
    one = RadialFunction.from_callable(log_grid, lambda z: z)
    two = one + one.scale(1.0)
    np.testing.assert_allclose(two.values, 2 * log_grid.z)
    assert (two - two).is_zero()
    part = two.restrict(2.0, 5.0)
    assert part.z[0] >= 2.0 - 1e-12 and part.z[-1] <= 5.0 + 1e-12

    other = RadialFunction.zeros(RadialGrid.log_uniform(1.0, 9.0, 400, 3))
    with pytest.raises(DomainError):
        one + other


def test_fit_decay_recovers_power_law():
    z = np.geomspace(1.0, 100.0, 200)
    report = fit_decay(z, 3.0 * z ** -2.5, (10.0, 100.0), index=2, target=-2.5)
    np.testing.assert_allclose(report.exponent, -2.5, atol=1e-10)
    np.testing.assert_allclose(report.coefficient, 3.0, rtol=1e-9)
    assert report.within()
    np.testing.assert_allclose(report.r_exponent(3), -1.25)
    assert report.as_row()["index"] == 2


def test_fit_decay_sign_follows_the_tail():
    z = np.geomspace(1.0, 100.0, 200)
    report = fit_decay(z, -0.5 / z)
    assert report.coefficient < 0


def test_fit_decay_below_noise_is_degenerate():
    z = np.geomspace(1.0, 100.0, 200)
    values = np.full_like(z, 1e-20)
    report = fit_decay(z, values, noise_scale=np.ones_like(z))
    assert report.degenerate
    assert report.exponent == float("-inf")
    assert report.within(0.0)


def test_fit_decay_short_window_raises():
    z = np.geomspace(1.0, 100.0, 200)
    with pytest.raises(FitError):
        fit_decay(z, z ** -1.0, (50.0, 51.0))


def test_within_checks_upper_bound_only():
    report = DecayReport(z_lo=1, z_hi=2, exponent=-5.0, intercept=0.0, residual=0.0, n_points=30, target=-3.0)
    assert report.within(0.2)
    slow = DecayReport(z_lo=1, z_hi=2, exponent=-2.5, intercept=0.0, residual=0.0, n_points=30, target=-3.0)
    assert not slow.within(0.2)
