import numpy as np
import pytest

from calabi_lab.errors import AliasingError, DomainError, SpectralTruncationError
from calabi_lab.radial import RadialGrid
from calabi_lab.spectral_poisson import (
    SpectrumProvider,
    TorusField,
    eigenvalue_at_level,
    laplace_residual,
    project,
    project_all,
    solve_poisson,
    weyl_exponent,
)


@pytest.fixture
def surface():
    return SpectrumProvider(2)


@pytest.fixture
def surface_grid():
    return RadialGrid.log_uniform(1.0, 20.0, 120, 2)


def _power(z):
    return z ** -2.0


def test_lowest_modes_of_the_threefold():
    provider = SpectrumProvider(3)
    assert provider.mode(0).kind == "const"
    for k in range(1, 9):
        mode = provider.mode(k)
        assert (mode.lam, mode.j) == (1.0, 0)
    assert provider.mode(9).level > 1.0
    levels = [mode.level for mode in provider.modes]
    assert levels == sorted(levels)


def test_counting_function():
    levels, counts = SpectrumProvider(3).counting_function(8.0)
    table = dict(zip(levels, counts))
    assert [table[float(level)] for level in range(3, 9)] == [67, 107, 203, 363, 475, 595]


def test_weyl_exponent():
    report = weyl_exponent(SpectrumProvider(3))
    assert abs(report.exponent - 0.4) < 0.08


def test_eigenvalue_at_level():
    provider = SpectrumProvider(3)
    np.testing.assert_allclose(eigenvalue_at_level(provider, 1, z0=2.0), 0.5)
    k = next(mode.index for mode in provider.modes if mode.j != 0)
    mode = provider.mode(k)
    np.testing.assert_allclose(eigenvalue_at_level(provider, k, z0=2.0), mode.lam / 2.0 + 12.0 * mode.j ** 2)


def test_provider_validation():
    with pytest.raises(DomainError):
        SpectrumProvider(1)
    with pytest.raises(DomainError):
        SpectrumProvider(3, resolution=2)
    with pytest.raises(DomainError):
        SpectrumProvider(2).mode(10_000)


def test_basis_is_orthonormal(surface):
    basis = np.array([surface.basis_function(k).ravel() for k in range(len(surface))])
    gram = basis @ basis.T / basis.shape[1]
    np.testing.assert_allclose(gram, np.eye(len(surface)), atol=1e-12)


def test_projection_recovers_the_components(surface, surface_grid):
    field = TorusField.from_modes(surface_grid, surface, {0: _power, 3: lambda z: np.exp(-z)})
    np.testing.assert_allclose(project(field, 0).values, surface_grid.z ** -2.0, rtol=1e-12)
    np.testing.assert_allclose(project(field, 3).values, np.exp(-surface_grid.z), rtol=1e-10, atol=1e-15)
    assert project(field, 5).max_abs() < 1e-13


def test_nyquist_content_is_rejected(surface, surface_grid):
    field = TorusField.from_function(surface_grid, surface, lambda z, angles: np.cos(3 * angles[0]) / z)
    with pytest.raises(AliasingError):
        project(field, 0)


def test_field_shape_is_checked(surface, surface_grid):
    with pytest.raises(DomainError):
        TorusField(grid=surface_grid, provider=surface, values=np.zeros((surface_grid.size, 6)))


def test_poisson_solve_satisfies_the_equation(surface, surface_grid):
    source = TorusField.from_modes(surface_grid, surface, {0: _power, 1: _power})
    solution = solve_poisson(surface, source, truncation=8)
    assert solution.report["active_modes"] == 2
    assert laplace_residual(solution, source)["max_relative"] < 1e-6
    assert solution.report["order_u"].target == 1.0
    assert solution.report["order_centered"].target == -1.0


def test_poisson_threads_do_not_change_the_result(surface, surface_grid):
    source = TorusField.from_modes(surface_grid, surface, {0: _power, 1: _power})
    serial = solve_poisson(surface, source, truncation=8, threads=1)
    parallel = solve_poisson(surface, source, truncation=8, threads=2)
    np.testing.assert_array_equal(serial.u.values, parallel.u.values)


def test_unresolved_source_is_rejected(surface, surface_grid):
    source = TorusField.from_modes(surface_grid, surface, {60: _power})
    with pytest.raises(SpectralTruncationError):
        solve_poisson(surface, source, truncation=64)


def test_projection_preserves_the_energy(surface, surface_grid):
    field = TorusField.from_modes(surface_grid, surface, {0: _power, 3: lambda z: np.exp(-z), 5: lambda z: 1.0 / z})
    energy = sum(p.values ** 2 for p in project_all(field))
    np.testing.assert_allclose(energy, field.mean_square(), rtol=1e-12)


def test_poisson_solve_is_linear(surface, surface_grid):
    first = TorusField.from_modes(surface_grid, surface, {0: _power, 1: _power})
    second = TorusField.from_modes(surface_grid, surface, {1: lambda z: z ** -3.0, 2: _power})
    combined = first.scale(2.0) + second.scale(-0.5)

    expected = (2.0 * solve_poisson(surface, first, truncation=8).u.values
                - 0.5 * solve_poisson(surface, second, truncation=8).u.values)
    actual = solve_poisson(surface, combined, truncation=8).u.values
    np.testing.assert_allclose(actual, expected, atol=1e-8 * np.max(np.abs(expected)))


def test_doubling_the_truncation_changes_nothing(surface, surface_grid):
    source = TorusField.from_modes(surface_grid, surface, {0: _power, 1: _power})
    coarse = solve_poisson(surface, source, truncation=8)
    fine = solve_poisson(surface, source, truncation=16)
    assert fine.report["active_modes"] == coarse.report["active_modes"]
    np.testing.assert_allclose(fine.u.values, coarse.u.values, rtol=1e-12, atol=1e-15)


def test_laplace_residual_detects_a_wrong_solution(surface, surface_grid):
    source = TorusField.from_modes(surface_grid, surface, {0: _power, 1: _power})
    solution = solve_poisson(surface, source, truncation=8)
    good = laplace_residual(solution.u, source)["max_relative"]
    bad = laplace_residual(solution.u.scale(1.01), source)["max_relative"]
    assert bad > 5e-3
    assert bad > 10 * good


def test_declared_order_must_bound_the_source(surface, surface_grid):
    slow = TorusField.from_modes(surface_grid, surface, {0: lambda z: 1.0 / z, 1: lambda z: 1.0 / z})
    with pytest.raises(DomainError, match="declared order"):
        solve_poisson(surface, slow, truncation=8, order=-2.0)
    source = TorusField.from_modes(surface_grid, surface, {0: _power, 1: _power})
    assert abs(solve_poisson(surface, source, truncation=8).report["source_order"] + 2.0) < 0.05
