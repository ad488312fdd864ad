import logging

import numpy as np
import pytest

from calabi_lab.decay_iteration import (
    F0_leading_sum,
    RadialMetricState,
    apply_linear_z,
    compatibility_defect,
    compatibility_lambda,
    defect_tolerance,
    determinant_ratio,
    end_integral,
    final_step,
    iterate,
    ma_ratio,
    metric_closeness,
    ratio_terms,
    refine_compatibility,
    solve_compatibility,
    wedge_primitive,
    wedge_ratios_from_eigenvalues,
)
from calabi_lab.errors import DomainError, MetricDegenerationError
from calabi_lab.radial import RadialFunction, fit_decay


@pytest.fixture(scope="module")
def glued(toy_iteration):
    before = toy_iteration.final_state
    lam = solve_compatibility(end_integral(before).value, 1.0)
    return before, apply_linear_z(before, lam), lam


def test_wedge_ratios_from_eigenvalues():
    np.testing.assert_allclose(wedge_ratios_from_eigenvalues((0.5, 0.1)), (0.3, 0.05), rtol=1e-14)


def test_ratio_matches_determinant(log_grid, rng):
    z = log_grid.z
    A = 0.1 * rng.standard_normal(z.size)
    B = 1e-3 * rng.standard_normal(z.size) / z ** 2
    terms = ratio_terms(3, (0.3, 0.05), z, A, B)
    expected = 1.0 - determinant_ratio(3, (0.5, 0.1), z, A, B)
    np.testing.assert_allclose(terms.F, expected, rtol=1e-10, atol=1e-13)
    assert np.all(terms.noise >= np.abs(terms.F))


def test_initial_ratio_of_the_toy(toy_state):
    z = toy_state.z
    np.testing.assert_allclose(ma_ratio(toy_state).values, -0.6 / z - 0.05 / z ** 2, rtol=1e-12)


def test_flat_state_has_no_ratio(toy_grid):
    flat = RadialMetricState.model(toy_grid)
    assert flat.is_flat()
    assert ma_ratio(flat).is_zero()
    result = iterate(flat, 2)
    assert all(report.degenerate for report in result.reports)


def test_iteration_orders(toy_iteration):
    assert len(toy_iteration.F) == 4
    for report in toy_iteration.reports:
        assert report.within(0.2), report.as_row()
    exponents = toy_iteration.exponents
    for j in range(len(exponents) - 1):
        assert exponents[j + 1] - exponents[j] <= -0.8
    assert max(toy_iteration.solve_residuals) < 1e-8


def test_gradient_orders(toy_iteration):
    for report in toy_iteration.gradient_reports[:2]:
        assert report.target == -report.index + 2.0
        assert report.within(0.2), report.as_row()


def test_decay_table_columns(toy_iteration):
    table = toy_iteration.decay_table()
    assert list(table) == ["z", "F_0", "F_1", "F_2", "F_3"]
    assert all(column.size == 4000 for column in table.values())


def test_steps_out_of_range(toy_state):
    with pytest.raises(DomainError):
        iterate(toy_state, 6)
    with pytest.raises(DomainError):
        iterate(toy_state, -1)


def test_degenerate_state_is_reported(toy_state):
    collapsed = toy_state.with_arrays(-2.0 * toy_state.z, np.zeros(toy_state.z.size))
    with pytest.raises(MetricDegenerationError) as excinfo:
        ma_ratio(collapsed)
    assert excinfo.value.z == pytest.approx(5.0)


def test_wedge_primitive_differentiates_to_the_ratio(toy_iteration):
    state = toy_iteration.states[1]
    H = wedge_primitive(3, state.c, state.z + state.A.values)
    derivative = RadialFunction(grid=state.grid, values=H).dt()
    ratio = 1.0 - ma_ratio(state).values
    np.testing.assert_allclose(derivative[5:-5], ratio[5:-5], rtol=1e-6)


def test_compatibility_cancels_the_end_integral(glued):
    before, after, lam = glued
    assert lam != 0.0
    assert after.glued_lambda == pytest.approx(lam)
    defect = compatibility_defect(before, after)
    assert abs(defect) <= 1e-3 * abs(lam) + 1e-14


def test_linear_correction_accumulates(toy_state):
    assert apply_linear_z(toy_state, 0.0) is toy_state
    twice = apply_linear_z(apply_linear_z(toy_state, 1e-3), 1e-3)
    np.testing.assert_allclose(twice.glued_lambda, 2e-3)
    with pytest.raises(DomainError):
        apply_linear_z(toy_state, float("nan"))


def test_final_step_order(glued):
    _, after, _ = glued
    state, report = final_step(after)
    assert report.exponent <= -5.0 + 0.2
    assert report.r_exponent(3) <= -2.0
    closeness = metric_closeness(state)
    fit = fit_decay(closeness.z, closeness.values, (10.0, 100.0), target=-1.0)
    assert abs(fit.exponent + 1.0) <= 0.2


def test_leading_sum_logs_the_coefficient_mismatch(toy_state, caplog):
    with caplog.at_level(logging.WARNING, logger="calabi_lab.decay_iteration"):
        values = F0_leading_sum(toy_state)
    assert "leading coefficient" in caplog.text
    z = toy_state.z
    np.testing.assert_allclose(values.values, 0.2 / z + 0.05 / (3.0 * z ** 2), rtol=1e-12)


def test_compatibility_lambda_matches_the_manual_solve(glued):
    before, _, lam = glued
    np.testing.assert_allclose(compatibility_lambda(before), lam, rtol=1e-12)
    np.testing.assert_allclose(compatibility_lambda(before, base_volume=2.0), lam, rtol=1e-12)


def test_refinement_stays_inside_the_defect_budget(glued):
    before, _, lam = glued
    solve = refine_compatibility(before, lam)
    assert solve.lam_linear == lam
    assert abs(solve.defect) <= 10 * solve.tolerance
    assert solve.lam == pytest.approx(lam, rel=1e-4)

    wrong = apply_linear_z(before, 1.0005 * lam)
    assert abs(compatibility_defect(before, wrong)) > 10 * defect_tolerance(before, wrong)


def test_refinement_on_the_flat_state(toy_grid):
    flat = RadialMetricState.model(toy_grid)
    solve = refine_compatibility(flat, 0.0)
    assert solve.steps == 0
    assert solve.defect == 0.0
