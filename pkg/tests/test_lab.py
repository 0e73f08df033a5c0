import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajaccel.errors import DivergenceError, InvalidConfigError
from trajaccel.lab import (NotARotationError, circular_rotation, composite_rotation_bounds,
                           elliptical_rotation, friedrichs_angle_lines, make_type1, make_type2,
                           make_type3, pd_block_matrix, pd_experiment, pd_leading_block,
                           rotation_orbit, run_linear, type1_experiment, type2_experiment,
                           type3_experiment)


@pytest.mark.parametrize("sigmas", [0.99 * np.array([1, 0.98, 0.9]),
                                    0.99 * np.array([1, 0.98, -0.75])])
def test_type1_eta(sigmas):
    L = make_type1(sigmas, seed=0)
    assert L.predicted.eta == pytest.approx(0.98)
    assert np.allclose(np.sort(np.linalg.eigvalsh(L.M)), np.sort(sigmas))


def test_type1_rejects_bad_order():
    with pytest.raises(InvalidConfigError):
        make_type1([0.5, 0.9])
    with pytest.raises(InvalidConfigError):
        make_type1([0.5, -0.6])


def test_type1_scalar_is_collinear():
    L = make_type1([0.5], seed=0)
    trace = run_linear(L.M, [1.0], 20)
    assert np.all(np.nan_to_num(trace.one_minus_cos[1:]) == 0.0)
    assert type1_experiment(0.5)[2][0].passed


def test_type2_block_and_limit():
    L = make_type2(0.05, 0.99, [0.96 * 0.99], seed=0)
    U = L.basis
    block = (U.T @ L.M @ U)[:2, :2]
    expected = 0.99 * np.array([[math.cos(0.05), math.sin(0.05)], [-math.sin(0.05), math.cos(0.05)]])
    assert np.allclose(block, expected) and L.predicted.limit_cos == pytest.approx(math.cos(0.05))
    assert L.predicted.eta == pytest.approx(0.96)


def test_type2_pure_block_exact_from_second_step():
    L = make_type2(0.4, 0.9, (), seed=1)
    trace = run_linear(L.M, [1.0, 0.3], 30)
    assert np.allclose(trace.cos_theta[1:], math.cos(0.4), atol=1e-12)


def test_type2_quarter_turn():
    L = make_type2(math.pi / 2, 0.9, [0.5], seed=2)
    trace = run_linear(L.M, L.balanced_start(), 300)
    assert abs(trace.cos_theta[-1]) <= 1e-8


def test_type2_rejects_bad_moduli():
    with pytest.raises(InvalidConfigError):
        make_type2(0.1, 1.2)
    with pytest.raises(InvalidConfigError):
        make_type2(0.1, 0.8, [0.9])


def test_type2_experiment_reports_pass():
    checks = type2_experiment(0.05, 0.96)[2]
    assert checks[0].passed
    assert "within 1e-06 of cos(0.05)" in checks[0].line() and checks[0].line().endswith("PASS")


def test_type2_tail_rate():
    psi, eta = 0.3, 0.8
    L = make_type2(psi, 0.99, [eta * 0.99], seed=3)
    trace = run_linear(L.M, L.balanced_start(), 80)
    err = np.abs(trace.cos_theta - math.cos(psi))
    slope = np.polyfit(np.arange(10, 60), np.log(err[10:60]), 1)[0]
    assert slope == pytest.approx(2 * math.log(eta), rel=0.05)


def test_elliptical_rotation_matrix_and_circular_case():
    R, ratio, chi = elliptical_rotation(0.5, 0.3)
    assert np.allclose(R, [[math.cos(0.3), 0.5 * math.sin(0.3)], [-2 * math.sin(0.3), math.cos(0.3)]])
    _, ratio, chi = elliptical_rotation(1.0, 0.3)
    assert ratio == pytest.approx((1.0, 1.0)) and chi == pytest.approx((0.3, 0.3))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.05, 3.0))
def test_ellipse_orbit_inside_intervals(axis_ratio, phi):
    R, ratio, chi = elliptical_rotation(axis_ratio, phi)
    ratios, angles = rotation_orbit(R, np.array([1.0, 0.0]), 2000)
    assert ratios.min() >= ratio[0] - 1e-9 and ratios.max() <= ratio[1] + 1e-9
    assert angles.min() >= chi[0] - 1e-9 and angles.max() <= chi[1] + 1e-9


def test_composite_circular_and_zero_cases():
    assert composite_rotation_bounds(1.0, 0.3, 1.0) == pytest.approx((0.7, 0.7))
    chi = elliptical_rotation(0.5, 0.2)[2]
    assert composite_rotation_bounds(0.0, 0.2, 0.5) == pytest.approx((-chi[1], -chi[0]))


def test_composite_rejects_real_spectrum():
    with pytest.raises(NotARotationError):
        composite_rotation_bounds(1.0, 1.0, 0.01)


def test_type3_structure_and_psi():
    L = make_type3(0.95, 0.75, 0.35, seed=0)
    assert L.geometry["psi"] == pytest.approx(math.pi / 2)
    lo, hi = L.predicted.angle_interval
    assert 0 < lo < hi < math.pi / 2
    assert type3_experiment(0.95, 0.75, 0.35)[2][0].passed


def test_type3_uncoupled_reduces_to_type1():
    L = make_type3(0.9, 0.5, 0.0, seed=0)
    assert L.predicted.angle_interval is None
    assert np.allclose(np.sort(np.linalg.eigvals(L.M).real), [0.5, 0.9])


def test_type3_modulus_assumption():
    with pytest.raises(InvalidConfigError, match="delta\\*tau\\*c\\^2"):
        make_type3(0.5, 0.9, 0.8)


def test_pd_block_identity_and_modulus():
    for check in pd_experiment(0.7, 0.9, 0.5, 1.1):
        assert check.passed
    modulus = pd_leading_block(0.7, 0.9, 0.0, 1.1)[3]
    assert modulus == pytest.approx(1.0)
    with pytest.raises(InvalidConfigError):
        pd_leading_block(1.0, 1.0, 0.5, 1.0)


def test_pd_block_matrix_entries():
    B = pd_block_matrix(0.5, 0.4, 1.0, 1.5)
    assert np.allclose(B, [[1.0, -0.75], [0.6, 1.0 - 2 * 0.4 * 0.5 * 2.25]])


def test_run_linear_zero_map_stops():
    trace = run_linear(np.zeros((2, 2)), [1.0, 2.0], 10)
    assert len(trace.records) == 1


def test_run_linear_divergence():
    with pytest.raises(DivergenceError):
        run_linear(1.5 * np.eye(2), [1.0, 0.0], 200)
    with pytest.raises(InvalidConfigError):
        run_linear(np.eye(2), [1.0, 0.0], 1)


def test_friedrichs_angle_of_lines():
    a = 0.4
    normals = [np.array([0.0, 1.0]), np.array([-math.sin(a), math.cos(a)])]
    assert friedrichs_angle_lines(normals) == pytest.approx(a)


def test_circular_rotation_is_orthogonal():
    R = circular_rotation(0.7)
    assert np.allclose(R @ R.T, np.eye(2)) and np.trace(R) == pytest.approx(2 * math.cos(0.7))
