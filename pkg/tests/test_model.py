import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bondgauge.errors import NonFiniteResult
from bondgauge.model import (
    BOUNDARY_THETA,
    DEFAULT_BOX,
    DEFAULT_GRID,
    DEFAULT_MATERIAL,
    TYPICAL_THETA,
    FrequencyGrid,
    MaterialSpec,
    ParameterBox,
    ParameterVector,
    jacobian,
    linearize,
    phase_response,
    phase_rows,
    reflection_coefficient,
)

from oracle_values import PHASE_TYPICAL_DEFAULT_GRID, R_TYPICAL_4MHZ
from oracles import richardson_jacobian

TYP = TYPICAL_THETA.as_array()


def test_parameter_vector_roundtrip_and_validation():
    v = ParameterVector.from_array(TYP)
    assert v == TYPICAL_THETA
    assert np.array_equal(np.asarray(v), TYP)
    with pytest.raises(ValueError):
        ParameterVector(1.0, float("nan"), 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        ParameterVector.from_array([1.0, 2.0])


def test_table_presets():
    assert TYPICAL_THETA.log_k0 == 14.85
    assert TYPICAL_THETA.alpha0 == 8.05e3
    assert BOUNDARY_THETA.alpha0 == pytest.approx(1e4 - 0.1, abs=1e-12)
    assert np.array_equal(DEFAULT_BOX.lower, [10, 0, -3e-5, -100, 0])
    assert np.array_equal(DEFAULT_BOX.upper, [20, 1e4, 3e-5, 100, 1e-4])
    assert DEFAULT_BOX.contains(TYP) and DEFAULT_BOX.contains(BOUNDARY_THETA.as_array())


def test_box_invariants():
    with pytest.raises(ValueError):
        ParameterBox(np.ones(5), np.zeros(5))
    box = DEFAULT_BOX
    assert box.contains(box.lower) and box.contains(box.upper)
    outside = TYP.copy()
    outside[4] = 2e-4
    assert not box.contains(outside)
    assert box.project_qoi(np.eye(5)[0]) == (10.0, 20.0)
    assert box.project_qoi(-np.eye(5)[0]) == (-20.0, -10.0)


def test_material_and_grid_validation():
    with pytest.raises(ValueError):
        MaterialSpec(e1=-1.0)
    with pytest.raises(ValueError):
        FrequencyGrid(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        FrequencyGrid(np.array([1.0, 2.0, 2.0, 3.0, 4.0, 5.0]))
    assert DEFAULT_GRID.n == 100
    assert DEFAULT_GRID.hz[0] == pytest.approx(3.25e6) and DEFAULT_GRID.hz[-1] == pytest.approx(13e6)


def test_reflection_matches_high_precision_oracle():
    r = reflection_coefficient(TYP, 2 * np.pi * 4e6)
    assert abs(r - R_TYPICAL_4MHZ) <= 1e-12 * abs(R_TYPICAL_4MHZ)


def test_rigid_contact_limit():
    theta = TYP.copy()
    theta[0] = 30.0
    omega = 2 * np.pi * 4e6
    m = DEFAULT_MATERIAL
    g1 = m.e1 * omega / m.c_l1
    ka = omega / m.c_l_adh + 1j * theta[1]
    ga = m.e_adh * ka
    c, s = np.cos(ka * theta[4]), np.sin(ka * theta[4])
    rigid = 1j * (g1**2 - ga**2) * s / (2 * g1 * ga * c + 1j * (g1**2 + ga**2) * s)
    r = reflection_coefficient(theta, omega)
    assert abs(abs(r) - abs(rigid)) <= 1e-6 * abs(rigid)


def test_passive_without_attenuation():
    rng = np.random.default_rng(11)
    lo, hi = DEFAULT_BOX.lower, DEFAULT_BOX.upper
    worst = 0.0
    for _ in range(1000):
        theta = lo + (hi - lo) * rng.random(5)
        theta[1] = 0.0
        omega = 2 * np.pi * rng.uniform(1e6, 20e6)
        worst = max(worst, abs(reflection_coefficient(theta, omega)))
    assert worst <= 1 + 1e-9


def test_reflection_rejects_bad_omega_and_degenerate_values():
    with pytest.raises(ValueError):
        reflection_coefficient(TYP, 0.0)
    with pytest.raises(NonFiniteResult):
        reflection_coefficient(np.array([-400.0, 0.0, 0.0, 0.0, 1e-4]), 1e7)


def test_phase_curve_matches_oracle():
    got = phase_response(TYPICAL_THETA)
    assert np.max(np.abs(got - np.array(PHASE_TYPICAL_DEFAULT_GRID))) < 1e-8


def test_phase_is_continuous_along_grid():
    fine = FrequencyGrid.linear_hz(1e6, 40e6, 2000)
    for theta in (TYP, BOUNDARY_THETA.as_array()):
        assert np.max(np.abs(np.diff(phase_response(theta, fine)))) < 180.0


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(-3e-5, 3e-5),
    b=st.floats(-100, 100),
    u=st.lists(st.floats(0.02, 0.98), min_size=3, max_size=3),
)
def test_affine_parameters_enter_exactly(a, b, u):
    lo, hi = DEFAULT_BOX.lower, DEFAULT_BOX.upper
    theta = lo + (hi - lo) * 0.5
    theta[[0, 1, 4]] = lo[[0, 1, 4]] + (hi - lo)[[0, 1, 4]] * np.array(u)
    base = theta.copy()
    base[2:4] = 0.0
    shifted = theta.copy()
    shifted[2:4] = a, b
    diff = phase_response(shifted) - phase_response(base)
    expect = a * DEFAULT_GRID.omegas + b
    np.testing.assert_allclose(diff, expect, rtol=0, atol=1e-10 * (1 + np.abs(expect).max()))


def test_subgrid_consistency():
    idx = np.arange(0, 100, 7)
    full = phase_response(TYP)
    sub = phase_response(TYP, DEFAULT_GRID.subset(idx))
    # unwrapping on the coarser grid may differ by whole turns only
    turns = (sub - full[idx]) / 360.0
    np.testing.assert_allclose(turns, np.round(turns), atol=1e-12)
    np.testing.assert_allclose(turns, turns[0], atol=1e-12)


def test_stacked_rows_match_single_evaluations():
    rng = np.random.default_rng(2)
    rows = DEFAULT_BOX.lower + DEFAULT_BOX.width * rng.uniform(0.05, 0.95, (6, 5))
    stacked = phase_response(rows)
    for row, curve in zip(rows, stacked):
        np.testing.assert_array_equal(curve, phase_response(row))
    raw = phase_rows(rows, DEFAULT_GRID)
    np.testing.assert_allclose(raw + rows[:, 2:3] * DEFAULT_GRID.omegas + rows[:, 3:4], stacked, atol=1e-9)


def test_jacobian_affine_columns_exact():
    k = jacobian(TYP)
    np.testing.assert_allclose(k[:, 3], 1.0, rtol=0, atol=1e-10)
    np.testing.assert_allclose(k[:, 2], DEFAULT_GRID.omegas, rtol=1e-8)


def test_jacobian_stiffness_column_against_richardson():
    k = jacobian(TYP)
    ref = richardson_jacobian(TYP, DEFAULT_GRID, DEFAULT_MATERIAL, scale=DEFAULT_BOX.width)
    np.testing.assert_allclose(k[:, 0], ref[:, 0], rtol=1e-5)


def test_linearization_exact_at_expansion_point():
    rng = np.random.default_rng(5)
    y = phase_response(TYP) + rng.normal(size=100)
    lin = linearize(TYP, y)
    f_hat = phase_response(TYP)
    np.testing.assert_allclose(lin.predict(TYP), f_hat, rtol=1e-10)
    lhs = np.linalg.norm(lin.y_tilde - lin.k_matrix @ TYP)
    rhs = np.linalg.norm(y - f_hat)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_linearization_remainder_is_second_order():
    lin = linearize(TYP, phase_response(TYP))
    direction = np.array([0.05, 50.0, 1e-7, 0.5, 1e-6])
    gaps = []
    for t in (1.0, 0.5, 0.25):
        theta = TYP + t * direction
        gaps.append(np.linalg.norm(lin.predict(theta) - phase_response(theta)))
    assert gaps[0] / gaps[1] >= 3.5 and gaps[1] / gaps[2] >= 3.5


def test_offset_invariant_random_points():
    rng = np.random.default_rng(9)
    for _ in range(100):
        theta = DEFAULT_BOX.lower + DEFAULT_BOX.width * rng.uniform(0.01, 0.99, 5)
        f = phase_response(theta)
        lin = linearize(theta, f)
        np.testing.assert_allclose(lin.offset, f - lin.k_matrix @ theta, rtol=1e-10, atol=1e-9)
