from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from randsplit.flows import (
    RotationFlowSpec,
    TriadFlowSpec,
    field_flow,
    rotation_flow,
    rotation_flow_jacobian,
    shear_matrix,
    shear_times,
    triad_flow,
    triad_flow_with_jacobian,
)
from randsplit.models import EulerModel, interacting_triads

TOP = TriadFlowSpec((0, 2, 4), (0.3, -0.5, 0.2))
ROT = RotationFlowSpec(1, 2, 0)

vec5 = st.lists(st.floats(-1.5, 1.5, allow_nan=False), min_size=5, max_size=5).map(np.array)
times = st.floats(-3, 3, allow_nan=False)


def test_rotation_example():
    y = rotation_flow([1, 1, 0, 0], ROT, math.pi / 2)
    np.testing.assert_allclose(y, [1, 0, -1, 0], atol=1e-15)


def test_rotation_zero_time_is_identity():
    x = np.array([0.3, -0.2, 0.5, 0.1])
    assert np.array_equal(rotation_flow(x, ROT, 0.0), x)
    assert np.array_equal(rotation_flow_jacobian(x, ROT, 0.0), np.eye(4))


@given(vec5, times, times)
def test_rotation_group_law(x, s, t):
    a = rotation_flow(rotation_flow(x, ROT, t), ROT, s)
    b = rotation_flow(x, ROT, s + t)
    np.testing.assert_allclose(a, b, atol=1e-12)


@given(vec5, times, times)
def test_top_group_law(x, s, t):
    a = triad_flow(triad_flow(x, TOP, t), TOP, s)
    b = triad_flow(x, TOP, s + t)
    np.testing.assert_allclose(a, b, atol=1e-8)


@given(vec5, times)
def test_flows_conserve_norm(x, t):
    for y in (rotation_flow(x, ROT, t), triad_flow(x, TOP, t)):
        assert np.dot(y, y) == pytest.approx(np.dot(x, x), rel=1e-9, abs=1e-12)


@given(vec5, times)
def test_top_conserves_weighted_quadratic(x, t):
    # c = (0.3, -0.5, 0.2): sum c_i^-1 ... any w with sum w_i c_i = 0 is conserved
    w = np.zeros(5)
    w[[0, 2, 4]] = (1.0, 1.0, 1.0)
    w2 = np.zeros(5)
    w2[[0, 2, 4]] = (0.5, 0.0, -0.75)  # 0.5*0.3 - 0.75*0.2 = 0
    y = triad_flow(x, TOP, t)
    for ww in (w, w2):
        assert ww @ y**2 == pytest.approx(ww @ x**2, abs=1e-9)


@given(vec5, times)
def test_jacobians_have_unit_determinant(x, t):
    assert np.linalg.det(rotation_flow_jacobian(x, ROT, t)) == pytest.approx(1.0, abs=1e-12)
    _, J = triad_flow_with_jacobian(x, TOP, t)
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-7)


@given(vec5, times)
def test_reversibility(x, t):
    np.testing.assert_allclose(rotation_flow(rotation_flow(x, ROT, t), ROT, -t), x, atol=1e-13)
    np.testing.assert_allclose(triad_flow(triad_flow(x, TOP, t), TOP, -t), x, atol=1e-8)


def test_top_matches_reference_integrator():
    x = np.array([0.7, 0.1, -0.4, 0.2, 0.9])
    t = 2.5

    def rhs(_t, y):
        dy = np.zeros(5)
        dy[0] = 0.3 * y[2] * y[4]
        dy[2] = -0.5 * y[0] * y[4]
        dy[4] = 0.2 * y[0] * y[2]
        return dy

    ref = solve_ivp(rhs, (0, t), x, method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1]
    np.testing.assert_allclose(triad_flow(x, TOP, t), ref, atol=1e-9)


@pytest.mark.parametrize("kind", ["rotation", "top"])
def test_jacobian_finite_differences(kind):
    rng = np.random.default_rng(11)
    for _ in range(10):
        x = rng.uniform(-1, 1, 5)
        t = rng.uniform(-2, 2)
        if kind == "rotation":
            f = lambda z: rotation_flow(z, ROT, t)  # noqa: E731
            J = rotation_flow_jacobian(x, ROT, t)
        else:
            f = lambda z: triad_flow(z, TriadFlowSpec(TOP.indices, TOP.coefs, 1e-12), t)  # noqa: E731
            _, J = triad_flow_with_jacobian(x, TOP, t)
        eps = 1e-6
        fd = np.column_stack([(f(x + eps * e) - f(x - eps * e)) / (2 * eps) for e in np.eye(5)])
        np.testing.assert_allclose(J, fd, rtol=1e-5, atol=1e-7)


def test_joint_state_matches_state_only():
    x = np.array([0.7, 0.1, -0.4, 0.2, 0.9])
    y, _ = triad_flow_with_jacobian(x, TOP, 1.3)
    np.testing.assert_allclose(y, triad_flow(x, TOP, 1.3), atol=1e-9)


def test_shear_identity_closed_form():
    x = np.array([1.0, 1.0, 0.0, 0.0])
    A = shear_matrix(x, ROT)
    for m in range(11):
        J = rotation_flow_jacobian(x, ROT, shear_times(x, ROT, m))
        np.testing.assert_allclose(J, np.eye(4) + m * A, atol=1e-12)
    with pytest.raises(ValueError):
        shear_times(np.array([0.0, 1.0, 0.0, 0.0]), ROT, 1)


def test_spec_validation():
    with pytest.raises(ValueError):
        RotationFlowSpec(1, 1, 0)
    with pytest.raises(ValueError):
        RotationFlowSpec(0, 1, 1)
    with pytest.raises(ValueError):
        TriadFlowSpec((0, 1, 2), (1.0, -1.0, 0.0), tolerance=1e-3)
    with pytest.raises(ValueError):
        TriadFlowSpec((0, 1, 1), (1.0, -1.0, 0.0))


def test_zero_coupling_dispatches_to_rotation():
    m = EulerModel(3)
    hits = 0
    for t in interacting_triads(3):
        if 0 in t.couplings():
            spec = TriadFlowSpec.from_triad(t, "aaa", m.mode_index)
            rot = spec.as_rotation()
            assert rot is not None
            x = np.random.default_rng(hits).standard_normal(m.dimension)
            np.testing.assert_allclose(triad_flow(x, spec, 0.7), rotation_flow(x, rot, 0.7), atol=1e-15)
            hits += 1
    assert hits > 0
    generic = next(t for t in interacting_triads(3) if 0 not in t.couplings())
    assert TriadFlowSpec.from_triad(generic, "bab", m.mode_index).as_rotation() is None


def test_field_flow_agrees_with_model_fields():
    m = EulerModel(3)
    x = m.random_point(np.random.default_rng(5))
    for j in (0, 1, 2, 3, 100, 383):
        y, J = field_flow(x, m.kinds[j], m.idx[j], m.coef[j], 0.4, with_jac=True)
        # short-time consistency with the field itself
        v = m.fields[j].evaluate(x)
        y2 = field_flow(x, m.kinds[j], m.idx[j], m.coef[j], 1e-6)
        np.testing.assert_allclose((y2 - x) / 1e-6, v, atol=1e-6)
        assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-8)
        assert np.dot(y, y) == pytest.approx(np.dot(x, x), rel=1e-12)
