import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mapfe.errors import NonPositiveJacobian, SingularTensor
from mapfe.tensor_kinematics import (
    det3,
    inv3,
    kinematics,
    pull_back_B,
    pull_back_H,
    push_forward_B,
    push_forward_H,
)

finite = st.floats(-0.25, 0.25, allow_nan=False)


def _F(perturbation):
    """I + P with |P_ij| <= 1/4 has |P|_2 <= 3/4 < 1, hence det > 0."""
    return np.eye(3) + perturbation


near_identity = arrays(np.float64, (3, 3), elements=finite).map(_F)


@pytest.mark.parametrize(
    "T, expected",
    [
        (np.eye(3), 1.0),
        (np.diag([2.0, 3.0, 4.0]), 24.0),
        (np.eye(3) + np.outer([1, 0, 0], [0, 1, 0]), 1.0),
    ],
)
def test_det3_examples(T, expected):
    assert det3(T) == pytest.approx(expected, abs=1e-14)


def test_inv3_examples():
    np.testing.assert_array_equal(inv3(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(inv3(np.diag([2.0, 4.0, 5.0])), np.diag([0.5, 0.25, 0.2]), atol=1e-15)


def test_inv3_multiply_back_spd():
    rng = np.random.default_rng(3)
    for _ in range(50):
        M = rng.standard_normal((3, 3))
        T = M @ M.T + 0.1 * np.eye(3)
        np.testing.assert_allclose(T @ inv3(T), np.eye(3), atol=1e-12)


def test_inv3_singular():
    with pytest.raises(SingularTensor):
        inv3(np.diag([1.0, 1.0, 0.0]))


def test_inv3_batched():
    rng = np.random.default_rng(0)
    T = np.eye(3) + 0.2 * rng.standard_normal((4, 5, 3, 3))
    np.testing.assert_allclose(inv3(T), np.linalg.inv(T), rtol=1e-12, atol=1e-13)


def test_kinematics_examples():
    s = kinematics(np.eye(3))
    assert s.J == 1.0 and s.I1bar == pytest.approx(3.0) and s.I2bar == pytest.approx(3.0)
    np.testing.assert_allclose(s.Cbar, np.eye(3))

    r = 1.0 / np.sqrt(2.0)
    s = kinematics(np.diag([2.0, r, r]))
    assert s.J == pytest.approx(1.0, abs=1e-15)
    assert s.I1bar == pytest.approx(5.0, abs=1e-14)

    s = kinematics(2.0 * np.eye(3))
    assert s.J == pytest.approx(8.0)
    np.testing.assert_allclose(s.Fbar, np.eye(3), atol=1e-15)
    assert s.I1bar == pytest.approx(3.0)


def test_kinematics_rejects_inversion():
    with pytest.raises(NonPositiveJacobian):
        kinematics(np.diag([1.0, 1.0, -1.0]))


def test_push_forward_examples():
    np.testing.assert_allclose(push_forward_H(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])
    np.testing.assert_allclose(push_forward_H(np.diag([2.0, 1.0, 1.0]), [1.0, 0.0, 0.0]), [0.5, 0.0, 0.0])
    np.testing.assert_allclose(push_forward_B(np.eye(3), [0.0, 0.0, 1.0]), [0.0, 0.0, 1.0])
    np.testing.assert_allclose(push_forward_B(2.0 * np.eye(3), [1.0, 0.0, 0.0]), [0.25, 0.0, 0.0])


def test_push_forward_B_keeps_divergence_free():
    # an affine map takes a constant reference field to a constant spatial field,
    # and the Piola transform keeps the flux through a mapped surface element
    rng = np.random.default_rng(11)
    F = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
    B = rng.standard_normal(3)
    N = rng.standard_normal(3)
    J = np.linalg.det(F)
    n_da = J * np.linalg.inv(F).T @ N  # Nanson
    assert push_forward_B(F, B) @ n_da == pytest.approx(B @ N, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(near_identity)
def test_isochoric_part_has_unit_determinant(F):
    assert np.linalg.det(kinematics(F).Fbar) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(near_identity, st.floats(0.2, 5.0))
def test_isochoric_invariance_under_dilation(F, c):
    np.testing.assert_allclose(kinematics(c * F).Cbar, kinematics(F).Cbar, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(near_identity)
def test_det_of_inverse(F):
    assert det3(inv3(F)) == pytest.approx(1.0 / det3(F), rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(near_identity, arrays(np.float64, 3, elements=st.floats(-10, 10)))
def test_push_pull_round_trip(F, V):
    np.testing.assert_allclose(pull_back_H(F, push_forward_H(F, V)), V, atol=1e-12 * (1 + np.abs(V).max()))
    np.testing.assert_allclose(pull_back_B(F, push_forward_B(F, V)), V, atol=1e-12 * (1 + np.abs(V).max()))


@settings(max_examples=100, deadline=None)
@given(near_identity)
def test_second_invariant_formula(F):
    s = kinematics(F)
    C = s.Cbar
    assert s.I2bar == pytest.approx(0.5 * (np.trace(C) ** 2 - np.trace(C @ C)), rel=1e-12)
