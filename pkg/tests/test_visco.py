import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mapfe.errors import OutOfRange
from mapfe.visco import (
    QuadPointState,
    advance_branch,
    galpha_params,
    lambda_factor,
    update_internal,
    visco_stress_tangent,
)


@pytest.mark.parametrize(
    "rho, expected",
    [(0.0, (1.0, 1.5, 1.0)), (1.0, (0.5, 0.5, 0.5)), (0.5, (2 / 3, 5 / 6, 2 / 3))],
)
def test_galpha_params(rho, expected):
    ga = galpha_params(rho)
    np.testing.assert_allclose((ga.alpha_f, ga.alpha_m, ga.gamma), expected, rtol=1e-15)


def test_galpha_params_range():
    with pytest.raises(OutOfRange):
        galpha_params(1.5)


def test_lambda_factor_example():
    assert lambda_factor(galpha_params(0.0), 0.1, 0.5) == pytest.approx(0.1 / 0.85, rel=1e-15)


def test_fixed_point():
    C = np.diag([1.2, 0.9, 1.0 / 1.08])
    A, Adot = advance_branch(C, np.zeros((3, 3)), C, C, 0.7, 0.3, galpha_params(0.4))
    np.testing.assert_allclose(A, C, rtol=1e-15)
    np.testing.assert_allclose(Adot, 0.0, atol=1e-15)


def test_single_step_value():
    # 2.0333.../1.0666... for A_n = 2, dA_n = -1, target 1, tau = 1, dt = 0.1
    A, _ = advance_branch(2.0, -1.0, 1.0, 1.0, 1.0, 0.1, galpha_params(0.0))
    assert abs(A - 1.90625) <= 1e-12
    assert abs(A - (1.0 + np.exp(-0.1))) < 2e-3


def surrogate_error(dt, T, rho=0.0, tau=1.0):
    """|A(T) - (1 + e^{-T/tau})| from A(0) = 2 with the consistent initial rate."""
    ga = galpha_params(rho)
    A, Adot = 2.0, -1.0 / tau
    for _ in range(int(round(T / dt))):
        A, Adot = advance_branch(A, Adot, 1.0, 1.0, tau, dt, ga)
    return abs(A - (1.0 + np.exp(-T / tau)))


@pytest.mark.parametrize("T", [2.0, 3.0, 4.0, 5.0])
@pytest.mark.parametrize("rho", [0.0, 0.5])
def test_second_order_final_time_error(T, rho):
    dts = np.array([0.2, 0.1, 0.05, 0.025])
    err = np.array([surrogate_error(dt, T, rho) for dt in dts])
    local = np.diff(np.log(err)) / np.log(0.5)
    assert abs(local[-1] - 2.0) < 0.1
    assert err[-2] / err[-1] == pytest.approx(4.0, rel=0.1)


@pytest.mark.xfail(strict=True, reason="at rho_inf = 0 the error overshoots after the annihilating step (dt/tau = 3: 1, 0, 0.111)")
def test_monotone_decay_rho_zero():
    ga = galpha_params(0.0)
    A, Adot = 1.0, -1.0
    errs = [1.0]
    for _ in range(10):
        A, Adot = advance_branch(A, Adot, 0.0, 0.0, 1.0, 3.0, ga)
        errs.append(abs(A))
    assert np.all(np.diff(errs) <= 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3), st.sampled_from([0.0, 0.5, 1.0]))
def test_error_never_exceeds_initial(ratio, rho):
    ga = galpha_params(rho)
    A, Adot = 1.0, -1.0
    for _ in range(100):
        A, Adot = advance_branch(A, Adot, 0.0, 0.0, 1.0, ratio, ga)
        assert abs(A) <= 1.0 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_symmetry_preserved(seed):
    rng = np.random.default_rng(seed)

    def sym():
        M = rng.standard_normal((3, 3))
        return np.eye(3) + 0.1 * (M + M.T)

    A, Adot = advance_branch(sym(), sym() - np.eye(3), sym(), sym(), rng.uniform(0.1, 5), rng.uniform(0.01, 1), galpha_params(rng.uniform()))
    np.testing.assert_allclose(A, A.T, atol=1e-12)
    np.testing.assert_allclose(Adot, Adot.T, atol=1e-12)


def test_initial_state_and_update_leave_history():
    Cinv = np.broadcast_to(np.diag([1.1, 0.95, 1 / 1.045]), (2, 3, 3, 3))
    qp = QuadPointState.initial((2, 3), [0.5, 2.0])
    np.testing.assert_array_equal(qp.branches[0].A_n, np.broadcast_to(np.eye(3), (2, 3, 3, 3)))
    np.testing.assert_array_equal(qp.branches[1].Adot_n, 0.0)
    A_before = qp.branches[0].A_n.copy()
    update_internal(qp, Cinv, [0.5, 2.0], 0.1, galpha_params())
    np.testing.assert_array_equal(qp.branches[0].A_n, A_before)
    assert qp.branches[0].A_np1.shape == (2, 3, 3, 3)
    qp.commit(Cinv)
    np.testing.assert_array_equal(qp.branches[0].A_n, qp.branches[0].A_np1)


def test_stress_examples():
    sigma, e = visco_stress_tangent(np.eye(3), np.eye(3), 5.0, 0.3, 1.0)
    np.testing.assert_allclose(sigma, 0.0, atol=1e-15)
    assert e.shape == (9, 9)
    C = np.diag([4.0, 1.0, 1.0])
    assert np.einsum("MN,MN->", np.eye(3), C) == 6.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_stress_is_traceless(seed):
    rng = np.random.default_rng(seed)
    F = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
    M = rng.standard_normal((3, 3))
    A = np.eye(3) + 0.1 * (M + M.T)
    sigma, _ = visco_stress_tangent(F, A, 2.0, 0.1, np.linalg.det(F))
    assert abs(np.trace(sigma)) <= 1e-10 * np.linalg.norm(sigma)


def test_branch_relaxes_to_zero_stress():
    F = np.array([[1.2, 0.1, 0.0], [0.0, 0.9, 0.05], [0.0, 0.0, 1.0]])
    J = np.linalg.det(F)
    Cbar_inv = J ** (2 / 3) * np.linalg.inv(F.T @ F)
    ga = galpha_params(0.0)
    A, Adot = np.eye(3), (Cbar_inv - np.eye(3)) / 0.5
    for _ in range(400):
        A, Adot = advance_branch(A, Adot, Cbar_inv, Cbar_inv, 0.5, 0.05, ga)
    sigma, _ = visco_stress_tangent(F, A, 3.0, 0.0, J)
    assert np.abs(sigma).max() < 1e-12
