"""3x3 tensor algebra, deformation measures and magnetic push-forwards.

Every function accepts a single tensor of shape ``(3, 3)`` or a batch of
shape ``(..., 3, 3)``; vectors are ``(..., 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveJacobian, SingularTensor

SINGULAR_TOL = 1e-14

IDENTITY = np.eye(3)


def det3(T):
    T = np.asarray(T, dtype=float)
    return (
        T[..., 0, 0] * (T[..., 1, 1] * T[..., 2, 2] - T[..., 1, 2] * T[..., 2, 1])
        - T[..., 0, 1] * (T[..., 1, 0] * T[..., 2, 2] - T[..., 1, 2] * T[..., 2, 0])
        + T[..., 0, 2] * (T[..., 1, 0] * T[..., 2, 1] - T[..., 1, 1] * T[..., 2, 0])
    )


def cofactor3(T):
    T = np.asarray(T, dtype=float)
    c = np.empty_like(T)
    c[..., 0, 0] = T[..., 1, 1] * T[..., 2, 2] - T[..., 1, 2] * T[..., 2, 1]
    c[..., 0, 1] = T[..., 1, 2] * T[..., 2, 0] - T[..., 1, 0] * T[..., 2, 2]
    c[..., 0, 2] = T[..., 1, 0] * T[..., 2, 1] - T[..., 1, 1] * T[..., 2, 0]
    c[..., 1, 0] = T[..., 0, 2] * T[..., 2, 1] - T[..., 0, 1] * T[..., 2, 2]
    c[..., 1, 1] = T[..., 0, 0] * T[..., 2, 2] - T[..., 0, 2] * T[..., 2, 0]
    c[..., 1, 2] = T[..., 0, 1] * T[..., 2, 0] - T[..., 0, 0] * T[..., 2, 1]
    c[..., 2, 0] = T[..., 0, 1] * T[..., 1, 2] - T[..., 0, 2] * T[..., 1, 1]
    c[..., 2, 1] = T[..., 0, 2] * T[..., 1, 0] - T[..., 0, 0] * T[..., 1, 2]
    c[..., 2, 2] = T[..., 0, 0] * T[..., 1, 1] - T[..., 0, 1] * T[..., 1, 0]
    return c


def inv3(T):
    """Inverse via the adjugate; raises SingularTensor when |det T| <= 1e-14."""
    T = np.asarray(T, dtype=float)
    d = det3(T)
    if np.any(np.abs(d) <= SINGULAR_TOL):
        raise SingularTensor(f"|det| <= {SINGULAR_TOL:g} (min |det| = {np.min(np.abs(d)):.3e})")
    return np.swapaxes(cofactor3(T), -1, -2) / d[..., None, None]


def _check_jacobian(J):
    if np.any(~(J > 0.0)):
        raise NonPositiveJacobian(f"det(F) must be positive, got min {np.min(J):.6e}")


@dataclass
class DeformationState:
    F: np.ndarray
    J: np.ndarray
    Fbar: np.ndarray
    Cbar: np.ndarray
    Cbar_inv: np.ndarray
    I1bar: np.ndarray
    I2bar: np.ndarray
    F_inv: np.ndarray


def kinematics(F) -> DeformationState:
    F = np.asarray(F, dtype=float)
    J = det3(F)
    _check_jacobian(J)
    F_inv = inv3(F)
    scale = J ** (-1.0 / 3.0)
    Fbar = scale[..., None, None] * F
    Cbar = np.swapaxes(Fbar, -1, -2) @ Fbar
    Finv_bar = F_inv / scale[..., None, None]
    Cbar_inv = Finv_bar @ np.swapaxes(Finv_bar, -1, -2)
    I1bar = np.trace(Cbar, axis1=-2, axis2=-1)
    I2bar = 0.5 * (I1bar**2 - np.einsum("...ij,...ji->...", Cbar, Cbar))
    return DeformationState(F, J, Fbar, Cbar, Cbar_inv, I1bar, I2bar, F_inv)


def push_forward_H(F, H_ref):
    """Spatial magnetic field h = F^{-T} H."""
    F = np.asarray(F, dtype=float)
    _check_jacobian(det3(F))
    return np.einsum("...ji,...j->...i", inv3(F), np.asarray(H_ref, dtype=float))


def pull_back_H(F, h):
    """Inverse of :func:`push_forward_H`: H = F^T h."""
    F = np.asarray(F, dtype=float)
    _check_jacobian(det3(F))
    return np.einsum("...ji,...j->...i", F, np.asarray(h, dtype=float))


def push_forward_B(F, B_ref):
    """Spatial induction b = F B / J."""
    F = np.asarray(F, dtype=float)
    J = det3(F)
    _check_jacobian(J)
    return np.einsum("...ij,...j->...i", F, np.asarray(B_ref, dtype=float)) / J[..., None]


def pull_back_B(F, b):
    F = np.asarray(F, dtype=float)
    J = det3(F)
    _check_jacobian(J)
    return J[..., None] * np.einsum("...ij,...j->...i", inv3(F), np.asarray(b, dtype=float))
