"""Generalized-alpha integration of the Maxwell-branch internal variables.

Each branch carries a strain-like tensor ``A`` that relaxes towards the
inverse isochoric right Cauchy-Green tensor::

    dA/dt = (Cbar^{-1} - A) / tau

The update is performed per quadrature point and is written for arrays of
shape ``(..., 3, 3)`` so that a whole element group is advanced at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange
from .tensor_kinematics import IDENTITY


@dataclass(frozen=True)
class GAlphaParams:
    rho_inf: float
    alpha_m: float
    alpha_f: float
    gamma: float


def galpha_params(rho_inf: float = 0.0) -> GAlphaParams:
    if not 0.0 <= rho_inf <= 1.0:
        raise OutOfRange(f"spectral radius must lie in [0, 1], got {rho_inf}")
    alpha_f = 1.0 / (1.0 + rho_inf)
    alpha_m = (3.0 - rho_inf) / (2.0 * (1.0 + rho_inf))
    gamma = 0.5 + alpha_m - alpha_f
    return GAlphaParams(rho_inf, alpha_m, alpha_f, gamma)


def lambda_factor(ga: GAlphaParams, dt: float, tau: float) -> float:
    """gamma*dt / (alpha_f*gamma*dt + alpha_m*tau)."""
    return ga.gamma * dt / (ga.alpha_f * ga.gamma * dt + ga.alpha_m * tau)


@dataclass
class BranchState:
    """History of one Maxwell branch at a set of quadrature points."""

    A_n: np.ndarray
    Adot_n: np.ndarray
    A_np1: np.ndarray = None
    Adot_np1: np.ndarray = None

    def commit(self):
        self.A_n = self.A_np1.copy()
        self.Adot_n = self.Adot_np1.copy()


@dataclass
class QuadPointState:
    """Per-point viscoelastic state: one :class:`BranchState` per branch plus
    the converged ``Cbar^{-1}`` needed for the mid-point interpolation."""

    branches: list = field(default_factory=list)
    Cbar_inv_n: np.ndarray = None

    @classmethod
    def initial(cls, shape, taus, Cbar_inv0=None):
        """A(0) = I and dA/dt(0) from the evolution law at the initial state."""
        shape = tuple(shape)
        C0 = np.broadcast_to(IDENTITY, shape + (3, 3)).copy() if Cbar_inv0 is None else np.array(Cbar_inv0)
        branches = []
        for tau in taus:
            A = np.broadcast_to(IDENTITY, shape + (3, 3)).copy()
            branches.append(BranchState(A, (C0 - A) / tau))
        return cls(branches, C0)

    def commit(self, Cbar_inv_np1):
        for b in self.branches:
            b.commit()
        self.Cbar_inv_n = np.array(Cbar_inv_np1, copy=True)


def advance_branch(A_n, Adot_n, Cbar_inv_n, Cbar_inv_np1, tau, dt, ga: GAlphaParams):
    """Closed-form generalized-alpha step; returns ``(A_{n+1}, Adot_{n+1})``.

    ``Cbar^{-1}`` at the alpha_f level is the linear interpolation of the
    tensors at n and n+1.
    """
    if dt <= 0.0 or tau <= 0.0:
        raise OutOfRange("dt and tau must be positive")
    c = ga.gamma * dt / (ga.alpha_m * tau)
    C_af = ga.alpha_f * Cbar_inv_np1 + (1.0 - ga.alpha_f) * Cbar_inv_n
    rhs = (
        c * C_af
        + (1.0 - (1.0 - ga.alpha_f) * c) * A_n
        - ((ga.gamma - ga.alpha_m) * dt / ga.alpha_m) * Adot_n
    )
    A_np1 = rhs / (1.0 + ga.alpha_f * c)
    Adot_np1 = (A_np1 - A_n) / (ga.gamma * dt) + ((ga.gamma - 1.0) / ga.gamma) * Adot_n
    return A_np1, Adot_np1


def update_internal(qp: QuadPointState, Cbar_inv_np1, taus, dt, ga: GAlphaParams) -> QuadPointState:
    """Fill ``A_np1``/``Adot_np1`` of every branch; the n-level data is untouched."""
    for b, tau in zip(qp.branches, taus):
        b.A_np1, b.Adot_np1 = advance_branch(b.A_n, b.Adot_n, qp.Cbar_inv_n, Cbar_inv_np1, tau, dt, ga)
    return qp


def visco_stress_tangent(F, A, mu_v, Lambda, J):
    """Spatial stress and 9x9 tangent of one Maxwell branch in closed form.

    ``Lambda`` multiplies the algorithmic part; pass ``alpha_f * lambda_factor``
    for the tangent consistent with :func:`advance_branch`.
    """
    F = np.asarray(F, dtype=float)
    A = np.asarray(A, dtype=float)
    J = np.asarray(J, dtype=float)
    FAFt = F @ A @ np.swapaxes(F, -1, -2)
    Ahat = 0.5 * (FAFt + np.swapaxes(FAFt, -1, -2))
    C = np.swapaxes(F, -1, -2) @ F
    I_AC = np.einsum("...MN,...MN->...", A, C)
    d = IDENTITY
    scale = (mu_v * J ** (-5.0 / 3.0))[..., None, None]
    sigma = scale * (Ahat - I_AC[..., None, None] * d / 3.0)

    s4 = scale[..., None, None]
    I_AC4 = I_AC[..., None, None, None, None]
    e = s4 * (
        np.einsum("ik,...jl->...ijkl", d, Ahat)
        - (2.0 / 3.0) * np.einsum("kl,...ij->...ijkl", d, Ahat)
        - (2.0 / 3.0) * np.einsum("ij,...kl->...ijkl", d, Ahat)
        + (2.0 / 9.0) * I_AC4 * np.einsum("ij,kl->ijkl", d, d)
        + (1.0 / 3.0) * I_AC4 * np.einsum("il,jk->ijkl", d, d)
    )
    sym = np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d) - (2.0 / 3.0) * np.einsum("ij,kl->ijkl", d, d)
    e = e - (mu_v * Lambda / J)[..., None, None, None, None] * sym
    return sigma, e.reshape(e.shape[:-4] + (9, 9))
