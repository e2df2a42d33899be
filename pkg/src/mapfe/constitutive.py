"""Strain energies, stresses and consistent tangents at material points.

All derivatives are first formed in the reference configuration
(``P = dPsi/dF``, ``dP/dF``, ``dP/dH``, ``B = -dPsi/dH`` ...) and then pushed
forward to the spatial tensors used by the element kernels:

* ``sigma_eff``  effective Cauchy stress  (1/J) P F^T + p I
* ``e``          (1/J) F_jJ dP_iJ/dF_kL F_lL + p (d_ij d_kl - d_il d_jk)
* ``p_coup``     -(1/J) F_jJ dP_iJ/dH_K F_kK
* ``p_coup_hat`` (1/J) F_iI dB_I/dF_jK F_kK
* ``d_perm``     -(1/J) F_iI dB_I/dH_J F_jJ

Arrays carry arbitrary leading batch dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GentLockingLimit, OutOfRange, ZeroCurvature
from .tensor_kinematics import IDENTITY, DeformationState, kinematics
from .visco import GAlphaParams, QuadPointState, advance_branch, lambda_factor

NEOHOOKEAN = "neohookean"
GENT = "gent"
MAGNETIC_NONE = "none"
MAGNETIC_HARD = "hard"
MAGNETIC_SOFT = "soft"

# fraction of I_m at which the Gent log argument is considered locked
GENT_GUARD = 0.999

MU0_DEFAULT = 1.2566

_d = IDENTITY


@dataclass
class MaterialSpec:
    hyper_model: str = NEOHOOKEAN
    mu: float = 1.0
    Im: float = np.inf
    incompressible: bool = True
    kappa: float = 0.0
    maxwell_branches: list = field(default_factory=list)  # [(mu_v, tau), ...]
    mu0: float = MU0_DEFAULT
    magnetic_mode: str = MAGNETIC_NONE
    Br: tuple = (0.0, 0.0, 0.0)
    alpha: float = -0.5
    beta: float = -4.0
    eta: float = -0.5

    def __post_init__(self):
        self.hyper_model = self.hyper_model.lower()
        self.magnetic_mode = self.magnetic_mode.lower()
        if self.hyper_model not in (NEOHOOKEAN, GENT):
            raise ValueError(f"unknown hyperelastic model {self.hyper_model!r}")
        if self.magnetic_mode not in (MAGNETIC_NONE, MAGNETIC_HARD, MAGNETIC_SOFT):
            raise ValueError(f"unknown magnetic mode {self.magnetic_mode!r}")
        if not self.mu > 0:
            raise OutOfRange("mu must be positive")
        if self.hyper_model == GENT and not self.Im > 0:
            raise OutOfRange("Im must be positive for the Gent model")
        if not self.incompressible and not self.kappa > 0:
            raise OutOfRange("kappa must be positive for compressible materials")
        if not self.mu0 > 0:
            raise OutOfRange("mu0 must be positive")
        self.maxwell_branches = [(float(m), float(t)) for m, t in self.maxwell_branches]
        for mu_v, tau in self.maxwell_branches:
            if mu_v < 0 or not tau > 0:
                raise OutOfRange("Maxwell branches need mu_v >= 0 and tau > 0")
        self.Br = tuple(float(b) for b in self.Br)

    @property
    def taus(self):
        return [t for _, t in self.maxwell_branches]

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "maxwell_branches" in d:
            d["maxwell_branches"] = [tuple(b) for b in d["maxwell_branches"]]
        return cls(**d)

    def to_dict(self):
        out = dict(self.__dict__)
        out["maxwell_branches"] = [list(b) for b in self.maxwell_branches]
        out["Br"] = list(self.Br)
        return out


@dataclass
class StressTangent:
    energy: np.ndarray
    P: np.ndarray
    sigma_eff: np.ndarray
    e: np.ndarray
    J: np.ndarray
    Cbar_inv: np.ndarray
    B_ref: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    p_coup: Optional[np.ndarray] = None
    p_coup_hat: Optional[np.ndarray] = None
    d_perm: Optional[np.ndarray] = None
    A_np1: list = field(default_factory=list)
    Adot_np1: list = field(default_factory=list)

    @property
    def e_mat(self):
        return self.e.reshape(self.e.shape[:-4] + (9, 9))

    @property
    def p_mat(self):
        return None if self.p_coup is None else self.p_coup.reshape(self.p_coup.shape[:-3] + (9, 3))

    @property
    def p_hat_mat(self):
        return None if self.p_coup_hat is None else self.p_coup_hat.reshape(self.p_coup_hat.shape[:-3] + (3, 9))


# ---------------------------------------------------------------------------
# reference-configuration building blocks


def _jdet_power(J, a):
    return J**a


def _isochoric_trace(F, Finv, J, A=None):
    """Value, dF and dFdF of J^{-2/3} A:C for fixed symmetric A (A=I gives I1bar)."""
    g = J ** (-2.0 / 3.0)
    FA = F if A is None else F @ A
    AC = np.einsum("...iJ,...iJ->...", FA, F)
    val = g * AC
    bracket = FA - (AC / 3.0)[..., None, None] * np.swapaxes(Finv, -1, -2)
    P = 2.0 * g[..., None, None] * bracket
    Aeff = np.broadcast_to(_d, F.shape) if A is None else A
    g4 = g[..., None, None, None, None]
    AC4 = AC[..., None, None, None, None]
    AA = 2.0 * (
        -(2.0 / 3.0) * g4 * np.einsum("...Lk,...iJ->...iJkL", Finv, bracket)
        + g4
        * (
            np.einsum("ik,...LJ->...iJkL", _d, Aeff)
            - (2.0 / 3.0) * np.einsum("...kL,...Ji->...iJkL", FA, Finv)
            + (AC4 / 3.0) * np.einsum("...Jk,...Li->...iJkL", Finv, Finv)
        )
    )
    return val, P, AA


def _term_FH(F, Finv, J, H, a):
    """val = J^a |F H|^2 and its F/H derivatives.

    Returns (val, dval/dH, d2val/dH2, d(dval/dH)_I/dF_jK, P, AA, dP/dH).
    """
    Ja = J**a
    q = np.einsum("...iM,...M->...i", F, H)
    C = np.swapaxes(F, -1, -2) @ F
    CH = np.einsum("...IM,...M->...I", C, H)
    qq = np.einsum("...i,...i->...", q, q)
    Ja1, Ja2, Ja3, Ja4 = Ja, Ja[..., None], Ja[..., None, None], Ja[..., None, None, None]
    val = Ja1 * qq
    dH = 2.0 * Ja2 * CH
    dHH = 2.0 * Ja3 * C
    dHdF = 2.0 * (
        a * Ja4 * np.einsum("...Kj,...I->...IjK", Finv, CH)
        + Ja4 * (np.einsum("IK,...j->...IjK", _d, q) + np.einsum("...jI,...K->...IjK", F, H))
    )
    inner = a * qq[..., None, None] * np.swapaxes(Finv, -1, -2) + 2.0 * np.einsum("...i,...J->...iJ", q, H)
    P = Ja3 * inner
    qq4 = qq[..., None, None, None, None]
    AA = a * Ja[..., None, None, None, None] * np.einsum("...Lk,...iJ->...iJkL", Finv, inner) + Ja[
        ..., None, None, None, None
    ] * (
        2.0 * a * np.einsum("...k,...L,...Ji->...iJkL", q, H, Finv)
        - a * qq4 * np.einsum("...Jk,...Li->...iJkL", Finv, Finv)
        + 2.0 * np.einsum("ik,...L,...J->...iJkL", _d, H, H)
    )
    dPdH = Ja4 * (
        2.0 * a * np.einsum("...K,...Ji->...iJK", CH, Finv)
        + 2.0 * np.einsum("...iK,...J->...iJK", F, H)
        + 2.0 * np.einsum("...i,JK->...iJK", q, _d)
    )
    return val, dH, dHH, dHdF, P, AA, dPdH


def _term_FinvH(F, Finv, J, H, a):
    """val = J^a |F^{-T} H|^2 and its F/H derivatives (same return layout)."""
    Ja = J**a
    h = np.einsum("...Mi,...M->...i", Finv, H)
    Cinv = Finv @ np.swapaxes(Finv, -1, -2)
    g = np.einsum("...Li,...i->...L", Finv, h)
    hh = np.einsum("...i,...i->...", h, h)
    Ja2, Ja3, Ja4 = Ja[..., None], Ja[..., None, None], Ja[..., None, None, None]
    Ja5 = Ja[..., None, None, None, None]
    val = Ja * hh
    dH = 2.0 * Ja2 * g
    dHH = 2.0 * Ja3 * Cinv
    dHdF = 2.0 * (
        a * Ja4 * np.einsum("...Kj,...I->...IjK", Finv, g)
        - Ja4 * (np.einsum("...Ij,...K->...IjK", Finv, g) + np.einsum("...IK,...j->...IjK", Cinv, h))
    )
    inner = a * hh[..., None, None] * np.swapaxes(Finv, -1, -2) - 2.0 * np.einsum("...k,...L->...kL", h, g)
    P = Ja3 * inner
    hh4 = hh[..., None, None, None, None]
    AA = a * Ja5 * np.einsum("...Nm,...kL->...kLmN", Finv, inner) + Ja5 * (
        -2.0 * a * np.einsum("...m,...N,...Lk->...kLmN", h, g, Finv)
        - a * hh4 * np.einsum("...Lm,...Nk->...kLmN", Finv, Finv)
        + 2.0 * np.einsum("...m,...Nk,...L->...kLmN", h, Finv, g)
        + 2.0 * np.einsum("...k,...Lm,...N->...kLmN", h, Finv, g)
        + 2.0 * np.einsum("...k,...LN,...m->...kLmN", h, Cinv, h)
    )
    dPdH = Ja4 * (
        2.0 * a * np.einsum("...M,...Lk->...kLM", g, Finv)
        - 2.0 * np.einsum("...Mk,...L->...kLM", Finv, g)
        - 2.0 * np.einsum("...k,...LM->...kLM", h, Cinv)
    )
    return val, dH, dHH, dHdF, P, AA, dPdH


def push_forward_tangent(F, J, AA):
    return np.einsum("...jJ,...iJkL,...lL->...ijkl", F, AA, F) / J[..., None, None, None, None]


def pressure_tangent(p):
    p = np.asarray(p, dtype=float)
    base = np.einsum("ij,kl->ijkl", _d, _d) - np.einsum("il,jk->ijkl", _d, _d)
    return p[..., None, None, None, None] * base


# ---------------------------------------------------------------------------
# public evaluation routines


def _deviatoric_ref(spec: MaterialSpec, state: DeformationState):
    I1, P1, AA1 = _isochoric_trace(state.F, state.F_inv, state.J)
    x = I1 - 3.0
    if spec.hyper_model == NEOHOOKEAN:
        energy = 0.5 * spec.mu * x
        c1 = 0.5 * spec.mu
        P = c1 * P1
        AA = c1 * AA1
        return energy, P, AA
    if np.any(x >= GENT_GUARD * spec.Im):
        raise GentLockingLimit(f"I1bar - 3 = {np.max(x):.6g} reached {GENT_GUARD} * Im = {GENT_GUARD * spec.Im:g}")
    s = 1.0 - x / spec.Im
    energy = -0.5 * spec.mu * spec.Im * np.log(s)
    c1 = 0.5 * spec.mu / s
    c2 = 0.5 * spec.mu / (spec.Im * s**2)
    P = c1[..., None, None] * P1
    AA = c1[..., None, None, None, None] * AA1 + c2[..., None, None, None, None] * np.einsum(
        "...iJ,...kL->...iJkL", P1, P1
    )
    return energy, P, AA


def eval_deviatoric(spec: MaterialSpec, state: DeformationState):
    """Isochoric hyperelastic energy, first Piola-Kirchhoff stress and spatial tangent (9x9)."""
    energy, P, AA = _deviatoric_ref(spec, state)
    e = push_forward_tangent(state.F, state.J, AA)
    return energy, P, e.reshape(e.shape[:-4] + (9, 9))


def eval_volumetric(spec: MaterialSpec, J):
    """Psi_vol = kappa/2 (J-1)^2 with its first and second J-derivatives."""
    if spec.incompressible:
        raise ValueError("volumetric energy is not used for incompressible materials")
    J = np.asarray(J, dtype=float)
    if np.any(~(J > 0)):
        raise OutOfRange("J must be positive")
    k = spec.kappa
    return 0.5 * k * (J - 1.0) ** 2, k * (J - 1.0), k * np.ones_like(J)


def pressure_constants(spec: MaterialSpec, J_n):
    """Frozen constants (J_hat, theta_hat) of the pressure energy from the last converged J."""
    J_n = np.asarray(J_n, dtype=float)
    if np.any(~(J_n > 0)):
        raise OutOfRange("J_n must be positive")
    if spec.incompressible:
        return np.ones_like(J_n), np.zeros_like(J_n)
    _, d1, d2 = eval_volumetric(spec, J_n)
    if np.any(d2 == 0):
        raise ZeroCurvature("second derivative of the volumetric energy vanishes")
    return J_n - d1 / d2, 1.0 / d2


def eval_hard_magnetic(spec: MaterialSpec, F, Ba):
    """Residual-field energy -Ba.(F Br)/mu0 and its (deformation independent) stress."""
    if spec.magnetic_mode != MAGNETIC_HARD:
        raise ValueError("eval_hard_magnetic needs magnetic_mode='hard'")
    F = np.asarray(F, dtype=float)
    Ba = np.broadcast_to(np.asarray(Ba, dtype=float), F.shape[:-1])
    Br = np.asarray(spec.Br)
    energy = -np.einsum("...s,...sM,M->...", Ba, F, Br) / spec.mu0
    P = -np.einsum("...i,J->...iJ", Ba, Br) / spec.mu0
    return energy, P


def _soft_ref(spec: MaterialSpec, state: DeformationState, H):
    F, Finv, J = state.F, state.F_inv, state.J
    H = np.broadcast_to(np.asarray(H, dtype=float), F.shape[:-1])
    terms = [
        (-0.5, _term_FinvH(F, Finv, J, H, 1.0)),
        (spec.beta, _term_FH(F, Finv, J, H, -2.0 / 3.0)),
        (spec.eta, _term_FinvH(F, Finv, J, H, 2.0 / 3.0)),
    ]
    mu0 = spec.mu0
    HH = np.einsum("...M,...M->...", H, H)
    energy = mu0 * spec.alpha * HH
    dPsi_dH = mu0 * spec.alpha * 2.0 * H
    d2Psi_dH2 = mu0 * spec.alpha * 2.0 * np.broadcast_to(_d, F.shape)
    dPsiH_dF = np.zeros(F.shape[:-2] + (3, 3, 3))
    P = np.zeros_like(F)
    AA = np.zeros(F.shape[:-2] + (3, 3, 3, 3))
    dPdH = np.zeros(F.shape[:-2] + (3, 3, 3))
    for c, (val, dH, dHH, dHdF, Pt, AAt, dPdHt) in terms:
        if c == 0.0:
            continue
        c = c * mu0
        energy = energy + c * val
        dPsi_dH = dPsi_dH + c * dH
        d2Psi_dH2 = d2Psi_dH2 + c * dHH
        dPsiH_dF = dPsiH_dF + c * dHdF
        P = P + c * Pt
        AA = AA + c * AAt
        dPdH = dPdH + c * dPdHt
    B = -dPsi_dH
    dBdH = -d2Psi_dH2
    dBdF = -dPsiH_dF
    return energy, P, AA, B, dBdH, dBdF, dPdH


def _soft_spatial(F, J, B, dBdH, dBdF, dPdH):
    invJ = 1.0 / J
    b = np.einsum("...iI,...I->...i", F, B) * invJ[..., None]
    p_coup = -np.einsum("...jJ,...iJK,...kK->...ijk", F, dPdH, F) * invJ[..., None, None, None]
    p_hat = np.einsum("...iI,...IjK,...kK->...ijk", F, dBdF, F) * invJ[..., None, None, None]
    d_perm = -np.einsum("...iI,...IJ,...jJ->...ij", F, dBdH, F) * invJ[..., None, None]
    return b, p_coup, p_hat, d_perm


def eval_soft_magnetic(spec: MaterialSpec, state: DeformationState, H_ref):
    """Free-space plus coupling energy of a soft magnetic material.

    Returns ``(energy, P_magn, B_ref, p_coup, p_coup_hat, d_perm)`` where the
    last three are the spatial coupling tensors (3x3x3, 3x3x3, 3x3).
    """
    if spec.magnetic_mode != MAGNETIC_SOFT:
        raise ValueError("eval_soft_magnetic needs magnetic_mode='soft'")
    energy, P, _, B, dBdH, dBdF, dPdH = _soft_ref(spec, state, H_ref)
    _, p_coup, p_hat, d_perm = _soft_spatial(state.F, state.J, B, dBdH, dBdF, dPdH)
    return energy, P, B, p_coup, p_hat, d_perm


def _visco_ref(mu_v, F, Finv, J, A, alpha_f_Lambda):
    """Maxwell branch energy (at fixed A), stress and consistent reference tangent."""
    val, P1, AA1 = _isochoric_trace(F, Finv, J, A)
    energy = 0.5 * mu_v * (val - 3.0 - np.log(np.linalg.det(A)))
    P = 0.5 * mu_v * P1
    Cinv = Finv @ np.swapaxes(Finv, -1, -2)
    alg = (
        (2.0 / 3.0) * np.einsum("...Ji,...Lk->...iJkL", Finv, Finv)
        - np.einsum("...Li,...Jk->...iJkL", Finv, Finv)
        - np.einsum("ik,...LJ->...iJkL", _d, Cinv)
    )
    AA = 0.5 * mu_v * AA1 + (alpha_f_Lambda * mu_v) * alg
    return energy, P, AA


def assemble_point_response(
    spec: MaterialSpec,
    F,
    H_ref=None,
    Ba=None,
    p=0.0,
    visco: Optional[QuadPointState] = None,
    ga: Optional[GAlphaParams] = None,
    dt: Optional[float] = None,
) -> StressTangent:
    """Sum deviatoric, magnetic and viscoelastic contributions at material points.

    ``visco`` holds the converged branch history; the branch variables at
    n+1 are recomputed from the current ``Cbar^{-1}`` (fully implicit), so
    the returned tangent is consistent with that update.
    """
    state = kinematics(F)
    F, J, Finv = state.F, state.J, state.F_inv
    energy, P, AA = _deviatoric_ref(spec, state)

    out_soft = None
    if spec.magnetic_mode == MAGNETIC_HARD:
        if Ba is not None:
            e_m, P_m = eval_hard_magnetic(spec, F, Ba)
            energy = energy + e_m
            P = P + P_m
    elif spec.magnetic_mode == MAGNETIC_SOFT:
        H = np.zeros(F.shape[:-1]) if H_ref is None else H_ref
        e_m, P_m, AA_m, B, dBdH, dBdF, dPdH = _soft_ref(spec, state, H)
        energy = energy + e_m
        P = P + P_m
        AA = AA + AA_m
        out_soft = (B, dBdH, dBdF, dPdH)

    A_new, Adot_new = [], []
    if spec.maxwell_branches:
        if visco is None or ga is None or dt is None:
            raise ValueError("viscoelastic materials need history, generalized-alpha parameters and dt")
        for (mu_v, tau), br in zip(spec.maxwell_branches, visco.branches):
            A1, Ad1 = advance_branch(br.A_n, br.Adot_n, visco.Cbar_inv_n, state.Cbar_inv, tau, dt, ga)
            afL = ga.alpha_f * lambda_factor(ga, dt, tau)
            e_v, P_v, AA_v = _visco_ref(mu_v, F, Finv, J, A1, afL)
            energy = energy + e_v
            P = P + P_v
            AA = AA + AA_v
            A_new.append(A1)
            Adot_new.append(Ad1)

    p = np.broadcast_to(np.asarray(p, dtype=float), J.shape)
    sigma = np.einsum("...iJ,...jJ->...ij", P, F) / J[..., None, None] + p[..., None, None] * _d
    e = push_forward_tangent(F, J, AA) + pressure_tangent(p)
    res = StressTangent(energy, P, sigma, e, J, state.Cbar_inv, A_np1=A_new, Adot_np1=Adot_new)
    if out_soft is not None:
        B, dBdH, dBdF, dPdH = out_soft
        res.B_ref = B
        res.b, res.p_coup, res.p_coup_hat, res.d_perm = _soft_spatial(F, J, B, dBdH, dBdF, dPdH)
    return res


# ---------------------------------------------------------------------------
# finite-difference oracle (tests only)


def _total_P(spec, F, H, Ba, p, visco, ga, dt):
    r = assemble_point_response(spec, F, H, Ba, p, visco, ga, dt)
    cof = r.J[..., None, None] * np.swapaxes(np.linalg.inv(F), -1, -2)
    return r.P + np.asarray(p)[..., None, None] * cof, r.B_ref


def fd_tangent_oracle(spec, F, H_ref=None, Ba=None, p=0.0, visco=None, ga=None, dt=None):
    """Central-difference tangents of a single point.

    Differentiates the total first Piola-Kirchhoff stress ``P + p J F^{-T}``
    and ``B`` with step ``1e-6 (1 + |.|)`` and pushes forward. Returns a
    dict with ``e`` (9x9) and, in soft mode, ``p`` (9x3), ``p_hat`` (3x9),
    ``d`` (3x3).
    """
    F = np.asarray(F, dtype=float)
    soft = spec.magnetic_mode == MAGNETIC_SOFT
    H = np.zeros(3) if (H_ref is None) else np.asarray(H_ref, dtype=float)
    hF = 1e-6 * (1.0 + np.linalg.norm(F))
    dPdF = np.zeros((3, 3, 3, 3))
    dBdF = np.zeros((3, 3, 3))
    for k in range(3):
        for L in range(3):
            Fp = F.copy()
            Fm = F.copy()
            Fp[k, L] += hF
            Fm[k, L] -= hF
            Pp, Bp = _total_P(spec, Fp, H, Ba, p, visco, ga, dt)
            Pm, Bm = _total_P(spec, Fm, H, Ba, p, visco, ga, dt)
            dPdF[:, :, k, L] = (Pp - Pm) / (2 * hF)
            if soft:
                dBdF[:, k, L] = (Bp - Bm) / (2 * hF)
    J = np.linalg.det(F)
    e = np.einsum("jJ,iJkL,lL->ijkl", F, dPdF, F) / J
    out = {"e": e.reshape(9, 9)}
    if soft:
        hH = 1e-6 * (1.0 + np.linalg.norm(H))
        dPdH = np.zeros((3, 3, 3))
        dBdH = np.zeros((3, 3))
        for K in range(3):
            Hp = H.copy()
            Hm = H.copy()
            Hp[K] += hH
            Hm[K] -= hH
            Pp, Bp = _total_P(spec, F, Hp, Ba, p, visco, ga, dt)
            Pm, Bm = _total_P(spec, F, Hm, Ba, p, visco, ga, dt)
            dPdH[:, :, K] = (Pp - Pm) / (2 * hH)
            dBdH[:, K] = (Bp - Bm) / (2 * hH)
        out["p"] = (-np.einsum("jJ,iJK,kK->ijk", F, dPdH, F) / J).reshape(9, 3)
        out["p_hat"] = (np.einsum("iI,IjK,kK->ijk", F, dBdF, F) / J).reshape(3, 9)
        out["d"] = -np.einsum("iI,IJ,jJ->ij", F, dBdH, F) / J
    return out
