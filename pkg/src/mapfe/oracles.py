"""Closed-form reference solutions for the homogeneous cube benchmarks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constitutive import GENT_GUARD
from .errors import LockingStretch


@dataclass
class OracleResult:
    inputs: dict
    analytic: float
    numeric: float

    @property
    def rel_error(self):
        return abs(self.numeric - self.analytic) / max(abs(self.analytic), 1e-12)


def _bisect(f, a, b, tol=1e-14, maxit=200):
    fa = f(a)
    for _ in range(maxit):
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
        if b - a <= tol * max(1.0, abs(m)):
            break
    return 0.5 * (a + b)


def cubic_stretch_oracle(k: float) -> float:
    """Positive root of lambda^3 - k lambda^2 - 1 = 0.

    The cubic has exactly one sign change in its coefficients, so the
    positive root is unique; it is bracketed by [0, max(1, k + 1)].
    """
    k = float(k)
    f = lambda x: x**3 - k * x**2 - 1.0
    lam = _bisect(f, 0.0, max(1.0, k + 1.0), tol=1e-6)
    for _ in range(50):
        step = f(lam) / (3 * lam**2 - 2 * k * lam)
        lam -= step
        if abs(step) <= 1e-15 * lam:
            break
    return lam


def gent_lock_stretch(Im: float) -> float:
    """Stretch lambda > 1 at which 2 lambda^2 + lambda^-4 - 3 = Im."""
    g = lambda x: 2 * x**2 + x**-4 - 3.0 - Im
    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
    return _bisect(g, 1.0, hi)


def gent_potential_oracle(lam: float, Im: float) -> float:
    """Normalised potential phi/L sqrt(mu0/mu) at equibiaxial lateral stretch ``lam``."""
    lam = float(lam)
    if lam < 1.0:
        raise LockingStretch(f"stretch must be >= 1, got {lam}")
    x = 2 * lam**2 + lam**-4 - 3.0
    if x >= Im:
        raise LockingStretch(f"2 lam^2 + lam^-4 - 3 = {x:.6g} reached Im = {Im:g}")
    return float(np.sqrt((1.0 - lam**-6) / (lam**2 * (1.0 - x / Im))))


def gent_guard_stretch(Im: float) -> float:
    """Stretch at which the constitutive guard (Ibar1 - 3 = 0.999 Im) is reached."""
    return gent_lock_stretch(GENT_GUARD * Im)


def gent_ascending_limit(Im: float, n=20001):
    """End of the first ascending branch of the potential-stretch curve.

    Returns ``(lam_sup, phibar_sup)``: the first local maximum in
    [1, lam_guard) or, if the curve is monotone there, the guard stretch.
    """
    lam_g = gent_guard_stretch(Im)
    lam = np.linspace(1.0, lam_g, n)
    phi = np.array([gent_potential_oracle(l, Im) for l in lam])
    d = np.diff(phi)
    drop = np.flatnonzero(d <= 0)
    if len(drop) == 0:
        return lam_g, phi[-1]
    i = drop[0]
    # refine the maximum by golden-section on the bracketing interval
    a, b = lam[max(i - 1, 0)], lam[min(i + 1, n - 1)]
    gr = 0.5 * (np.sqrt(5.0) - 1.0)
    for _ in range(200):
        c = b - gr * (b - a)
        e = a + gr * (b - a)
        if gent_potential_oracle(c, Im) > gent_potential_oracle(e, Im):
            b = e
        else:
            a = c
        if b - a < 1e-14:
            break
    lam_s = 0.5 * (a + b)
    return lam_s, gent_potential_oracle(lam_s, Im)


def gent_stretch_from_potential(phibar: float, Im: float) -> float:
    """Inverse of :func:`gent_potential_oracle` on the ascending branch."""
    lam_s, phi_s = gent_ascending_limit(Im)
    if phibar < 0 or phibar > phi_s:
        raise LockingStretch(f"phibar {phibar} outside [0, {phi_s:.6g}] for Im = {Im:g}")
    if phibar == 0:
        return 1.0
    return _bisect(lambda l: gent_potential_oracle(l, Im) - phibar, 1.0, lam_s)
