"""Finite-difference check of the material tangents at random states.

    python3 scripts/tangent_check.py [n_states]
"""
import sys

import numpy as np

from mapfe.constitutive import MaterialSpec, assemble_point_response, fd_tangent_oracle
from mapfe.visco import QuadPointState, galpha_params


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def random_case(model, magnetic, visco, rng):
    spec = MaterialSpec(
        hyper_model=model,
        mu=float(rng.uniform(0.5, 3.0)),
        Im=float(rng.uniform(8.0, 30.0)),
        magnetic_mode=magnetic,
        Br=tuple(rng.standard_normal(3)),
        mu0=float(rng.uniform(0.5, 2.0)),
        maxwell_branches=[(float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.2, 2.0)))] if visco else [],
    )
    M = rng.standard_normal((3, 3))
    F = np.eye(3) + 0.15 * M
    kw = {"p": float(rng.standard_normal())}
    if magnetic == "hard":
        kw["Ba"] = 0.5 * rng.standard_normal(3)
    else:
        kw["H_ref"] = rng.standard_normal(3)
    if visco:
        qp = QuadPointState.initial((), spec.taus)
        S = 0.05 * rng.standard_normal((3, 3))
        qp.branches[0].A_n = np.eye(3) + S + S.T
        kw.update(visco=qp, ga=galpha_params(float(rng.uniform())), dt=float(rng.uniform(0.01, 0.5)))
    return spec, F, kw


def main(n=20):
    rng = np.random.default_rng(0)
    for model in ("neohookean", "gent"):
        for magnetic in ("hard", "soft"):
            for visco in (False, True):
                worst = 0.0
                for _ in range(int(n)):
                    spec, F, kw = random_case(model, magnetic, visco, rng)
                    r = assemble_point_response(spec, F, **kw)
                    o = fd_tangent_oracle(spec, F, **kw)
                    errs = [rel(r.e_mat, o["e"])]
                    if magnetic == "soft":
                        errs += [rel(r.p_mat, o["p"]), rel(r.p_hat_mat, o["p_hat"]), rel(r.d_perm, o["d"])]
                    worst = max(worst, max(errs))
                print(f"{model:10s} {magnetic:4s} visco={visco!s:5s} max rel error {worst:.2e}")


if __name__ == "__main__":
    main(*sys.argv[1:])
