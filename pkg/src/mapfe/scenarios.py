"""Benchmark scenarios: problem builders, runners and tolerance checks.

Constants come from ``data/scenarios.json``; overrides are validated against
its keys.  Every runner returns a :class:`ScenarioReport` whose ``checks``
dict drives the CLI exit code.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .bezier import MixedMesh, patch_hex_mesh, structured_hex_mesh
from .constitutive import MaterialSpec
from .oracles import OracleResult, cubic_stretch_oracle, gent_ascending_limit, gent_stretch_from_potential
from .solver import (
    AppliedField,
    DirichletBC,
    Problem,
    Probe,
    Program,
    SolverSettings,
    run_schedule,
)

log = logging.getLogger(__name__)

SCENARIOS = (
    "cube_hard",
    "beam_hard",
    "pattern_hard",
    "gripper_hard",
    "cube_soft_gent",
    "bilayer_beam_soft",
    "gripper_soft",
)


def load_manifest():
    with resources.files("mapfe").joinpath("data/scenarios.json").open() as fh:
        data = json.load(fh)
    data.pop("_units", None)
    return data


@dataclass
class Scenario:
    name: str
    overrides: dict = field(default_factory=dict)
    level: int = 1

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}; choose from {', '.join(SCENARIOS)}")
        if not 1 <= int(self.level) <= 5:
            raise ValueError("mesh level must be in 1..5")
        base = load_manifest()[self.name]
        unknown = set(self.overrides) - set(base)
        if unknown:
            raise ValueError(f"unknown parameter(s) for {self.name}: {sorted(unknown)}")

    @property
    def params(self):
        p = dict(load_manifest()[self.name])
        p.update(self.overrides)
        return p


@dataclass
class ScenarioReport:
    name: str
    checks: dict = field(default_factory=dict)
    oracle: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    @property
    def passed(self):
        return all(self.checks.values())


def quadratic_ratio_ok(residuals, noise=None, C=10.0):
    """Ratio test ``r_{k+1} <= C r_k^2`` on the last two reductions of a
    residual history normalised by its first entry.

    ``noise`` holds the round-off level of every residual (see
    ``GlobalSystem.noise``).  A reduction that ends at or below that level
    carries no information about the tangent and is not tested.
    """
    r = np.asarray(residuals, dtype=float)
    if len(r) < 2 or r[0] == 0:
        return True
    eta = np.zeros_like(r) if noise is None else np.asarray(noise, dtype=float)
    rn = r / r[0]
    for k in range(max(len(r) - 2, 1), len(r)):
        if r[k] <= eta[k]:
            continue
        if rn[k] > C * rn[k - 1] ** 2:
            return False
    return True


def _roller_bcs(*sets_and_components):
    return [DirichletBC(s, "u", c) for s, c in sets_and_components]


# ---------------------------------------------------------------------------
# hard magnetic cube


def cube_hard_problem(k_values, prm, sign=1.0, settings=None):
    """Unit cube pulled along y by parallel residual/applied fields.

    The applied field is scaled so that pseudo-time equals |k|.
    """
    mesh = structured_hex_mesh((prm["edge"],) * 3, (1, 1, 1))
    spec = MaterialSpec(mu=prm["mu"], mu0=prm["mu0"], magnetic_mode="hard", Br=(0.0, 1.0, 0.0))
    kmax = float(max(k_values))
    ks = np.unique(np.concatenate([[0.0], k_values, np.arange(0.0, kmax, prm["dk_max"])]))
    return Problem(
        mesh,
        {0: spec},
        ks,
        dirichlet=_roller_bcs(("xmin", 0), ("ymin", 1), ("zmin", 2)),
        applied_field=AppliedField((0.0, sign * prm["mu"] * prm["mu0"], 0.0), Program("ramp", amplitude=kmax, t_ramp=kmax)),
        probes=[Probe("u_y", "u", (prm["edge"],) * 3, 1)],
        settings=settings or SolverSettings(),
    )


def run_cube_hard(scn: Scenario, outdir=None, settings=None, tol=1e-6):
    prm = scn.params
    ks = np.linspace(prm["k_min"], prm["k_max"], int(prm["n_k"]))
    rep = ScenarioReport(scn.name)
    lam_num = {}
    for sign in (1.0, -1.0):
        targets = np.abs(ks[(ks * sign) > 0])
        if len(targets) == 0:
            continue
        res = run_schedule(cube_hard_problem(targets, prm, sign, settings))
        lam = dict(zip(np.round(res.times, 12), 1.0 + res.probes["u_y"] / prm["edge"]))
        for k in targets:
            lam_num[sign * k] = lam[round(float(k), 12)]
        rep.results[f"iterations_{'pos' if sign > 0 else 'neg'}"] = res.iterations_per_step()
    for k in ks:
        num = lam_num.get(k, 1.0)
        rep.oracle.append(OracleResult({"k": float(k)}, cubic_stretch_oracle(k), float(num)))
    rep.checks["cubic_oracle"] = all(o.rel_error <= tol for o in rep.oracle)
    if outdir:
        path = Path(outdir) / "cube_hard_oracle.csv"
        _write_oracle(path, rep.oracle, ["k"])
        rep.files.append(str(path))
    return rep


# ---------------------------------------------------------------------------
# soft Gent cube


def cube_soft_problem(Im, phis, prm, settings=None):
    L = prm["edge"]
    mesh = structured_hex_mesh((L,) * 3, (1, 1, 1))
    spec = MaterialSpec(
        hyper_model="gent",
        mu=prm["mu"],
        Im=Im,
        mu0=prm["mu0"],
        magnetic_mode="soft",
        alpha=prm["alpha"],
        beta=prm["beta"],
        eta=prm["eta"],
    )
    # potential equals pseudo-time
    phi_prog = Program("ramp", amplitude=float(phis[-1]), t_ramp=float(phis[-1]))
    return Problem(
        mesh,
        {0: spec},
        np.asarray(phis, dtype=float),
        dirichlet=_roller_bcs(("xmin", 0), ("ymin", 1), ("zmin", 2))
        + [DirichletBC("zmin", "phi", value=0.0), DirichletBC("zmax", "phi", value=1.0, program=phi_prog)],
        probes=[Probe("u_x", "u", (L, L, L), 0), Probe("u_z", "u", (L, L, L), 2)],
        settings=settings or SolverSettings(),
    )


def run_cube_soft_gent(scn: Scenario, outdir=None, settings=None, tol=1e-4):
    prm = scn.params
    rep = ScenarioReport(scn.name)
    scale = prm["edge"] * np.sqrt(prm["mu"] / prm["mu0"])  # phi = phibar * scale
    for Im in prm["Im"]:
        _, phi_sup = gent_ascending_limit(Im)
        phibar = np.linspace(0.0, prm["fraction_of_sup"] * phi_sup, int(prm["n_inc"]) + 1)
        res = run_schedule(cube_soft_problem(Im, phibar * scale, prm, settings))
        lam = 1.0 + res.probes["u_x"] / prm["edge"]
        for pb, ln in zip(phibar[1:], lam[1:]):
            rep.oracle.append(OracleResult({"Im": Im, "phibar": float(pb)}, gent_stretch_from_potential(pb, Im), float(ln)))
        rep.results[f"iterations_Im{Im:g}"] = res.iterations_per_step()
    rep.checks["gent_oracle"] = all(o.rel_error <= tol for o in rep.oracle)
    if outdir:
        path = Path(outdir) / "cube_soft_gent_oracle.csv"
        _write_oracle(path, rep.oracle, ["Im", "phibar"])
        rep.files.append(str(path))
    return rep


# ---------------------------------------------------------------------------
# hard magnetic cantilever


def beam_divisions(level):
    s = 2 ** (level - 1)
    return (8 * s, 4 * s, 1)


def beam_hard_problem(prm, level=1, settings=None, kappa=None):
    """Cantilever along x, thickness along y, clamped at x = 0.

    ``Br`` points along the beam axis and the applied field along +y.
    """
    L, C, W = prm["length"], prm["thickness"], prm["width"]
    mesh = structured_hex_mesh((L, C, W), beam_divisions(level))
    extra = {} if kappa is None else {"kappa": kappa}
    spec = MaterialSpec(mu=prm["mu"], mu0=prm["mu0"], magnetic_mode="hard", Br=(prm["Br"], 0.0, 0.0), **extra)
    n = int(prm["n_steps"])
    tip = (L, 0.5 * C, 0.5 * W)
    return Problem(
        mesh,
        {0: spec},
        np.linspace(0.0, 1.0, n + 1),
        dirichlet=[DirichletBC("xmin", "u", c) for c in range(3)],
        applied_field=AppliedField((0.0, 1.0, 0.0), Program("ramp", amplitude=prm["Ba_max"], t_ramp=1.0)),
        probes=[Probe("u_x", "u", tip, 0), Probe("u_y", "u", tip, 1), Probe("J_min", "J_min"), Probe("J_max", "J_max")],
        settings=settings or SolverSettings(),
    )


def newton_checks(res, max_mean=8.0):
    ratio = all(quadratic_ratio_ok(r.residuals, r.noise) for r in res.reports)
    mean_it = float(np.mean(res.iterations_per_step()))
    return {"newton_quadratic": ratio, "newton_mean_iterations": mean_it <= max_mean}, mean_it


def run_beam_hard(scn: Scenario, outdir=None, settings=None):
    prm = scn.params
    csv_path = Path(outdir) / f"beam_hard_M{scn.level}.csv" if outdir else None
    res = run_schedule(beam_hard_problem(prm, scn.level, settings), csv_path=csv_path)
    rep = ScenarioReport(scn.name, results={"run": res})
    checks, mean_it = newton_checks(res)
    rep.checks.update(checks)
    rep.results["mean_iterations"] = mean_it
    if csv_path:
        rep.files.append(str(csv_path))
    return rep


# ---------------------------------------------------------------------------
# soft bilayer cantilever


def bilayer_divisions(level):
    s = 2 ** (level - 1)
    return (10 * s, 2 * s, 2 * s)


def bilayer_problem(prm, level=1, settings=None):
    """Active layer (tag 0, upper half in y) bonded to a passive layer (tag 1).

    The passive layer keeps only the free-space energy (alpha = beta = eta = 0).
    """
    L, W, h = prm["length"], prm["width"], prm["layer_thickness"]
    H = 2 * h
    mesh = structured_hex_mesh((L, H, W), bilayer_divisions(level))
    cy = mesh.nodes[mesh.elems_u].mean(axis=1)[:, 1]
    mesh.region_tags = np.where(cy > h, 0, 1).astype(np.int64)
    common = dict(mu=prm["mu"], mu0=prm["mu0"], magnetic_mode="soft")
    mats = {
        0: MaterialSpec(alpha=prm["alpha"], beta=prm["beta"], eta=prm["eta"], **common),
        1: MaterialSpec(alpha=0.0, beta=0.0, eta=0.0, **common),
    }
    n = int(prm["n_steps"])
    tip = (L, h, 0.5 * W)
    return Problem(
        mesh,
        mats,
        np.linspace(0.0, 1.0, n + 1),
        dirichlet=[DirichletBC("xmin", "u", c) for c in range(3)]
        + [
            DirichletBC("xmin", "phi", value=0.0),
            DirichletBC("xmax", "phi", value=1.0, program=Program("ramp", amplitude=prm["phi_max"], t_ramp=1.0)),
        ],
        probes=[Probe("u_x", "u", tip, 0), Probe("u_y", "u", tip, 1), Probe("phi_tip", "phi", tip)],
        settings=settings or SolverSettings(),
    )


def run_bilayer(scn: Scenario, outdir=None, settings=None):
    prm = scn.params
    csv_path = Path(outdir) / f"bilayer_beam_soft_M{scn.level}.csv" if outdir else None
    res = run_schedule(bilayer_problem(prm, scn.level, settings), csv_path=csv_path)
    rep = ScenarioReport(scn.name, results={"run": res})
    checks, mean_it = newton_checks(res)
    rep.checks.update(checks)
    rep.results["mean_iterations"] = mean_it
    if csv_path:
        rep.files.append(str(csv_path))
    return rep


# ---------------------------------------------------------------------------
# geometry helpers for the planar structures


def cross_quarter_mesh(a, L, t, hub_div, arm_div, nz=1):
    """Quarter of a plus-shaped plate: hub [0,a]^2 with arms along +x and +y.

    Region tags: 0 hub, 1 x-arm, 2 y-arm.
    """
    quads = [
        [(0, 0), (a, 0), (a, a), (0, a)],
        [(a, 0), (a + L, 0), (a + L, a), (a, a)],
        [(0, a), (a, a), (a, a + L), (0, a + L)],
    ]
    divs = [(hub_div, hub_div), (arm_div, hub_div), (hub_div, arm_div)]
    meshes = []
    for tag, (q, d) in enumerate(zip(quads, divs)):
        meshes.append((q, d, tag))
    return _tagged_patch_mesh(meshes, t, nz)


def _tagged_patch_mesh(patches, t, nz, layers=None):
    """Patch mesh where each patch carries its own region tag (single layer)
    or, with ``layers = [(thickness, nz, tag_offset)]``, tags offset per layer."""
    layers = layers or [(t, nz, 0)]
    quads = [p[0] for p in patches]
    divs = [p[1] for p in patches]
    mesh = patch_hex_mesh(quads, divs, [(th, n, 0) for th, n, _ in layers])
    tags = []
    for _, n, off in layers:
        for q, d, tag in patches:
            tags.append(np.full(d[0] * d[1] * n, tag + off, dtype=np.int64))
    mesh.region_tags = np.concatenate(tags)
    return mesh


def pattern_hard_problem(prm, mu_v=None, tau=None, settings=None, t_end=None, dt_hold=None):
    a, L, t = prm["hub_half"], prm["arm_length"], prm["thickness"]
    mesh = cross_quarter_mesh(a, L, t, int(prm["hub_div"]), int(prm["arm_div"]))
    tol = 1e-9
    mesh.add_face_set_where("sym_x", lambda X: np.abs(X[:, 0]) < tol)
    mesh.add_face_set_where("sym_y", lambda X: np.abs(X[:, 1]) < tol)
    mesh.add_node_set_where("center_line", lambda X: (np.abs(X[:, 0]) < tol) & (np.abs(X[:, 1]) < tol))
    branches = [] if mu_v is None else [(mu_v, tau)]
    base = dict(mu=prm["mu"], mu0=prm["mu0"], magnetic_mode="hard", maxwell_branches=branches)
    Br = prm["Br"]
    mats = {
        0: MaterialSpec(Br=(0.0, 0.0, 0.0), **base),
        1: MaterialSpec(Br=(Br, 0.0, 0.0), **base),
        2: MaterialSpec(Br=(0.0, Br, 0.0), **base),
    }
    times = _ramp_hold_times(prm["t_ramp"], prm["dt"], prm["t_hold"] if t_end is None else t_end - prm["t_ramp"], dt_hold)
    tip = (0.0, a + L, 0.5 * t)
    return Problem(
        mesh,
        mats,
        times,
        dirichlet=_roller_bcs(("sym_x", 0), ("sym_y", 1), ("center_line", 2)),
        applied_field=AppliedField((0.0, 0.0, -1.0), Program("ramp", amplitude=prm["Ba_max"], t_ramp=prm["t_ramp"])),
        probes=[Probe("u_y", "u", tip, 1), Probe("u_z", "u", tip, 2)],
        settings=settings or SolverSettings(),
    )


def _ramp_hold_times(t_ramp, dt, hold, dt_hold=None):
    ramp = np.linspace(0.0, t_ramp, int(round(t_ramp / dt)) + 1)
    dt_hold = dt if dt_hold is None else dt_hold
    if hold <= 0:
        return ramp
    n = max(int(np.ceil(hold / dt_hold - 1e-9)), 1)
    return np.concatenate([ramp, t_ramp + np.linspace(0.0, hold, n + 1)[1:]])


def star_mesh(n_arms, R, L, t, hub_div, arm_div):
    """Regular polygon hub (split into kites) with one rectangular arm per edge.

    Arms are centred on the edge normals at angles pi/n_arms + 2 pi k/n_arms.
    Tag 0 is the hub and tag k+1 is arm k.
    """
    if n_arms % 2:
        raise ValueError("the kite split needs an even number of hub vertices")
    ang = 2 * np.pi * np.arange(n_arms) / n_arms
    V = R * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    patches = []
    for k in range(0, n_arms, 2):
        q = [(0.0, 0.0), tuple(V[k]), tuple(V[(k + 1) % n_arms]), tuple(V[(k + 2) % n_arms])]
        patches.append((q, (hub_div, hub_div), 0))
    for k in range(n_arms):
        v0, v1 = V[k], V[(k + 1) % n_arms]
        nrm = 0.5 * (v0 + v1)
        nrm = nrm / np.linalg.norm(nrm)
        q = [tuple(v0), tuple(v0 + L * nrm), tuple(v1 + L * nrm), tuple(v1)]
        q = q if _signed_area(q) > 0 else q[::-1]
        patches.append((q, (arm_div, hub_div), k + 1))
    return _tagged_patch_mesh(patches, t, 1)


def _signed_area(q):
    x = np.array([p[0] for p in q])
    y = np.array([p[1] for p in q])
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def gripper_hard_problem(prm, mu_v=None, tau=None, settings=None):
    n = int(prm["n_arms"])
    R, L, t = prm["hub_radius"], prm["arm_length"], prm["thickness"]
    mesh = star_mesh(n, R, L, t, int(prm["hub_div"]), int(prm["arm_div"]))
    tol = 1e-9
    mesh.add_node_set_where("center_line", lambda X: (np.abs(X[:, 0]) < tol) & (np.abs(X[:, 1]) < tol))
    apothem = R * np.cos(np.pi / n)
    mesh.add_node_set_where("y_arm_axis", lambda X: (np.abs(X[:, 0]) < tol) & (X[:, 1] > apothem - tol))
    branches = [] if mu_v is None else [(mu_v, tau)]
    base = dict(mu=prm["mu"], mu0=prm["mu0"], magnetic_mode="hard", maxwell_branches=branches)
    mats = {0: MaterialSpec(Br=(0.0, 0.0, 0.0), **base)}
    for k in range(n):
        th = np.pi / n + 2 * np.pi * k / n
        mats[k + 1] = MaterialSpec(Br=(prm["Br"] * np.cos(th), prm["Br"] * np.sin(th), 0.0), **base)
    if prm["loading"] == "ramp":
        prog = Program("ramp", amplitude=prm["Ba_max"], t_ramp=prm["t_ramp"])
    elif prm["loading"] == "sinusoid":
        prog = Program("sinusoid", amplitude=prm["Ba_max"], frequency=prm["frequency"])
    else:
        raise ValueError(f"unknown loading {prm['loading']!r}")
    times = np.linspace(0.0, prm["t_end"], int(round(prm["t_end"] / prm["dt"])) + 1)
    # the arm at 90 degrees exists for n = 6 (30 + 60 k)
    tip = (0.0, apothem + L, 0.5 * t)
    return Problem(
        mesh,
        mats,
        times,
        dirichlet=[DirichletBC("center_line", "u", c) for c in range(3)] + [DirichletBC("y_arm_axis", "u", 0)],
        applied_field=AppliedField((0.0, 0.0, -1.0), prog),
        probes=[Probe("u_y", "u", tip, 1), Probe("u_z", "u", tip, 2)],
        settings=settings or SolverSettings(),
    )


def gripper_soft_problem(prm, mu_v=None, tau=None, settings=None):
    """One finger of a four-finger bilayer gripper (quarter model).

    The hub piece between the two symmetry diagonals is a trapezoid; the
    inner cut is clamped, the diagonal faces carry phi = 0 and the finger
    end carries the prescribed potential.
    """
    c0, a, L, h = prm["hub_inner"], prm["arm_half_width"], prm["arm_length"], prm["layer_thickness"]
    nw, na = int(prm["width_div"]), int(prm["arm_div"])
    patches = [
        ([(c0, -c0), (a, -a), (a, a), (c0, c0)], (1, nw), 0),
        ([(a, -a), (a + L, -a), (a + L, a), (a, a)], (na, nw), 0),
    ]
    # layer 0 passive (bottom, tag 1), layer 1 active (top, tag 0)
    mesh = _tagged_patch_mesh(patches, None, None, layers=[(h, 1, 1), (h, 1, 0)])
    tol = 1e-9
    mesh.add_face_set_where("inner", lambda X: np.abs(X[:, 0] - c0) < tol)
    mesh.add_face_set_where("diag_pos", lambda X: (np.abs(X[:, 1] - X[:, 0]) < tol) & (X[:, 0] <= a + tol))
    mesh.add_face_set_where("diag_neg", lambda X: (np.abs(X[:, 1] + X[:, 0]) < tol) & (X[:, 0] <= a + tol))
    mesh.add_face_set_where("tip", lambda X: np.abs(X[:, 0] - (a + L)) < tol)
    branches = [] if mu_v is None else [(mu_v, tau)]
    common = dict(mu=prm["mu"], mu0=prm["mu0"], magnetic_mode="soft", maxwell_branches=branches)
    mats = {
        0: MaterialSpec(alpha=prm["alpha"], beta=prm["beta"], eta=prm["eta"], **common),
        1: MaterialSpec(alpha=0.0, beta=0.0, eta=0.0, **common),
    }
    times = np.linspace(0.0, prm["t_end"], int(round(prm["t_end"] / prm["dt"])) + 1)
    tip = (a + L, 0.0, h)
    return Problem(
        mesh,
        mats,
        times,
        dirichlet=[DirichletBC("inner", "u", c) for c in range(3)]
        + [
            DirichletBC("diag_pos", "phi", value=0.0),
            DirichletBC("diag_neg", "phi", value=0.0),
            DirichletBC("tip", "phi", value=1.0, program=Program("ramp", amplitude=prm["phi_max"], t_ramp=prm["t_ramp"])),
        ],
        probes=[Probe("u_x", "u", tip, 0), Probe("u_z", "u", tip, 2)],
        settings=settings or SolverSettings(),
    )


# ---------------------------------------------------------------------------
# viscoelastic studies


VISCO_BUILDERS = {
    "pattern_hard": (pattern_hard_problem, "u_y"),
    "gripper_hard": (gripper_hard_problem, "u_y"),
    "gripper_soft": (gripper_soft_problem, "u_x"),
}


def hold_step(prm, tau):
    """Hold-phase step: the ramp step, coarsened to tau/20 for slow branches."""
    return max(prm["dt"], tau / 20.0)


def time_to_fraction(t, u, target, frac=0.95):
    """First (interpolated) time at which |u| reaches ``frac`` * |target|."""
    t = np.asarray(t)
    v = np.abs(np.asarray(u)) / abs(target)
    idx = np.flatnonzero(v >= frac)
    if len(idx) == 0:
        return np.inf
    i = idx[0]
    if i == 0:
        return float(t[0])
    return float(t[i - 1] + (frac - v[i - 1]) * (t[i] - t[i - 1]) / (v[i] - v[i - 1]))


def _visco_case(name, prm, mu_v, tau, settings, hold_taus):
    """One viscoelastic combination; module level so worker processes can run it."""
    builder, probe = VISCO_BUILDERS[name]
    if name == "pattern_hard":
        t_end = prm["t_ramp"] + hold_taus * tau
        prob = builder(prm, mu_v, tau, settings, t_end=t_end, dt_hold=hold_step(prm, tau))
    else:
        prob = builder(prm, mu_v, tau, settings)
    r = run_schedule(prob)
    return np.array(r.times), np.array(r.probes[probe])


def viscoelastic_study(
    name, mu_v_list=None, tau_list=None, params=None, settings=None, csv_path=None, hold_taus=10.0, jobs=1
):
    """Hyperelastic reference plus one run per (mu_v, tau).

    Each viscoelastic run of ``pattern_hard`` is held for ``hold_taus * tau``
    after the ramp.  Output is a long-format CSV (case, mu_v, tau, t, value).
    Failed combinations are recorded with their error and skipped.  With
    ``jobs > 1`` the combinations run in separate processes; each owns its
    solver state and the CSV is written afterwards in a fixed order.
    """
    builder, probe = VISCO_BUILDERS[name]
    prm = dict(load_manifest()[name])
    prm.update(params or {})
    mu_v_list = prm["mu_v"] if mu_v_list is None else mu_v_list
    tau_list = prm["tau"] if tau_list is None else tau_list
    out = {"he": None, "ve": {}, "errors": {}}
    # the hyperelastic response is rate independent, so its ramp suffices
    kw = {"t_end": prm["t_ramp"]} if name == "pattern_hard" else {}
    he = run_schedule(builder(prm, settings=settings, **kw))
    out["he"] = (np.array(he.times), np.array(he.probes[probe]))
    combos = [(float(m), float(t)) for m in mu_v_list for t in tau_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = {c: ex.submit(_visco_case, name, prm, c[0], c[1], settings, hold_taus) for c in combos}
            outcomes = {}
            for c, fut in futs.items():
                try:
                    outcomes[c] = fut.result()
                except Exception as exc:  # recorded and skipped
                    outcomes[c] = exc
    else:
        outcomes = {}
        for c in combos:
            try:
                outcomes[c] = _visco_case(name, prm, c[0], c[1], settings, hold_taus)
            except Exception as exc:  # recorded and skipped
                outcomes[c] = exc
    for c in combos:
        if isinstance(outcomes[c], Exception):
            log.warning("combination mu_v=%g tau=%g failed: %s", c[0], c[1], outcomes[c])
            out["errors"][c] = str(outcomes[c])
        else:
            out["ve"][c] = outcomes[c]
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            fh.write("# mapfe-visco v1\n")
            w = csv.writer(fh)
            w.writerow(["case", "mu_v", "tau", "t", probe])
            t, v = out["he"]
            for ti, vi in zip(t, v):
                w.writerow(["he", "", "", repr(float(ti)), repr(float(vi))])
            for (mu_v, tau), (t, v) in out["ve"].items():
                for ti, vi in zip(t, v):
                    w.writerow(["ve", repr(mu_v), repr(tau), repr(float(ti)), repr(float(vi))])
    return out


def visco_checks(out, name, params=None, rel=0.01, hold_taus=10.0, frac=0.95, fast_tau=0.05):
    """Tolerance checks on a :func:`viscoelastic_study` result.

    ``relax``: every sample at ``t >= t_ramp + hold_taus * tau`` lies within
    ``rel`` of the hyperelastic steady value (ramp-hold studies only).
    ``fast``: runs with ``tau == fast_tau`` stay within ``rel * |steady|`` of
    the hyperelastic curve at every recorded time.  ``order_tau`` /
    ``order_mu_v``: time to ``frac`` of the steady value increases strictly
    with tau (fixed mu_v) and with mu_v (fixed tau >= 5).
    """
    prm = dict(load_manifest()[name])
    prm.update(params or {})
    t_he, v_he = out["he"]
    steady = float(v_he[-1])
    checks = {"no_failures": not out["errors"]}
    lag = {}
    for (mu_v, tau), (t, v) in out["ve"].items():
        if name == "pattern_hard":
            late = t >= prm["t_ramp"] + hold_taus * tau - 1e-9
            checks[f"relax mu_v={mu_v:g} tau={tau:g}"] = bool(
                late.any() and np.all(np.abs(v[late] - steady) <= rel * abs(steady))
            )
        if np.isclose(tau, fast_tau):
            ref = np.interp(t, t_he, v_he)
            checks[f"fast mu_v={mu_v:g} tau={tau:g}"] = bool(np.all(np.abs(v - ref) <= rel * abs(steady)))
        lag[(mu_v, tau)] = time_to_fraction(t, v, steady, frac)
    mus = sorted({k[0] for k in lag})
    taus = sorted({k[1] for k in lag})
    for mu_v in mus:
        seq = [lag[(mu_v, tau)] for tau in taus if (mu_v, tau) in lag]
        checks[f"order_tau mu_v={mu_v:g}"] = bool(np.all(np.diff(seq) > 0))
    for tau in taus:
        if tau < 5.0:
            continue
        seq = [lag[(mu_v, tau)] for mu_v in mus if (mu_v, tau) in lag]
        checks[f"order_mu_v tau={tau:g}"] = bool(np.all(np.diff(seq) > 0))
    return checks, lag


def _write_oracle(path, rows, keys):
    with open(path, "w", newline="") as fh:
        fh.write("# mapfe-oracle v1\n")
        w = csv.writer(fh)
        w.writerow(keys + ["analytic", "numeric", "rel_error"])
        for o in rows:
            w.writerow([repr(o.inputs[k]) for k in keys] + [repr(o.analytic), repr(o.numeric), repr(o.rel_error)])


def _run_generic(builder, scn, outdir, settings, stem):
    prm = scn.params
    csv_path = Path(outdir) / f"{stem}.csv" if outdir else None
    res = run_schedule(builder(prm, settings=settings), csv_path=csv_path)
    rep = ScenarioReport(scn.name, results={"run": res})
    rep.checks["completed"] = True
    if csv_path:
        rep.files.append(str(csv_path))
    return rep


def build_problem(scn: Scenario, settings=None) -> Problem:
    """Problem object for a scenario (first oracle case for the cube sweeps)."""
    prm = scn.params
    if scn.name == "cube_hard":
        ks = np.linspace(prm["k_min"], prm["k_max"], int(prm["n_k"]))
        return cube_hard_problem(np.abs(ks[ks > 0]), prm, 1.0, settings)
    if scn.name == "cube_soft_gent":
        Im = prm["Im"][0]
        _, sup = gent_ascending_limit(Im)
        phis = np.linspace(0.0, prm["fraction_of_sup"] * sup, int(prm["n_inc"]) + 1)
        return cube_soft_problem(Im, phis * prm["edge"] * np.sqrt(prm["mu"] / prm["mu0"]), prm, settings)
    if scn.name == "beam_hard":
        return beam_hard_problem(prm, scn.level, settings)
    if scn.name == "bilayer_beam_soft":
        return bilayer_problem(prm, scn.level, settings)
    if scn.name == "pattern_hard":
        return pattern_hard_problem(prm, settings=settings)
    if scn.name == "gripper_hard":
        return gripper_hard_problem(prm, settings=settings)
    return gripper_soft_problem(prm, settings=settings)


def run_scenario(scn: Scenario, outdir=None, settings=None, vtk=False, vtk_mode="lagrange") -> ScenarioReport:
    if outdir:
        os.makedirs(outdir, exist_ok=True)
    if scn.name == "cube_hard":
        rep = run_cube_hard(scn, outdir, settings)
    elif scn.name == "cube_soft_gent":
        rep = run_cube_soft_gent(scn, outdir, settings)
    elif scn.name == "beam_hard":
        rep = run_beam_hard(scn, outdir, settings)
    elif scn.name == "bilayer_beam_soft":
        rep = run_bilayer(scn, outdir, settings)
    elif scn.name == "pattern_hard":
        rep = _run_generic(pattern_hard_problem, scn, outdir, settings, "pattern_hard")
    elif scn.name == "gripper_hard":
        rep = _run_generic(gripper_hard_problem, scn, outdir, settings, "gripper_hard")
    else:
        rep = _run_generic(gripper_soft_problem, scn, outdir, settings, "gripper_soft")
    if vtk and outdir and "run" in rep.results:
        from .vtk import write_vtk

        res = rep.results["run"]
        path = Path(outdir) / f"{scn.name}_final.vtk"
        write_vtk(path, res.model, res.state, mode=vtk_mode)
        rep.files.append(str(path))
    return rep
