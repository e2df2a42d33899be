"""Global assembly, Newton-Raphson load stepping and I/O of solver state.

Unknowns are ordered ``[u (3 per node, interleaved); p (per BQ1 node);
phi (per node, soft problems only)]``.  Element contributions are scattered
through a sparsity pattern computed once per model; the reduction uses
``np.bincount`` so repeated runs produce bit-identical matrices.
"""
from __future__ import annotations

import csv
import logging
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .bezier import ElementRule, MixedMesh, element_kernel, evaluate_at, face_quadrature, locate_point
from .constitutive import MAGNETIC_SOFT, MaterialSpec
from .errors import DivergedNonlinear, GentLockingLimit, NonPositiveJacobian, SingularSystem, SingularTensor
from .visco import BranchState, QuadPointState, galpha_params

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
CSV_SCHEMA = "# mapfe-probes v1"

# failures that a smaller Newton update or a smaller load step can cure
RECOVERABLE = (GentLockingLimit, NonPositiveJacobian, SingularTensor)


# ---------------------------------------------------------------------------
# load programs and boundary conditions


@dataclass
class Program:
    """Scalar time program.

    ``ramp``: linear from 0 to ``amplitude`` over ``t_ramp`` then held;
    ``constant``; ``sinusoid``: ``amplitude/2 (1 - cos(2 pi f t))``;
    ``table``: piecewise linear through ``(times, values)``.
    """

    kind: str = "ramp"
    amplitude: float = 1.0
    t_ramp: float = 1.0
    frequency: float = 0.0
    times: tuple = ()
    values: tuple = ()

    def __call__(self, t):
        t = float(t)
        if self.kind == "ramp":
            return self.amplitude * min(max(t / self.t_ramp, 0.0), 1.0)
        if self.kind == "constant":
            return self.amplitude
        if self.kind == "sinusoid":
            return 0.5 * self.amplitude * (1.0 - np.cos(2.0 * np.pi * self.frequency * t))
        if self.kind == "table":
            return float(np.interp(t, self.times, self.values))
        raise ValueError(f"unknown program kind {self.kind!r}")


@dataclass
class DirichletBC:
    """Prescribe ``value * program(t)`` on a node or face set.

    ``field`` is ``"u"`` (with ``component`` 0-2) or ``"phi"``.  ``value``
    may be a callable of the reference coordinates, evaluated at the control
    points (Greville interpolation of the boundary function).
    """

    set_name: str
    field: str = "u"
    component: int = 0
    value: Union[float, Callable] = 0.0
    program: Optional[Program] = None


@dataclass
class TractionBC:
    """Dead reference traction ``vector * program(t)`` on a face set."""

    set_name: str
    vector: tuple = (0.0, 0.0, 0.0)
    program: Optional[Program] = None


@dataclass
class SurfaceChargeBC:
    """Reference magnetic surface density on a face set (prescribes ``-B.N``)."""

    set_name: str
    value: float = 0.0
    program: Optional[Program] = None


@dataclass
class AppliedField:
    """Spatially uniform applied flux density ``direction * program(t)`` (hard mode)."""

    direction: tuple = (0.0, 0.0, 1.0)
    program: Program = field(default_factory=lambda: Program("constant", 0.0))

    def __call__(self, t):
        return np.asarray(self.direction, dtype=float) * self.program(t)


@dataclass
class Probe:
    """Named scalar output.

    kinds: ``u``/``phi`` interpolated at the reference point ``point``; ``J_min``/``J_max``
    over all quadrature points; ``reaction`` summed over a set and component.
    """

    name: str
    kind: str = "u"
    point: tuple = (0.0, 0.0, 0.0)
    component: int = 0
    set_name: str = ""


@dataclass
class SolverSettings:
    tol_rel: float = 1e-8
    tol_abs: float = 1e-10
    max_iter: int = 25
    max_halvings: int = 6
    max_backtracks: int = 8
    rho_inf: float = 0.0
    quad_points: int = 3
    chunk: int = 128


@dataclass
class Problem:
    mesh: MixedMesh
    materials: dict
    times: np.ndarray
    dirichlet: list = field(default_factory=list)
    tractions: list = field(default_factory=list)
    charges: list = field(default_factory=list)
    applied_field: Optional[AppliedField] = None
    probes: list = field(default_factory=list)
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        missing = set(np.unique(self.mesh.region_tags)) - set(self.materials)
        if missing:
            raise ValueError(f"no material for region(s) {sorted(missing)}")


# ---------------------------------------------------------------------------
# dof bookkeeping


class DofMap:
    def __init__(self, mesh: MixedMesh, soft: bool):
        self.n_nodes = mesh.n_nodes
        self.n_u = 3 * mesh.n_nodes
        self.n_p = mesh.n_pnodes
        self.n_phi = mesh.n_nodes if soft else 0
        self.soft = soft
        self.ndof = self.n_u + self.n_p + self.n_phi
        eu = (3 * mesh.elems_u[:, :, None] + np.arange(3)).reshape(mesh.n_elems, 81)
        ep = self.n_u + mesh.elems_p
        parts = [eu, ep]
        if soft:
            parts.append(self.n_u + self.n_p + mesh.elems_u)
        self.elem_dofs = np.concatenate(parts, axis=1)

    def u(self, node, comp):
        return 3 * np.asarray(node) + comp

    def p(self, pnode):
        return self.n_u + np.asarray(pnode)

    def phi(self, node):
        if not self.soft:
            raise ValueError("no potential dofs in this problem")
        return self.n_u + self.n_p + np.asarray(node)

    def split(self, x):
        u = x[: self.n_u].reshape(-1, 3)
        p = x[self.n_u : self.n_u + self.n_p]
        phi = x[self.n_u + self.n_p :] if self.soft else None
        return u, p, phi


@dataclass
class SolverState:
    t: float
    x: np.ndarray
    J_n: np.ndarray
    visco: dict  # region tag -> QuadPointState with batch shape (n_elems_region, nq)


@dataclass
class GlobalSystem:
    K: sp.csr_matrix
    R: np.ndarray
    free: np.ndarray
    prescribed: np.ndarray
    J_qp: np.ndarray = None
    history: dict = field(default_factory=dict)
    # round-off level of the free residual: eps times the root-sum-square of
    # the summed absolute element contributions and of K x (x known to one ulp)
    noise: float = 0.0


class Model:
    """Mesh, materials and the precomputed sparsity pattern of one problem."""

    def __init__(self, problem: Problem):
        self.problem = problem
        mesh = problem.mesh
        self.mesh = mesh
        self.materials = problem.materials
        self.settings = problem.settings
        soft_flags = {m.magnetic_mode == MAGNETIC_SOFT for m in problem.materials.values()}
        if len(soft_flags) > 1:
            raise ValueError("soft and non-soft regions cannot be mixed in one problem")
        self.soft = soft_flags.pop()
        self.dofs = DofMap(mesh, self.soft)
        self.rule = ElementRule(self.settings.quad_points)
        self.ga = galpha_params(self.settings.rho_inf)
        self.regions = {tag: np.flatnonzero(mesh.region_tags == tag) for tag in sorted(problem.materials)}
        self.regions = {t: e for t, e in self.regions.items() if len(e)}
        self.X_e = mesh.nodes[mesh.elems_u]

        ed = self.dofs.elem_dofs
        nd = ed.shape[1]
        rows = np.repeat(ed, nd, axis=1).ravel()
        cols = np.tile(ed, (1, nd)).ravel()
        keys = rows * self.dofs.ndof + cols
        ukeys, self._inverse = np.unique(keys, return_inverse=True)
        self._rows = ukeys // self.dofs.ndof
        self._cols = ukeys % self.dofs.ndof
        self._nnz = len(ukeys)

        self._bc = self._collect_dirichlet()
        self.constrained = np.zeros(self.dofs.ndof, dtype=bool)
        for dofs, _ in self._bc:
            self.constrained[dofs] = True
        self.free = np.flatnonzero(~self.constrained)
        self.fixed = np.flatnonzero(self.constrained)
        self._faces = self._collect_faces()
        self._probe_loc = {
            pr.name: locate_point(mesh, pr.point) for pr in problem.probes if pr.kind in ("u", "phi")
        }

    # -- boundary data -----------------------------------------------------

    def _collect_dirichlet(self):
        out = []
        for bc in self.problem.dirichlet:
            nodes = self.mesh.set_nodes(bc.set_name)
            if bc.field == "u":
                dofs = self.dofs.u(nodes, bc.component)
            elif bc.field == "phi":
                dofs = self.dofs.phi(nodes)
            else:
                raise ValueError(f"unknown field {bc.field!r}")
            if callable(bc.value):
                base = np.asarray(bc.value(self.mesh.nodes[nodes]), dtype=float)
            else:
                base = np.full(len(nodes), float(bc.value))
            prog = bc.program or Program("constant", 1.0)
            out.append((dofs, (base, prog)))
        return out

    def prescribed_values(self, t):
        vals = np.zeros(self.dofs.ndof)
        for dofs, (base, prog) in self._bc:
            vals[dofs] = base * prog(t)
        return vals

    def _collect_faces(self):
        out = []
        for bc in list(self.problem.tractions) + list(self.problem.charges):
            fs = self.mesh.face_sets[bc.set_name]
            N, dA = face_quadrature(self.X_e[fs[:, 0]], fs[:, 1])
            out.append((bc, fs[:, 0], N, dA))
        return out

    def external_forces(self, t):
        f = np.zeros(self.dofs.ndof)
        for bc, elems, N, dA in self._faces:
            prog = bc.program or Program("constant", 1.0)
            nodes = self.mesh.elems_u[elems]
            w = np.einsum("fqa,fq->fa", N, dA)
            if isinstance(bc, TractionBC):
                vec = np.asarray(bc.vector, dtype=float) * prog(t)
                for i in range(3):
                    np.add.at(f, self.dofs.u(nodes, i), w * vec[i])
            else:
                np.add.at(f, self.dofs.phi(nodes), w * (bc.value * prog(t)))
        return f

    # -- state -------------------------------------------------------------

    def initial_state(self) -> SolverState:
        nq = self.rule.nq
        visco = {}
        for tag, elems in self.regions.items():
            spec = self.materials[tag]
            if spec.maxwell_branches:
                visco[tag] = QuadPointState.initial((len(elems), nq), spec.taus)
        x = self.prescribed_values(self.problem.times[0]) * self.constrained
        return SolverState(float(self.problem.times[0]), x, np.ones((self.mesh.n_elems, nq)), visco)

    # -- assembly ----------------------------------------------------------

    def assemble(self, state: SolverState, x, t, dt):
        """Global residual and tangent at trial unknowns ``x`` and time ``t``."""
        ne = self.mesh.n_elems
        nd = self.dofs.elem_dofs.shape[1]
        Ke = np.empty((ne, nd, nd))
        Re = np.empty((ne, nd))
        u, p, phi = self.dofs.split(x)
        Ba = self.problem.applied_field(t) if self.problem.applied_field is not None else None
        J_qp = np.empty((ne, self.rule.nq))
        new_hist = {}
        for tag, elems in self.regions.items():
            spec = self.materials[tag]
            hist = state.visco.get(tag)
            A_parts = []
            for s in range(0, len(elems), self.settings.chunk):
                idx = elems[s : s + self.settings.chunk]
                sub = None
                if hist is not None:
                    sub = _slice_qp(hist, slice(s, s + len(idx)))
                blocks = element_kernel(
                    self.X_e[idx],
                    u[self.mesh.elems_u[idx]],
                    p[self.mesh.elems_p[idx]],
                    spec,
                    self.rule,
                    phi_e=None if phi is None else phi[self.mesh.elems_u[idx]],
                    J_n=state.J_n[idx],
                    visco=sub,
                    ga=self.ga,
                    dt=dt,
                    Ba=Ba,
                )
                Ke[idx] = blocks.full_matrix()
                Re[idx] = blocks.full_residual()
                J_qp[idx] = blocks.J_qp
                if hist is not None:
                    A_parts.append((blocks.A_np1, blocks.Adot_np1, blocks.Cbar_inv_qp))
            if hist is not None:
                new_hist[tag] = (
                    [np.concatenate([a[0][k] for a in A_parts]) for k in range(len(hist.branches))],
                    [np.concatenate([a[1][k] for a in A_parts]) for k in range(len(hist.branches))],
                    np.concatenate([a[2] for a in A_parts]),
                )
        vals = np.bincount(self._inverse, weights=Ke.ravel(), minlength=self._nnz)
        K = sp.csr_matrix((vals, (self._rows, self._cols)), shape=(self.dofs.ndof,) * 2)
        R = np.bincount(self.dofs.elem_dofs.ravel(), weights=Re.ravel(), minlength=self.dofs.ndof)
        R_abs = np.bincount(self.dofs.elem_dofs.ravel(), weights=np.abs(Re).ravel(), minlength=self.dofs.ndof)
        if self._faces:
            fext = self.external_forces(t)
            R = R - fext
            R_abs = R_abs + np.abs(fext)
        Kx = np.sqrt(K[self.free].multiply(K[self.free]) @ (x * x))
        noise = float(np.finfo(float).eps * np.linalg.norm(np.hypot(R_abs[self.free], Kx)))
        return GlobalSystem(K, R, self.free, self.constrained, J_qp, new_hist, noise)


def _slice_qp(hist: QuadPointState, sl):
    br = [BranchState(b.A_n[sl], b.Adot_n[sl]) for b in hist.branches]
    return QuadPointState(br, hist.Cbar_inv_n[sl])


def assemble(model: Model, state: SolverState, x=None, t=None, dt=None) -> GlobalSystem:
    """Convenience wrapper around :meth:`Model.assemble`."""
    x = state.x if x is None else x
    t = state.t if t is None else t
    dt = 1.0 if dt is None else dt
    return model.assemble(state, x, t, dt)


# ---------------------------------------------------------------------------
# linear algebra


# The mixed blocks are structurally symmetric, so a symmetric ordering with
# diagonal pivot preference keeps the fill several times lower than the
# default column ordering.  If that factorization is not accurate enough the
# default (partial pivoting) route is used instead.
_LU_FAST = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options=dict(SymmetricMode=True))


def _factor(K, opts):
    try:
        lu = splu(K, **opts)
    except RuntimeError as exc:
        rownorm = np.asarray(abs(K).sum(axis=1)).ravel()
        dof = int(np.argmin(rownorm))
        raise SingularSystem(f"factorization failed: {exc}", pivot=0.0, dof=dof) from exc
    piv = np.abs(lu.U.diagonal())
    scale = max(piv.max(), 1e-300)
    if piv.min() <= 1e-14 * scale:
        j = int(np.argmin(piv))
        raise SingularSystem(
            f"pivot {piv[j]:.3e} (relative {piv[j] / scale:.3e})", pivot=float(piv[j]), dof=int(lu.perm_c[j])
        )
    return lu


def equilibrate(K, sweeps=3):
    """Symmetric scaling ``S K S`` with rows/columns of unit max-norm (Ruiz).

    Displacement, pressure and potential rows carry different units; without
    scaling the pivots of a perfectly regular system span many decades and a
    relative small-pivot test is meaningless.
    """
    n = K.shape[0]
    s = np.ones(n)
    A = sp.csc_matrix(K)
    for _ in range(sweeps):
        m = np.asarray(abs(A).max(axis=1).todense()).ravel()
        m[m == 0] = 1.0
        d = 1.0 / np.sqrt(m)
        A = sp.diags(d) @ A @ sp.diags(d)
        s *= d
    return sp.csc_matrix(A), s


def solve_reduced(K, rhs, fast=True):
    """Sparse LU solve of the equilibrated system with a small-pivot check
    and one refinement sweep."""
    n = K.shape[0]
    if n == 0:
        return np.zeros(0)
    K = sp.csc_matrix(K)
    A, s = equilibrate(K)
    b = s * rhs
    bnorm = max(np.linalg.norm(b), 1e-300)
    if fast:
        try:
            lu = _factor(A, _LU_FAST)
            y = lu.solve(b)
            r = b - A @ y
            if np.linalg.norm(r) > 1e-12 * bnorm:
                y = y + lu.solve(r)
                r = b - A @ y
            if np.all(np.isfinite(y)) and np.linalg.norm(r) <= 1e-8 * bnorm:
                return s * y
        except SingularSystem:
            pass
    lu = _factor(A, {})
    y = lu.solve(b)
    r = b - A @ y
    if np.linalg.norm(r) > 1e-12 * bnorm:
        y = y + lu.solve(r)
    return s * y


def linear_solve(system: GlobalSystem):
    """Increment solving ``K_ff dx_f = -R_f``; constrained entries are zero."""
    f = system.free
    dx = np.zeros(system.R.shape[0])
    if len(f):
        dx[f] = solve_reduced(system.K[f][:, f], -system.R[f])
    return dx


# ---------------------------------------------------------------------------
# Newton iteration and time stepping


@dataclass
class StepReport:
    t: float
    dt: float
    iterations: int
    residuals: list
    converged: bool = True
    noise: list = field(default_factory=list)


def newton_solve(model: Model, state: SolverState, t_new: float, dt: float):
    """Solve one load step from ``state`` to ``t_new``.

    Returns ``(x, system, report)``.  The first correction carries the
    prescribed increments as a right-hand side ``-(R_f + K_fc dx_c)``;
    residual norms are measured on the free rows.
    """
    s = model.settings
    f, c = model.free, model.fixed
    x = state.x.copy()
    dxc = model.prescribed_values(t_new)[c] - x[c]
    system = model.assemble(state, x, t_new, dt)
    rhs = -(system.R[f] + system.K[f][:, c] @ dxc) if len(c) else -system.R[f]
    norm0 = float(np.linalg.norm(rhs))
    residuals = [norm0]
    noise = [system.noise]
    tol = max(s.tol_abs, s.tol_rel * norm0)
    if norm0 <= s.tol_abs:
        x[c] += dxc
        return x, system, StepReport(t_new, dt, 1, residuals, noise=noise)
    dx = np.zeros_like(x)
    dx[f] = solve_reduced(system.K[f][:, f], rhs)
    dx[c] = dxc
    iterations = 1
    while True:
        # backtrack when the trial state is inadmissible (inverted or locked)
        # (prescribed values are always applied in full)
        step = 1.0
        for _ in range(s.max_backtracks + 1):
            trial = x + step * dx
            trial[c] = x[c] + dx[c]
            try:
                system = model.assemble(state, trial, t_new, dt)
                break
            except RECOVERABLE:
                step *= 0.5
        else:
            raise DivergedNonlinear("no admissible Newton update", time=t_new)
        x = trial
        iterations += 1
        r = float(np.linalg.norm(system.R[f]))
        residuals.append(r)
        noise.append(system.noise)
        if not np.isfinite(r):
            raise DivergedNonlinear("non-finite residual", time=t_new)
        if r <= tol:
            return x, system, StepReport(t_new, dt, iterations, residuals, noise=noise)
        if iterations >= s.max_iter:
            raise DivergedNonlinear(f"no convergence in {s.max_iter} iterations (|R|={r:.3e})", time=t_new)
        dx = linear_solve(system)


def commit(model: Model, state: SolverState, x, system: GlobalSystem, t_new: float) -> SolverState:
    visco = {}
    for tag, hist in state.visco.items():
        A, Adot, Cbi = system.history[tag]
        branches = [BranchState(a.copy(), ad.copy()) for a, ad in zip(A, Adot)]
        visco[tag] = QuadPointState(branches, Cbi.copy())
    return SolverState(float(t_new), x, system.J_qp.copy(), visco)


def advance(model: Model, state: SolverState, t_new: float, level: int = 0, reports=None):
    """Advance to ``t_new``, halving the increment on failure up to ``max_halvings`` times."""
    reports = [] if reports is None else reports
    dt = t_new - state.t
    try:
        x, system, rep = newton_solve(model, state, t_new, dt)
        reports.append(rep)
        return commit(model, state, x, system, t_new), system, reports
    except (DivergedNonlinear, SingularSystem) + RECOVERABLE as exc:
        if level >= model.settings.max_halvings:
            raise DivergedNonlinear(f"step to t={t_new:g} failed after {level} halvings: {exc}", time=t_new) from exc
        log.info("cutting step at t=%g (level %d): %s", t_new, level + 1, exc)
        t_mid = state.t + 0.5 * dt
        mid, _, reports = advance(model, state, t_mid, level + 1, reports)
        return advance(model, mid, t_new, level + 1, reports)


# ---------------------------------------------------------------------------
# probes, CSV and checkpoints


def evaluate_probes(model: Model, state: SolverState, system: GlobalSystem):
    out = {}
    u, p, phi = model.dofs.split(state.x)
    for pr in model.problem.probes:
        if pr.kind in ("u", "phi"):
            elem, xi = model._probe_loc[pr.name]
            if pr.kind == "u":
                out[pr.name] = float(evaluate_at(model.mesh, u[:, pr.component], elem, xi))
            else:
                out[pr.name] = float(evaluate_at(model.mesh, phi, elem, xi))
        elif pr.kind == "J_min":
            out[pr.name] = float(system.J_qp.min())
        elif pr.kind == "J_max":
            out[pr.name] = float(system.J_qp.max())
        elif pr.kind == "reaction":
            nodes = model.mesh.set_nodes(pr.set_name)
            out[pr.name] = float(system.R[model.dofs.u(nodes, pr.component)].sum())
        else:
            raise ValueError(f"unknown probe kind {pr.kind!r}")
    return out


@dataclass
class RunResult:
    times: list
    probes: dict
    reports: list
    state: SolverState
    system: GlobalSystem
    states: list = field(default_factory=list)
    wall: float = 0.0
    model: Optional["Model"] = None

    def iterations_per_step(self):
        return [r.iterations for r in self.reports]


def run_schedule(
    problem: Problem,
    csv_path=None,
    keep_states=False,
    callback=None,
    state: Optional[SolverState] = None,
    model: Optional[Model] = None,
) -> RunResult:
    """Step through ``problem.times``; probes are recorded at every grid time."""
    t0 = _time.perf_counter()
    model = model or Model(problem)
    state = state or model.initial_state()
    system = model.assemble(state, state.x, state.t, 1.0)
    names = [p.name for p in problem.probes]
    times = [state.t]
    vals = {n: [v] for n, v in evaluate_probes(model, state, system).items()}
    reports, states = [], []
    writer = None
    fh = None
    if csv_path is not None:
        fh = open(csv_path, "w", newline="")
        fh.write(CSV_SCHEMA + "\n")
        writer = csv.writer(fh)
        writer.writerow(["t"] + names)
        writer.writerow([repr(state.t)] + [repr(vals[n][0]) for n in names])
    try:
        for t_new in problem.times[problem.times > state.t + 1e-14 * max(1.0, abs(state.t))]:
            try:
                state, system, reps = advance(model, state, float(t_new))
            except DivergedNonlinear as exc:
                exc.step = len(times)
                raise
            reports.extend(reps)
            pv = evaluate_probes(model, state, system)
            times.append(state.t)
            for n in names:
                vals[n].append(pv[n])
            if writer is not None:
                writer.writerow([repr(state.t)] + [repr(pv[n]) for n in names])
            if keep_states:
                states.append(state)
            if callback is not None:
                callback(model, state, system)
    finally:
        if fh is not None:
            fh.close()
    return RunResult(
        times, {n: np.array(v) for n, v in vals.items()}, reports, state, system, states, _time.perf_counter() - t0, model
    )


def save_checkpoint(path, state: SolverState):
    """npz checkpoint: format_version, t, x, J_n and per-region visco arrays."""
    data = {"format_version": np.array(CHECKPOINT_VERSION), "t": np.array(state.t), "x": state.x, "J_n": state.J_n}
    for tag, qp in state.visco.items():
        data[f"visco_{tag}_Cbar_inv_n"] = qp.Cbar_inv_n
        data[f"visco_{tag}_nbranch"] = np.array(len(qp.branches))
        for k, b in enumerate(qp.branches):
            data[f"visco_{tag}_{k}_A"] = b.A_n
            data[f"visco_{tag}_{k}_Adot"] = b.Adot_n
    np.savez(path, **data)


def load_checkpoint(path) -> SolverState:
    with np.load(path) as d:
        ver = int(d["format_version"])
        if ver != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {ver}")
        visco = {}
        tags = sorted({int(k.split("_")[1]) for k in d.files if k.startswith("visco_") and k.endswith("_nbranch")})
        for tag in tags:
            nb = int(d[f"visco_{tag}_nbranch"])
            br = [BranchState(d[f"visco_{tag}_{k}_A"].copy(), d[f"visco_{tag}_{k}_Adot"].copy()) for k in range(nb)]
            visco[tag] = QuadPointState(br, d[f"visco_{tag}_Cbar_inv_n"].copy())
        return SolverState(float(d["t"]), d["x"].copy(), d["J_n"].copy(), visco)


def read_probe_csv(path):
    with open(path) as fh:
        first = fh.readline().strip()
        if first != CSV_SCHEMA:
            raise ValueError(f"{path}: unexpected schema line {first!r}")
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return {h: data[:, i] for i, h in enumerate(header)}
