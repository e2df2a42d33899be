"""Bernstein-Bezier hexahedra (BQ2 displacement/potential, BQ1 pressure).

Parent domain is the unit cube.  Local numbering of the 27 control points is
``a = i + 3 j + 9 k`` with ``i`` along xi; the 8 pressure nodes use
``i + 2 j + 4 k`` and sit on the BQ2 corners ``(2i, 2j, 2k)``.  Control points
are placed at the Greville abscissae (0, 1/2, 1) of each element, which keeps
trilinear geometry and affine nodal data exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .constitutive import MAGNETIC_HARD, MAGNETIC_SOFT, MaterialSpec, assemble_point_response, pressure_constants
from .errors import NonPositiveJacobian, UnsupportedDegree, UnsupportedRule
from .tensor_kinematics import det3, inv3

GREVILLE = np.array([0.0, 0.5, 1.0])


def bernstein1d(degree: int, xi):
    """Bernstein values and derivatives on [0, 1]; ``xi`` may be an array."""
    xi = np.asarray(xi, dtype=float)
    if degree == 1:
        N = np.stack([1.0 - xi, xi], axis=-1)
        dN = np.stack([-np.ones_like(xi), np.ones_like(xi)], axis=-1)
    elif degree == 2:
        N = np.stack([(1.0 - xi) ** 2, 2.0 * xi * (1.0 - xi), xi**2], axis=-1)
        dN = np.stack([-2.0 * (1.0 - xi), 2.0 - 4.0 * xi, 2.0 * xi], axis=-1)
    else:
        raise UnsupportedDegree(f"only degrees 1 and 2 are implemented, got {degree}")
    return N, dN


def gauss_rule(points_per_dir: int):
    """Tensor Gauss-Legendre rule on [0,1]^3: ``(coords (n^3, 3), weights (n^3,))``."""
    if points_per_dir not in (2, 3, 4):
        raise UnsupportedRule(f"points_per_dir must be 2, 3 or 4, got {points_per_dir}")
    x, w = np.polynomial.legendre.leggauss(points_per_dir)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    # xi fastest, matching the control-point numbering
    Z, Y, X = np.meshgrid(x, x, x, indexing="ij")
    WZ, WY, WX = np.meshgrid(w, w, w, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    return pts, (WX * WY * WZ).ravel()


def hex_basis(degree: int, pts):
    """Tensor-product values ``(nq, nb)`` and parametric gradients ``(nq, nb, 3)``."""
    pts = np.atleast_2d(pts)
    Nx, dx = bernstein1d(degree, pts[:, 0])
    Ny, dy = bernstein1d(degree, pts[:, 1])
    Nz, dz = bernstein1d(degree, pts[:, 2])
    N = np.einsum("qk,qj,qi->qkji", Nz, Ny, Nx).reshape(len(pts), -1)
    dN = np.stack(
        [
            np.einsum("qk,qj,qi->qkji", Nz, Ny, dx).reshape(len(pts), -1),
            np.einsum("qk,qj,qi->qkji", Nz, dy, Nx).reshape(len(pts), -1),
            np.einsum("qk,qj,qi->qkji", dz, Ny, Nx).reshape(len(pts), -1),
        ],
        axis=-1,
    )
    return N, dN


def _local(i, j, k):
    return i + 3 * j + 9 * k


CORNERS = np.array([_local(2 * i, 2 * j, 2 * k) for k in range(2) for j in range(2) for i in range(2)])

# local control points on each face: 0/1 -> xi = 0/1, 2/3 -> eta, 4/5 -> zeta
FACE_NODES = np.array(
    [
        [_local(0, j, k) for k in range(3) for j in range(3)],
        [_local(2, j, k) for k in range(3) for j in range(3)],
        [_local(i, 0, k) for k in range(3) for i in range(3)],
        [_local(i, 2, k) for k in range(3) for i in range(3)],
        [_local(i, j, 0) for j in range(3) for i in range(3)],
        [_local(i, j, 2) for j in range(3) for i in range(3)],
    ]
)


class ElementRule:
    """Quadrature points and cached basis tables shared by all elements."""

    def __init__(self, points_per_dir: int = 3):
        self.n = points_per_dir
        self.pts, self.w = gauss_rule(points_per_dir)
        self.N, self.dN = hex_basis(2, self.pts)
        self.Np, _ = hex_basis(1, self.pts)
        self.nq = len(self.w)


# ---------------------------------------------------------------------------
# meshes


@dataclass
class MixedMesh:
    nodes: np.ndarray
    elems_u: np.ndarray
    region_tags: np.ndarray = None
    node_sets: dict = field(default_factory=dict)
    face_sets: dict = field(default_factory=dict)
    elems_p: np.ndarray = field(init=False)
    p_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.elems_u = np.asarray(self.elems_u, dtype=np.int64)
        if self.region_tags is None:
            self.region_tags = np.zeros(len(self.elems_u), dtype=np.int64)
        self.region_tags = np.asarray(self.region_tags, dtype=np.int64)
        corners = self.elems_u[:, CORNERS]
        self.p_nodes, inv = np.unique(corners, return_inverse=True)
        self.elems_p = inv.reshape(corners.shape)
        self.node_sets = {k: np.asarray(v, dtype=np.int64) for k, v in self.node_sets.items()}
        self.face_sets = {k: np.asarray(v, dtype=np.int64).reshape(-1, 2) for k, v in self.face_sets.items()}

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elems(self):
        return len(self.elems_u)

    @property
    def n_pnodes(self):
        return len(self.p_nodes)

    def face_node_ids(self, name):
        fs = self.face_sets[name]
        if len(fs) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.unique(self.elems_u[fs[:, 0][:, None], FACE_NODES[fs[:, 1]]])

    def set_nodes(self, name):
        """Node ids of a named node set, or of all nodes of a named face set."""
        if name in self.node_sets:
            return self.node_sets[name]
        return self.face_node_ids(name)

    def add_node_set_where(self, name, predicate):
        self.node_sets[name] = np.flatnonzero(predicate(self.nodes))
        return self.node_sets[name]

    def add_face_set_where(self, name, predicate):
        """Collect element faces whose nine control points all satisfy ``predicate``."""
        ok = predicate(self.nodes)
        mask = ok[self.elems_u[:, FACE_NODES]].all(axis=-1)  # (E, 6)
        e, f = np.nonzero(mask)
        self.face_sets[name] = np.stack([e, f], axis=1)
        return self.face_sets[name]

    def check(self, rule: Optional[ElementRule] = None):
        """Verify the geometry map has positive Jacobian at every quadrature point."""
        rule = rule or ElementRule(3)
        Jac = np.einsum("eai,qaj->eqij", self.nodes[self.elems_u], rule.dN)
        d = det3(Jac)
        if np.any(d <= 0):
            e, q = np.argwhere(d <= 0)[0]
            raise NonPositiveJacobian(f"geometry Jacobian {d[e, q]:.3e} at element {e}, point {q}")
        return d


def _grid_nodes(nx, ny, nz):
    """Indices of the (2n+1)^3 Greville grid belonging to each element."""
    Nx, Ny = 2 * nx + 1, 2 * ny + 1
    ex, ey, ez = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    ex, ey, ez = (a.transpose(2, 1, 0).ravel() for a in (ex, ey, ez))  # x fastest
    loc = np.array([(i, j, k) for k in range(3) for j in range(3) for i in range(3)])
    I = 2 * ex[:, None] + loc[None, :, 0]
    J = 2 * ey[:, None] + loc[None, :, 1]
    K = 2 * ez[:, None] + loc[None, :, 2]
    return I + Nx * (J + Ny * K)


def structured_hex_mesh(box=(1.0, 1.0, 1.0), divisions=(1, 1, 1), origin=(0.0, 0.0, 0.0)) -> MixedMesh:
    nx, ny, nz = (int(d) for d in divisions)
    if min(nx, ny, nz) < 1:
        raise ValueError("divisions must be >= 1")
    box = np.asarray(box, dtype=float)
    origin = np.asarray(origin, dtype=float)
    xs = [origin[d] + np.linspace(0.0, box[d], 2 * n + 1) for d, n in enumerate((nx, ny, nz))]
    Z, Y, X = np.meshgrid(xs[2], xs[1], xs[0], indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    mesh = MixedMesh(nodes, _grid_nodes(nx, ny, nz))
    lo, hi = origin, origin + box
    tol = 1e-9 * max(box.max(), 1.0)
    for d, ax in enumerate("xyz"):
        mesh.add_face_set_where(f"{ax}min", lambda X, d=d: np.abs(X[:, d] - lo[d]) < tol)
        mesh.add_face_set_where(f"{ax}max", lambda X, d=d: np.abs(X[:, d] - hi[d]) < tol)
    return mesh


def patch_hex_mesh(quads, divisions, layers, merge_tol=1e-8) -> MixedMesh:
    """Extrude bilinear quadrilateral patches through a stack of layers.

    ``quads`` holds counter-clockwise corner lists ``[(x, y)] * 4``,
    ``divisions`` the ``(n1, n2)`` element counts per patch and ``layers`` the
    ``(thickness, nz, region_tag)`` stack starting at z = 0.  Coincident
    control points of neighbouring patches are merged.
    """
    all_nodes, all_elems, tags = [], [], []
    offset = 0
    z0 = 0.0
    for thick, nz, tag in layers:
        for quad, (n1, n2) in zip(quads, divisions):
            c = np.asarray(quad, dtype=float)
            s = np.linspace(0.0, 1.0, 2 * n1 + 1)
            t = np.linspace(0.0, 1.0, 2 * n2 + 1)
            z = z0 + np.linspace(0.0, thick, 2 * nz + 1)
            Zg, T, S = np.meshgrid(z, t, s, indexing="ij")
            xy = (
                ((1 - S) * (1 - T))[..., None] * c[0]
                + (S * (1 - T))[..., None] * c[1]
                + (S * T)[..., None] * c[2]
                + ((1 - S) * T)[..., None] * c[3]
            )
            pts = np.concatenate([xy.reshape(-1, 2), Zg.reshape(-1, 1)], axis=1)
            all_nodes.append(pts)
            all_elems.append(_grid_nodes(n1, n2, nz) + offset)
            tags.append(np.full(n1 * n2 * nz, tag, dtype=np.int64))
            offset += len(pts)
        z0 += thick
    nodes = np.concatenate(all_nodes)
    elems = np.concatenate(all_elems)
    pairs = cKDTree(nodes).query_pairs(merge_tol, output_type="ndarray")
    n = len(nodes)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    _, label = connected_components(graph, directed=False)
    # renumber clusters by first appearance so the ordering is deterministic
    _, first = np.unique(label, return_index=True)
    order = np.argsort(first)
    new_id = np.empty_like(order)
    new_id[order] = np.arange(len(order))
    node_map = new_id[label]
    merged = np.zeros((len(order), 3))
    merged[node_map] = nodes
    mesh = MixedMesh(merged, node_map[elems], np.concatenate(tags))
    mesh.check()
    return mesh


# ---------------------------------------------------------------------------
# text mesh format


MESH_MAGIC = "# mapfe-mesh 1"


def write_mesh(mesh: MixedMesh, path):
    """Write the plain-text mesh format (see README for the layout)."""
    with open(path, "w") as fh:
        fh.write(MESH_MAGIC + "\n")
        fh.write(f"nodes {mesh.n_nodes}\n")
        for x in mesh.nodes:
            fh.write(f"{x[0]:.17g} {x[1]:.17g} {x[2]:.17g}\n")
        fh.write(f"elements {mesh.n_elems}\n")
        for tag, row in zip(mesh.region_tags, mesh.elems_u):
            fh.write(f"{tag} " + " ".join(str(v) for v in row) + "\n")
        for name in sorted(mesh.node_sets):
            ids = mesh.node_sets[name]
            fh.write(f"nodeset {name} {len(ids)}\n")
            fh.write(" ".join(str(v) for v in ids) + "\n")
        for name in sorted(mesh.face_sets):
            fs = mesh.face_sets[name]
            fh.write(f"faceset {name} {len(fs)}\n")
            for e, f in fs:
                fh.write(f"{e} {f}\n")


def read_mesh(path) -> MixedMesh:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != MESH_MAGIC:
        raise ValueError(f"{path}: not a mapfe mesh file")
    pos = 1
    kw, n = lines[pos].split()
    if kw != "nodes":
        raise ValueError(f"{path}: expected 'nodes', found {kw!r}")
    n = int(n)
    nodes = np.array([[float(v) for v in ln.split()] for ln in lines[pos + 1 : pos + 1 + n]]).reshape(n, 3)
    pos += 1 + n
    kw, ne = lines[pos].split()
    if kw != "elements":
        raise ValueError(f"{path}: expected 'elements', found {kw!r}")
    ne = int(ne)
    rows = np.array([[int(v) for v in ln.split()] for ln in lines[pos + 1 : pos + 1 + ne]], dtype=np.int64).reshape(ne, 28)
    pos += 1 + ne
    node_sets, face_sets = {}, {}
    while pos < len(lines):
        kw, name, cnt = lines[pos].split()
        cnt = int(cnt)
        if kw == "nodeset":
            node_sets[name] = np.array(lines[pos + 1].split() if cnt else [], dtype=np.int64)
            pos += 2
        elif kw == "faceset":
            face_sets[name] = np.array([[int(v) for v in ln.split()] for ln in lines[pos + 1 : pos + 1 + cnt]], dtype=np.int64).reshape(cnt, 2)
            pos += 1 + cnt
        else:
            raise ValueError(f"{path}: unknown section {kw!r}")
    return MixedMesh(nodes, rows[:, 1:], rows[:, 0], node_sets, face_sets)


# ---------------------------------------------------------------------------
# element kernel


@dataclass
class ElementBlocks:
    """Batched element matrices/vectors; leading axis runs over elements."""

    R_u: np.ndarray
    R_p: np.ndarray
    K_uu: np.ndarray
    K_up: np.ndarray
    K_pp: np.ndarray
    R_phi: Optional[np.ndarray] = None
    K_uphi: Optional[np.ndarray] = None
    K_phiu: Optional[np.ndarray] = None
    K_phiphi: Optional[np.ndarray] = None
    J_qp: Optional[np.ndarray] = None
    Cbar_inv_qp: Optional[np.ndarray] = None
    A_np1: list = field(default_factory=list)
    Adot_np1: list = field(default_factory=list)

    @property
    def K_pu(self):
        return np.swapaxes(self.K_up, -1, -2)

    def full_matrix(self):
        """Dense element matrix in the order [u (81), p (8), phi (27)]."""
        ne = self.K_uu.shape[0]
        soft = self.K_phiphi is not None
        n = 89 + (27 if soft else 0)
        K = np.zeros((ne, n, n))
        K[:, :81, :81] = self.K_uu
        K[:, :81, 81:89] = self.K_up
        K[:, 81:89, :81] = self.K_pu
        K[:, 81:89, 81:89] = self.K_pp
        if soft:
            K[:, :81, 89:] = self.K_uphi
            K[:, 89:, :81] = self.K_phiu
            K[:, 89:, 89:] = self.K_phiphi
        return K

    def full_residual(self):
        parts = [self.R_u, self.R_p] + ([self.R_phi] if self.R_phi is not None else [])
        return np.concatenate(parts, axis=1)


def element_kernel(
    X_e,
    u_e,
    p_e,
    spec: MaterialSpec,
    rule: ElementRule,
    phi_e=None,
    J_n=None,
    visco=None,
    ga=None,
    dt=None,
    Ba=None,
) -> ElementBlocks:
    """Residuals and block stiffness matrices for a batch of elements sharing ``spec``.

    ``X_e``/``u_e`` are ``(ne, 27, 3)``, ``p_e`` is ``(ne, 8)``, ``phi_e``
    ``(ne, 27)``; ``J_n`` and ``visco`` carry per-point history of shape
    ``(ne, nq)``.  Current-configuration integrals use ``dv = J dV``; the
    pressure rows are integrated over the reference volume.
    """
    X_e = np.asarray(X_e, dtype=float)
    ne = X_e.shape[0]
    w = rule.w
    Jac0 = np.einsum("eai,qaj->eqij", X_e, rule.dN)
    det0 = det3(Jac0)
    if np.any(det0 <= 0):
        raise NonPositiveJacobian("reference geometry map is inverted")
    dNX = np.einsum("qaj,eqji->eqai", rule.dN, inv3(Jac0))
    F = np.eye(3) + np.einsum("eai,eqaJ->eqiJ", u_e, dNX)
    dV = w[None, :] * det0

    p_q = np.einsum("qm,em->eq", rule.Np, p_e)
    soft = spec.magnetic_mode == MAGNETIC_SOFT
    H = None
    if soft:
        H = -np.einsum("ea,eqaJ->eqJ", phi_e, dNX)
    Ba_arg = Ba if spec.magnetic_mode == MAGNETIC_HARD else None

    r = assemble_point_response(spec, F, H_ref=H, Ba=Ba_arg, p=p_q, visco=visco, ga=ga, dt=dt)
    J = r.J
    Finv = inv3(F)
    dNx = np.einsum("eqaJ,eqJi->eqai", dNX, Finv)
    dv = dV * J

    nq = rule.nq
    D = dNx  # (ne, nq, 27, 3)
    Dw = D * dv[..., None, None]
    # contraction over (q, l) for the right-hand shape-function gradient
    Dr = np.swapaxes(D, 2, 3).reshape(ne, nq * 3, 27)

    R_u = np.einsum("eqaj,eqij->eai", Dw, r.sigma_eff).reshape(ne, 81)
    eT = np.swapaxes(r.e, 2, 3).reshape(ne, nq, 3, 27)  # (j, i k l)
    T = (Dw @ eT).reshape(ne, nq, 243, 3)  # (a i k, l)
    K_uu = (np.swapaxes(T, 1, 2).reshape(ne, 243, nq * 3) @ Dr).reshape(ne, 27, 3, 3, 27)
    K_uu = K_uu.transpose(0, 1, 2, 4, 3).reshape(ne, 81, 81)
    K_up = np.swapaxes(Dw.reshape(ne, nq, 81), 1, 2) @ rule.Np

    if J_n is None:
        J_n = np.ones_like(J)
    J_hat, theta = pressure_constants(spec, J_n)
    R_p = ((J - J_hat - theta * p_q) * dV) @ rule.Np
    K_pp = -np.einsum("qm,qn,eq->emn", rule.Np, rule.Np, theta * dV, optimize=True)

    blocks = ElementBlocks(R_u, R_p, K_uu, K_up, K_pp, J_qp=J, Cbar_inv_qp=r.Cbar_inv, A_np1=r.A_np1, Adot_np1=r.Adot_np1)
    if soft:
        blocks.R_phi = np.einsum("eqai,eqi->ea", Dw, r.b)
        pT = np.swapaxes(r.p_coup, 2, 3).reshape(ne, nq, 3, 9)  # (j, i k)
        T = (Dw @ pT).reshape(ne, nq, 81, 3)  # (a i, k)
        blocks.K_uphi = np.swapaxes(T, 1, 2).reshape(ne, 81, nq * 3) @ Dr
        T = (Dw @ r.p_coup_hat.reshape(ne, nq, 3, 9)).reshape(ne, nq, 81, 3)  # (a j, k)
        K = (np.swapaxes(T, 1, 2).reshape(ne, 81, nq * 3) @ Dr).reshape(ne, 27, 3, 27)
        blocks.K_phiu = K.transpose(0, 1, 3, 2).reshape(ne, 27, 81)
        T = Dw @ r.d_perm  # (ne, nq, 27, 3)
        blocks.K_phiphi = np.swapaxes(T, 1, 2).reshape(ne, 27, nq * 3) @ Dr
    return blocks


def face_quadrature(X_e, faces, n=3):
    """Shape values and area weights on reference faces.

    Returns ``(N (nf, nq, 27), dA (nf, nq))`` for the faces ``faces`` (local
    ids) of the elements with control points ``X_e`` (nf, 27, 3).
    """
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    S, T = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w).ravel()
    S, T = S.ravel(), T.ravel()
    Ns, dNs = [], []
    for f in range(6):
        axis, val = divmod(f, 2)
        pts = np.zeros((len(S), 3))
        free = [d for d in range(3) if d != axis]
        pts[:, axis] = float(val)
        pts[:, free[0]] = S
        pts[:, free[1]] = T
        N, dN = hex_basis(2, pts)
        Ns.append(N)
        dNs.append(dN[:, :, free])
    Ns = np.array(Ns)
    dNs = np.array(dNs)
    N = Ns[faces]
    t = np.einsum("fai,fqad->fqid", X_e, dNs[faces])
    dA = np.linalg.norm(np.cross(t[..., 0], t[..., 1]), axis=-1) * W[None, :]
    return N, dA


def locate_point(mesh: MixedMesh, point, tol=1e-9, iters=20):
    """Element index and parametric coordinates of a reference point.

    Newton inversion of the geometry map is run on all elements at once; the
    first element whose solution lies inside the unit cube is returned.
    """
    point = np.asarray(point, dtype=float)
    X_e = mesh.nodes[mesh.elems_u]
    xi = np.full((mesh.n_elems, 3), 0.5)
    for _ in range(iters):
        N, dN = hex_basis(2, xi.reshape(-1, 3))
        x = np.einsum("ea,eai->ei", N, X_e)
        Jm = np.einsum("eai,eaj->eij", X_e, dN)
        with np.errstate(all="ignore"):
            step = np.linalg.solve(Jm, (point - x)[..., None])[..., 0]
        xi = np.clip(xi + step, -0.5, 1.5)
    N, _ = hex_basis(2, xi)
    err = np.linalg.norm(np.einsum("ea,eai->ei", N, X_e) - point, axis=1)
    inside = np.all((xi >= -tol) & (xi <= 1 + tol), axis=1) & (err <= 1e-9 * max(1.0, np.abs(point).max()))
    hits = np.flatnonzero(inside)
    if len(hits) == 0:
        raise ValueError(f"point {point} is outside the mesh")
    e = int(hits[0])
    return e, np.clip(xi[e], 0.0, 1.0)


def evaluate_at(mesh: MixedMesh, values, elem, xi):
    """Interpolate nodal (control-point) data ``values`` (N, ...) at ``(elem, xi)``."""
    N, _ = hex_basis(2, np.asarray(xi)[None, :])
    return np.tensordot(N[0], np.asarray(values)[mesh.elems_u[elem]], axes=(0, 0))
