"""Legacy ASCII VTK export of BQ2 solutions.

Bernstein control values are not point values, so every exported nodal
quantity is the field evaluated at the element's 3x3x3 Lagrange lattice
(parametric 0, 1/2, 1).  For the Greville-placed meshes used here the
lattice coincides with the control points in the reference configuration.
"""
from __future__ import annotations

import numpy as np

from .bezier import hex_basis

VTK_HEXAHEDRON = 12
VTK_TRIQUADRATIC_HEXAHEDRON = 29

# lattice index (i, j, k) of each VTK triquadratic node
_VTK27 = [
    (0, 0, 0), (2, 0, 0), (2, 2, 0), (0, 2, 0), (0, 0, 2), (2, 0, 2), (2, 2, 2), (0, 2, 2),
    (1, 0, 0), (2, 1, 0), (1, 2, 0), (0, 1, 0), (1, 0, 2), (2, 1, 2), (1, 2, 2), (0, 1, 2),
    (0, 0, 1), (2, 0, 1), (2, 2, 1), (0, 2, 1),
    (0, 1, 1), (2, 1, 1), (1, 0, 1), (1, 2, 1), (1, 1, 0), (1, 1, 2),
    (1, 1, 1),
]  # fmt: skip
VTK27_ORDER = np.array([i + 3 * j + 9 * k for i, j, k in _VTK27])

_HEX8 = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]


def _lattice_values(mesh, values):
    """Evaluate control-point data at the Lagrange lattice of every element and
    gather the result per global node (continuity makes the choice of element
    irrelevant)."""
    g = np.array([0.0, 0.5, 1.0])
    pts = np.array([(g[i], g[j], g[k]) for k in range(3) for j in range(3) for i in range(3)])
    N, _ = hex_basis(2, pts)  # (27 lattice, 27 control)
    vals = np.asarray(values)
    local = np.einsum("la,ea...->el...", N, vals[mesh.elems_u])
    out = np.zeros((mesh.n_nodes,) + vals.shape[1:])
    out[mesh.elems_u.ravel()] = local.reshape((-1,) + vals.shape[1:])
    return out


def _fmt(a):
    return " ".join(repr(float(v)) for v in np.ravel(a))


def write_vtk(path, model, state, mode="lagrange"):
    """Write ``state`` of ``model`` as an unstructured grid.

    ``mode='lagrange'`` writes one 27-node triquadratic cell per element,
    ``mode='subhex'`` splits every element into 8 trilinear hexahedra.
    Point data: ``u`` (and ``phi`` in soft problems); cell data: ``p`` at the
    element centre and the region tag.
    """
    mesh = model.mesh
    u, p, phi = model.dofs.split(state.x)
    X = _lattice_values(mesh, mesh.nodes)
    U = _lattice_values(mesh, u)
    PHI = None if phi is None else _lattice_values(mesh, phi)
    p_center = p[mesh.elems_p].mean(axis=1)

    if mode == "lagrange":
        cells = mesh.elems_u[:, VTK27_ORDER]
        ctype = VTK_TRIQUADRATIC_HEXAHEDRON
        owner = np.arange(mesh.n_elems)
    elif mode == "subhex":
        sub = []
        for ks in range(2):
            for js in range(2):
                for is_ in range(2):
                    sub.append([(is_ + i) + 3 * (js + j) + 9 * (ks + k) for i, j, k in _HEX8])
        sub = np.array(sub)  # (8, 8)
        cells = mesh.elems_u[:, sub].reshape(-1, 8)
        ctype = VTK_HEXAHEDRON
        owner = np.repeat(np.arange(mesh.n_elems), 8)
    else:
        raise ValueError(f"unknown VTK mode {mode!r}")

    npc = cells.shape[1]
    try:
        with open(path, "w") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write(f"mapfe t={state.t!r}\n")
            fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
            fh.write(f"POINTS {mesh.n_nodes} double\n")
            for x in X:
                fh.write(_fmt(x) + "\n")
            fh.write(f"CELLS {len(cells)} {len(cells) * (npc + 1)}\n")
            for c in cells:
                fh.write(f"{npc} " + " ".join(str(v) for v in c) + "\n")
            fh.write(f"CELL_TYPES {len(cells)}\n")
            fh.write("\n".join(str(ctype) for _ in cells) + "\n")
            fh.write(f"POINT_DATA {mesh.n_nodes}\n")
            fh.write("VECTORS u double\n")
            for v in U:
                fh.write(_fmt(v) + "\n")
            if PHI is not None:
                fh.write("SCALARS phi double 1\nLOOKUP_TABLE default\n")
                fh.write("\n".join(repr(float(v)) for v in PHI) + "\n")
            fh.write(f"CELL_DATA {len(cells)}\n")
            fh.write("SCALARS p double 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(repr(float(v)) for v in p_center[owner]) + "\n")
            fh.write("SCALARS region int 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(str(int(v)) for v in mesh.region_tags[owner]) + "\n")
    except OSError as exc:
        raise OSError(f"could not write VTK file {path}: {exc}") from exc
    return path


def read_vtk_points(path):
    """Point coordinates of a file written by :func:`write_vtk` (for round trips)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    i = next(k for k, ln in enumerate(lines) if ln.startswith("POINTS"))
    n = int(lines[i].split()[1])
    return np.array([[float(v) for v in ln.split()] for ln in lines[i + 1 : i + 1 + n]])
