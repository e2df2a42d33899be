import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mapfe.bezier import (
    CORNERS,
    ElementRule,
    bernstein1d,
    element_kernel,
    evaluate_at,
    face_quadrature,
    gauss_rule,
    hex_basis,
    locate_point,
    patch_hex_mesh,
    read_mesh,
    structured_hex_mesh,
    write_mesh,
)
from mapfe.constitutive import MaterialSpec
from mapfe.errors import NonPositiveJacobian, UnsupportedDegree, UnsupportedRule

RULE = ElementRule(3)


def test_bernstein_examples():
    N, _ = bernstein1d(2, 0.0)
    np.testing.assert_array_equal(N, [1.0, 0.0, 0.0])
    N, _ = bernstein1d(2, 0.5)
    np.testing.assert_allclose(N, [0.25, 0.5, 0.25])
    N, dN = bernstein1d(1, 0.3)
    np.testing.assert_allclose(N, [0.7, 0.3])
    np.testing.assert_array_equal(dN, [-1.0, 1.0])
    with pytest.raises(UnsupportedDegree):
        bernstein1d(3, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([1, 2]))
def test_partition_of_unity(seed, degree):
    xi = np.random.default_rng(seed).random((1000, 3))
    N, dN = hex_basis(degree, xi)
    np.testing.assert_allclose(N.sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(dN.sum(axis=1), 0.0, atol=1e-13)


def test_gauss_rule():
    pts, w = gauss_rule(2)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    pts, w = gauss_rule(3)
    assert len(w) == 27
    for d in range(3):
        assert w @ pts[:, d] ** 5 == pytest.approx(1.0 / 6.0, abs=1e-14)
    with pytest.raises(UnsupportedRule):
        gauss_rule(5)


def test_structured_mesh_counts():
    m = structured_hex_mesh((1, 1, 1), (1, 1, 1))
    assert (m.n_nodes, m.n_elems, m.n_pnodes) == (27, 1, 8)
    m = structured_hex_mesh((17.2, 0.84, 5.0), (8, 1, 4))
    assert m.n_nodes == 17 * 3 * 9 == 459
    assert m.n_elems == 32 and m.n_pnodes == 9 * 2 * 5
    np.testing.assert_allclose(m.nodes.max(axis=0), [17.2, 0.84, 5.0])
    # corners of each BQ2 element are the nodes of its BQ1 element
    np.testing.assert_array_equal(m.p_nodes[m.elems_p], m.elems_u[:, CORNERS])
    assert set(m.face_sets) == {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"}
    m.check()


def test_face_sets_lie_on_their_planes():
    m = structured_hex_mesh((2.0, 1.0, 3.0), (2, 1, 3))
    for name, axis, val in [("xmin", 0, 0.0), ("xmax", 0, 2.0), ("zmax", 2, 3.0)]:
        np.testing.assert_allclose(m.nodes[m.set_nodes(name), axis], val)


def test_inverted_element_detected():
    m = structured_hex_mesh((1, 1, 1), (1, 1, 1))
    m.nodes[:, 0] *= -1.0
    with pytest.raises(NonPositiveJacobian):
        m.check()


def test_patch_mesh_merges_shared_edges():
    quads = [[(0, 0), (1, 0), (1, 1), (0, 1)], [(1, 0), (2, 0), (2, 1), (1, 1)]]
    m = patch_hex_mesh(quads, [(1, 1), (1, 1)], [(0.5, 1, 0), (0.5, 1, 3)])
    ref = structured_hex_mesh((2, 1, 1), (2, 1, 2))
    assert m.n_nodes == ref.n_nodes and m.n_elems == 4
    assert sorted(set(m.region_tags.tolist())) == [0, 3]


def test_mesh_text_round_trip(tmp_path):
    m = structured_hex_mesh((1.5, 1.0, 0.5), (2, 1, 1))
    m.region_tags[1] = 4
    m.add_node_set_where("corner", lambda X: np.linalg.norm(X, axis=1) < 1e-12)
    path = tmp_path / "m.txt"
    write_mesh(m, path)
    r = read_mesh(path)
    np.testing.assert_array_equal(r.nodes, m.nodes)
    np.testing.assert_array_equal(r.elems_u, m.elems_u)
    np.testing.assert_array_equal(r.region_tags, m.region_tags)
    assert set(r.face_sets) == set(m.face_sets)
    np.testing.assert_array_equal(r.set_nodes("corner"), m.set_nodes("corner"))


def test_read_mesh_rejects_other_files(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("not a mesh\n")
    with pytest.raises(ValueError):
        read_mesh(p)


def test_locate_and_evaluate():
    m = structured_hex_mesh((2.0, 1.0, 1.0), (2, 1, 1))
    e, xi = locate_point(m, (1.5, 0.25, 0.75))
    assert e == 1
    np.testing.assert_allclose(xi, [0.5, 0.25, 0.75], atol=1e-12)
    # affine data on Greville control points is reproduced exactly
    f = m.nodes @ np.array([1.0, -2.0, 0.5]) + 3.0
    assert evaluate_at(m, f, e, xi) == pytest.approx(1.5 - 0.5 + 0.375 + 3.0, abs=1e-13)
    with pytest.raises(ValueError):
        locate_point(m, (5.0, 0.0, 0.0))


# --- element kernel -----------------------------------------------------------


def _unit_element():
    m = structured_hex_mesh((1, 1, 1), (1, 1, 1))
    return m.nodes[m.elems_u]


def test_reference_state_has_zero_residual():
    X = _unit_element()
    b = element_kernel(X, np.zeros_like(X), np.zeros((1, 8)), MaterialSpec(mu=10.0), RULE)
    np.testing.assert_allclose(b.R_u, 0.0, atol=1e-13)
    np.testing.assert_allclose(b.R_p, 0.0, atol=1e-13)
    np.testing.assert_array_equal(b.K_pp, 0.0)


def test_constant_pressure_equals_surface_force():
    X = _unit_element()
    p0 = 2.5
    b = element_kernel(X, np.zeros_like(X), np.full((1, 8), p0), MaterialSpec(mu=10.0), RULE)
    expected = np.zeros((27, 3))
    N, dA = face_quadrature(np.repeat(X, 6, axis=0), np.arange(6))
    normals = np.array([[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]], float)
    for f in range(6):
        expected += p0 * np.einsum("q,qa,i->ai", dA[f], N[f], normals[f])
    np.testing.assert_allclose(b.R_u[0].reshape(27, 3), expected, atol=1e-13)
    assert np.abs(b.R_u[0].reshape(27, 3).sum(axis=0)).max() < 1e-13


def test_rigid_translation_nullity():
    rng = np.random.default_rng(1)
    X = _unit_element()
    X = X + 0.05 * rng.standard_normal(X.shape) * (X > 0) * (X < 1)
    u = 0.08 * rng.standard_normal(X.shape)
    spec = MaterialSpec(mu=3.0)
    p = rng.standard_normal((1, 8))
    b0 = element_kernel(X, u, p, spec, RULE)
    b1 = element_kernel(X, u + np.array([0.3, -1.2, 0.7]), p, spec, RULE)
    np.testing.assert_allclose(b1.R_u, b0.R_u, atol=1e-12)
    t = np.tile(np.eye(3), 27).T  # (81, 3): translations
    np.testing.assert_allclose(t.T @ b0.K_up[0], 0.0, atol=1e-12)
    np.testing.assert_allclose(b0.K_uu[0] @ t, 0.0, atol=1e-10 * np.abs(b0.K_uu).max())


def test_element_blocks_symmetry_and_soft_pairing():
    rng = np.random.default_rng(2)
    X = _unit_element()
    u = 0.05 * rng.standard_normal(X.shape)
    phi = rng.standard_normal((1, 27))
    spec = MaterialSpec(mu=3.0, magnetic_mode="soft", mu0=1.0)
    b = element_kernel(X, u, rng.standard_normal((1, 8)), spec, RULE, phi_e=phi)
    K = b.K_uu[0]
    assert np.abs(K - K.T).max() <= 1e-9 * np.abs(K).max()
    np.testing.assert_allclose(b.K_uphi[0], b.K_phiu[0].T, atol=1e-10 * np.abs(b.K_uphi).max())
    Kff = b.K_phiphi[0]
    np.testing.assert_allclose(Kff, Kff.T, atol=1e-12 * np.abs(Kff).max())
    assert b.full_matrix().shape == (1, 116, 116)


def test_compressible_pressure_block():
    X = _unit_element()
    spec = MaterialSpec(mu=3.0, incompressible=False, kappa=100.0)
    b = element_kernel(X, np.zeros_like(X), np.zeros((1, 8)), spec, RULE, J_n=np.ones((1, RULE.nq)))
    # -theta_hat * int Np Np dV with theta_hat = 1/kappa
    M = np.einsum("q,qa,qb->ab", RULE.w, RULE.Np, RULE.Np)
    np.testing.assert_allclose(b.K_pp[0], -M / 100.0, atol=1e-15)
