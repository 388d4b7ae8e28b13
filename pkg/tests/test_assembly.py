import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from phasefield.assembly import (
    BoundaryEvaluationError, ModelParams, assemble_boundary_load, assemble_operators, boundary_l2_norm,
    element_mass, element_stiffness, project_initial_data,
)
from phasefield.geometry import MEDIUM, MeshSpec, build_nested_rect_mesh

UNIT_TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def test_element_mass_unit_triangle():
    expected = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0
    assert np.max(np.abs(element_mass(UNIT_TRI)[0] - expected)) <= 1e-14


def test_element_stiffness_unit_triangle():
    expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    assert np.max(np.abs(element_stiffness(UNIT_TRI, 1.0)[0] - expected)) <= 1e-14


def _per_element_energy(mesh, coef, v, w):
    """sum_T k_T |T| grad v_h . grad w_h, gradients from the nodal plane through each triangle."""
    total = 0.0
    for t, tri in enumerate(mesh.triangles):
        p = mesh.nodes[tri]
        A = np.column_stack([p, np.ones(3)])
        gv = np.linalg.solve(A, v[tri])[:2]
        gw = np.linalg.solve(A, w[tri])[:2]
        area = 0.5 * abs(np.linalg.det(np.column_stack([p[1] - p[0], p[2] - p[0]])))
        total += coef[t] * area * gv @ gw
    return total


def test_operator_symmetry_and_definiteness(small_ops):
    o = small_ops
    for name in ("mass_U", "stiff_U", "bmass_U", "mass_O", "stiff_O"):
        m = getattr(o, name)
        assert sp.isspmatrix_csr(m)
        assert abs(m - m.T).max() <= 1e-15 * abs(m).max()
    for m in (o.mass_U, o.mass_O):
        assert np.linalg.eigvalsh(m.toarray()).min() > 0
    for m in (o.stiff_U, o.stiff_O, o.bmass_U):
        assert np.linalg.eigvalsh(m.toarray()).min() > -1e-12


def test_stiffness_kernel_is_constants(small_ops):
    o = small_ops
    assert np.abs(o.stiff_U @ np.ones(o.mesh.n_nodes)).max() <= 1e-13
    assert np.abs(o.stiff_O @ np.ones(o.mesh.n_omega)).max() <= 1e-13


def test_coupling_row_sums_match_medium_mass(small_ops):
    o = small_ops
    a = o.couple_M @ np.ones(o.mesh.n_nodes)
    b = o.mass_O @ np.ones(o.mesh.n_omega)
    assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()
    assert a.sum() == pytest.approx(0.25, rel=1e-12)


def test_coupling_is_medium_mass_in_container_numbering(small_ops):
    o = small_ops
    m = o.couple_M[:, o.mesh.u_of_omega]
    assert abs(m - o.mass_O).max() <= 1e-15
    wall_only = np.nonzero(o.mesh.omega_of_u < 0)[0]
    assert abs(o.couple_M[:, wall_only]).max() == 0


@given(st.integers(0, 2**32 - 1))
def test_galerkin_consistency(seed):
    mesh = build_nested_rect_mesh(MeshSpec(1.0, 0.8, 0.2, 0.2))
    params = ModelParams(1.7, 0.3, 1.0, 0.005, 0.03, 1.0, 1.0)
    o = assemble_operators(mesh, params)
    rng = np.random.default_rng(seed)
    v, w = rng.standard_normal((2, mesh.n_nodes))
    coef = np.where(mesh.tri_region == MEDIUM, 1.7, 0.3)
    ref = _per_element_energy(mesh, coef, v, w)
    assert v @ (o.stiff_U @ w) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_scaling_in_k_and_lambda(small_mesh, params):
    o1 = assemble_operators(small_mesh, params)
    o2 = assemble_operators(small_mesh, dataclasses.replace(params, k_omega=2 * params.k_omega,
                                                            k_wall=2 * params.k_wall, lambda_bc=2 * params.lambda_bc))
    assert abs(o2.stiff_U - 2 * o1.stiff_U).max() == 0
    g = lambda x, y, t: np.sin(x) + y * t  # noqa: E731
    l1 = assemble_boundary_load(small_mesh, params, g, 0.3)
    l2 = assemble_boundary_load(small_mesh, dataclasses.replace(params, lambda_bc=2 * params.lambda_bc), g, 0.3)
    assert np.array_equal(l2, 2 * l1)
    # bmass is lambda-free; the Robin term lambda * bmass doubles with lambda
    assert abs(o2.bmass_U - o1.bmass_U).max() == 0


def test_boundary_load_examples(small_mesh, params):
    p1 = dataclasses.replace(params, lambda_bc=1.0)
    zero = assemble_boundary_load(small_mesh, p1, lambda x, y, t: np.zeros_like(x), 0.0)
    assert np.all(zero == 0)
    one = assemble_boundary_load(small_mesh, p1, lambda x, y, t: np.ones_like(x), 0.0)
    assert one.sum() == pytest.approx(4.0, rel=1e-14)
    c = 3.7
    p2 = dataclasses.replace(params, lambda_bc=2.0)
    lc = assemble_boundary_load(small_mesh, p2, lambda x, y, t: np.full_like(x, c), 0.0)
    assert np.allclose(lc, 2 * c * one, rtol=1e-14, atol=0)


def test_boundary_load_exact_for_linear_traces(small_ops, small_mesh, params):
    # linear g: load equals lambda * bmass @ nodal values
    g = lambda x, y, t: 2.0 * x - 3.0 * y + t  # noqa: E731
    load = assemble_boundary_load(small_mesh, params, g, 0.5)
    nodal = g(small_mesh.nodes[:, 0], small_mesh.nodes[:, 1], 0.5)
    assert np.allclose(load, params.lambda_bc * (small_ops.bmass_U @ nodal), rtol=0, atol=1e-13)


def test_boundary_failure_names_position_and_time(small_mesh, params):
    def bad(x, y, t):
        out = np.zeros_like(x)
        out[3] = np.nan
        return out
    with pytest.raises(BoundaryEvaluationError, match=r"position \(.*\), t=0.25"):
        assemble_boundary_load(small_mesh, params, bad, 0.25)


def test_boundary_l2_norm_of_constant(small_mesh):
    assert boundary_l2_norm(small_mesh, lambda x, y: np.full_like(x, 2.0)) == pytest.approx(4.0, rel=1e-14)


def test_projection_reproduces_constants(small_mesh, small_ops):
    s = project_initial_data(small_mesh, small_ops, lambda x, y: np.full_like(x, 0.3),
                             lambda x, y: np.ones_like(x))
    assert np.abs(s.u - 0.3).max() <= 1e-10
    assert np.abs(s.phi - 1.0).max() <= 1e-10
    assert s.t == 0 and np.all(s.phi_dot == 0)


def test_projection_reproduces_linear_functions(small_mesh, small_ops):
    s = project_initial_data(small_mesh, small_ops, lambda x, y: x, lambda x, y: 1.0 - 2.0 * y)
    assert np.abs(s.u - small_mesh.nodes[:, 0]).max() <= 1e-10
    y_med = small_mesh.nodes[small_mesh.u_of_omega, 1]
    assert np.abs(s.phi - (1.0 - 2.0 * y_med)).max() <= 1e-9


def test_projection_residuals(small_mesh, small_ops):
    f = lambda x, y: np.exp(x) * np.cos(3 * y)  # noqa: E731
    s = project_initial_data(small_mesh, small_ops, f, f)
    from phasefield.assembly import load_vector
    r = small_ops.mass_U @ s.u - load_vector(small_mesh, f)
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(small_ops.mass_U @ s.u)


def test_params_problems():
    bad = ModelParams(0.0, 1.0, -1.0, 0.005, 0.03, -2.0, 1.0)
    msgs = bad.problems()
    assert any(m.startswith("k_omega") for m in msgs)
    assert any(m.startswith("latent_l") for m in msgs)
    assert any(m.startswith("lambda_bc") for m in msgs)
    with pytest.raises(ValueError):
        bad.validate()


def test_dump_coo(tmp_path, small_ops):
    small_ops.dump_coo(tmp_path)
    data = np.loadtxt(tmp_path / "mass_U.coo")
    m = sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                      shape=small_ops.mass_U.shape)
    assert abs(m - small_ops.mass_U).max() == 0


def test_element_matrices_ignore_orientation():
    flipped = UNIT_TRI[::-1]
    assert np.allclose(element_mass(flipped)[0], element_mass(UNIT_TRI)[0][::-1, ::-1], atol=1e-15)
    assert np.allclose(element_stiffness(flipped)[0], element_stiffness(UNIT_TRI)[0][::-1, ::-1], atol=1e-15)
