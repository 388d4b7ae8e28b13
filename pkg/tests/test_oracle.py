import dataclasses

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from phasefield.assembly import ModelParams, assemble_boundary_load, assemble_operators
from phasefield.boundary import ConstantBoundary
from phasefield.geometry import MeshSpec, build_nested_rect_mesh
from phasefield.oracle import (
    MeshMismatchError, OdeSystem, OracleBlowUp, compare_trajectories, reference_integrate,
)
from phasefield.state import FieldState

from conftest import zero_g


def test_equilibrium_is_constant(small_mesh, small_ops, params):
    p = dataclasses.replace(params, t_end=0.01)
    s0 = FieldState(0.0, np.zeros(small_mesh.n_nodes), np.ones(small_mesh.n_omega))
    traj = reference_integrate(s0, 20000, p, small_ops, zero_g)
    for s in traj:
        assert np.abs(s.u).max() <= 1e-12 and np.abs(s.phi - 1).max() <= 1e-12


def test_uniform_reduction_matches_scalar_ode():
    mesh = build_nested_rect_mesh(MeshSpec(1.0, 1.0, 0.0, 0.25))
    params = ModelParams(1.0, 1.0, 1.3, 0.005, 0.03, 0.0, 0.05)
    ops = assemble_operators(mesh, params)
    s0 = FieldState(0.0, np.zeros(mesh.n_nodes), np.full(mesh.n_omega, 0.5))
    traj = reference_integrate(s0, 1e5, params, ops, zero_g, sample_dt=0.01)

    def f(t, y):
        u, phi = y
        phi_t = (2 * u + 0.5 * (phi - phi**3)) / params.tau
        return [-0.5 * params.latent_l * phi_t, phi_t]

    times = [s.t for s in traj]
    ref = solve_ivp(f, (0, params.t_end), [0.0, 0.5], method="DOP853", t_eval=times, rtol=1e-13, atol=1e-15)
    for s, (u, phi) in zip(traj, ref.y.T):
        assert np.abs(s.u - u).max() <= 1e-10
        assert np.abs(s.phi - phi).max() <= 1e-10


@pytest.mark.parametrize("spec", [MeshSpec(1.0, 1.0, 0.0, 1.0), MeshSpec(3.0, 3.0, 1.0, 1.0)])
def test_linear_subproblem_matches_matrix_exponential(spec):
    mesh = build_nested_rect_mesh(spec)
    params = ModelParams(1.0, 0.4, 0.8, 0.05, 0.3, 2.0, 0.2)
    ops = assemble_operators(mesh, params)
    n, m = mesh.n_nodes, mesh.n_omega
    c = -0.7
    g = ConstantBoundary(c)
    # block mass E y' = A y + f with y = (u, phi), f constant
    E = np.block([[ops.mass_U.toarray(), 0.5 * params.latent_l * ops.couple_M.T.toarray()],
                  [np.zeros((m, n)), params.tau * ops.mass_O.toarray()]])
    A = np.block([[-(ops.stiff_U + params.lambda_bc * ops.bmass_U).toarray(), np.zeros((n, m))],
                  [2.0 * ops.couple_M.toarray(), -params.xi**2 * ops.stiff_O.toarray() + 0.5 * np.diag(ops.lumped_O)]])
    f = np.concatenate([assemble_boundary_load(mesh, params, g, 0.0), np.zeros(m)])
    G = np.linalg.solve(E, A)
    h = np.linalg.solve(E, f)
    aug = np.zeros((n + m + 1, n + m + 1))
    aug[:-1, :-1], aug[:-1, -1] = G, h

    rng = np.random.default_rng(3)
    y0 = rng.uniform(-1, 1, n + m)
    s0 = FieldState(0.0, y0[:n], y0[n:])
    traj = reference_integrate(s0, 2e4, params, ops, g, sample_dt=0.05, cubic=False)
    for s in traj:
        y = (sla.expm(aug * s.t) @ np.append(y0, 1.0))[:-1]
        assert np.abs(s.u - y[:n]).max() <= 1e-10
        assert np.abs(s.phi - y[n:]).max() <= 1e-10


def test_rhs_is_deterministic(small_mesh, small_ops, params):
    sys_ = OdeSystem(small_ops, params, ConstantBoundary(-1.0))
    u = np.linspace(-1, 1, small_mesh.n_nodes)
    phi = np.cos(np.arange(small_mesh.n_omega))
    a = sys_.rhs(u, phi, 0.1)
    b = sys_.rhs(u, phi, 0.1)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_rhs_mass_solves_meet_tolerance(small_mesh, small_ops, params):
    sys_ = OdeSystem(small_ops, params, ConstantBoundary(-1.0))
    u = np.linspace(-1, 1, small_mesh.n_nodes)
    phi = np.sin(np.arange(small_mesh.n_omega))
    du, dphi = sys_.rhs(u, phi, 0.1)
    f_phi = -params.xi**2 * (small_ops.stiff_O @ phi) - 0.5 * small_ops.lumped_O * (phi**3 - phi) \
        + 2 * (small_ops.couple_M @ u)
    r = params.tau * (small_ops.mass_O @ dphi) - f_phi
    assert np.linalg.norm(r) <= 1e-12 * np.linalg.norm(f_phi)


def test_blow_up_reports_time(small_mesh, small_ops, params):
    s0 = FieldState(0.0, np.zeros(small_mesh.n_nodes), np.full(small_mesh.n_omega, 0.5))
    with np.errstate(all="ignore"), pytest.raises(OracleBlowUp, match="t=") as info:
        reference_integrate(s0, 10, params, small_ops, ConstantBoundary(-1.0))
    assert 0 < info.value.t <= params.t_end


def test_compare_identical_and_shifted(small_mesh, small_ops, params):
    s0 = FieldState(0.0, np.ones(small_mesh.n_nodes), np.ones(small_mesh.n_omega))
    traj = [FieldState(0.01 * k, s0.u, s0.phi) for k in range(6)]
    rep = compare_trajectories(traj, traj, small_ops)
    assert rep.l2_u == rep.h1_phi == rep.combined == 0.0
    shifted = [FieldState(s.t + 0.01, s.u, s.phi) for s in traj]
    rep = compare_trajectories(traj[1:], shifted[:-1], small_ops)
    assert rep.combined == 0.0


def test_compare_interpolates_between_frames(small_mesh, small_ops):
    u = np.ones(small_mesh.n_nodes)
    phi = np.ones(small_mesh.n_omega)
    a = [FieldState(0.0, 0 * u, 0 * phi), FieldState(0.5, 0.5 * u, 0.5 * phi), FieldState(1.0, u, phi)]
    b = [FieldState(0.0, 0 * u, 0 * phi), FieldState(1.0, u, phi)]
    assert compare_trajectories(a, b, small_ops).combined <= 1e-15


def test_compare_mesh_mismatch(small_ops, box_mesh):
    s = FieldState(0.0, np.zeros(box_mesh.n_nodes), np.zeros(box_mesh.n_omega))
    with pytest.raises(MeshMismatchError):
        compare_trajectories([s], [s], small_ops)
