"""Classical RK4 reference integrator for the semi-discrete Galerkin ODE system.

The block mass matrix is lower triangular (the phase row has no temperature
derivative), so every right-hand-side evaluation solves the phase system
first and feeds its result into the heat system. Mass solves use banded Cholesky
factorizations (sparse LU when the node ordering is not banded), a path
independent of the stepper's conjugate gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssembledOperators, BoundaryLoad, ModelParams
from .diagnostics import h1_norm_phi, l2_norm_u
from .state import FieldState


class OracleBlowUp(FloatingPointError):
    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class MeshMismatchError(ValueError):
    pass


class MassSolver:
    """Direct solver for a fixed SPD mass matrix."""

    def __init__(self, A: sp.spmatrix):
        A = sp.csr_matrix(A)
        coo = A.tocoo()
        bw = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
        n = A.shape[0]
        if bw < max(8, n // 8):
            ab = np.zeros((bw + 1, n))
            upper = coo.row <= coo.col
            ab[bw + coo.row[upper] - coo.col[upper], coo.col[upper]] = coo.data[upper]
            self._chol = sla.cholesky_banded(ab)
            self._pbtrs = sla.get_lapack_funcs("pbtrs", (self._chol,))
            self._lu = None
        else:
            self._chol = None
            self._lu = spla.splu(A.tocsc())

    def solve(self, b):
        if self._chol is not None:
            x, info = self._pbtrs(self._chol, b, lower=0)
            if info != 0:
                raise np.linalg.LinAlgError(f"banded triangular solve failed (info={info})")
            return x
        return self._lu.solve(b)


@dataclass
class OdeSystem:
    ops: AssembledOperators
    params: ModelParams
    g: object
    cubic: bool = True
    _lu_U: object = field(init=False, repr=False)
    _lu_O: object = field(init=False, repr=False)

    def __post_init__(self):
        o, p = self.ops, self.params
        self._lu_U = MassSolver(o.mass_U)
        self._lu_O = MassSolver(p.tau * o.mass_O)
        # linear parts as single block operators acting on stacked vectors
        self._phase = sp.hstack([2.0 * o.couple_M, -(p.xi**2) * o.stiff_O]).tocsr()
        self._heat = sp.hstack([-(o.stiff_U + p.lambda_bc * o.bmass_U),
                                -0.5 * p.latent_l * o.couple_M.T]).tocsr()
        self._load = BoundaryLoad(o.mesh, p.lambda_bc)
        self._loads: dict[float, np.ndarray] = {}

    def boundary_load(self, t):
        # RK4 revisits the midpoint within a substep and the endpoint in the next
        if t not in self._loads:
            if len(self._loads) >= 4:
                self._loads.pop(next(iter(self._loads)))
            self._loads[t] = self._load(self.g, t)
        return self._loads[t]

    def rhs(self, u: np.ndarray, phi: np.ndarray, t: float):
        o, p = self.ops, self.params
        well = phi**3 - phi if self.cubic else -phi
        f_phi = self._phase @ np.concatenate([u, phi]) - 0.5 * o.lumped_O * well
        phi_dot = self._lu_O.solve(f_phi)
        f_u = self._heat @ np.concatenate([u, phi_dot])
        if p.lambda_bc != 0.0:
            f_u += self.boundary_load(t)
        return self._lu_U.solve(f_u), phi_dot


def reference_integrate(initial: FieldState, n_substeps: float, params: ModelParams, ops: AssembledOperators,
                        g, sample_dt: float | None = None, cubic: bool = True) -> list[FieldState]:
    """Integrate on ``[initial.t, t_end]`` with RK4 at ``n_substeps`` substeps per unit time.

    States are recorded every ``sample_dt`` (default: every substep); the
    substep is shrunk so that it divides each sampling interval exactly. The
    ``phi_dot`` of a recorded state is the exact vector-field value there.
    """
    system = OdeSystem(ops, params, g, cubic)
    t0, t_end = initial.t, params.t_end
    h_req = 1.0 / n_substeps
    sample_dt = h_req if sample_dt is None else sample_dt
    n_samples = max(1, math.ceil((t_end - t0) / sample_dt - 1e-9))
    per_sample = max(1, math.ceil(sample_dt / h_req - 1e-9))

    u, phi = initial.u.copy(), initial.phi.copy()
    _, pd0 = system.rhs(u, phi, t0)
    traj = [FieldState(t0, u.copy(), phi.copy(), pd0)]
    for s in range(1, n_samples + 1):
        ta = t0 + (s - 1) * sample_dt
        tb = t_end if s == n_samples else t0 + s * sample_dt
        h = (tb - ta) / per_sample
        for k in range(per_sample):
            # stage times built from the same expression so boundary loads are reused
            t, tm, te = ta + k * h, ta + (k + 0.5) * h, (ta + (k + 1) * h if k + 1 < per_sample else tb)
            k1u, k1p = system.rhs(u, phi, t)
            k2u, k2p = system.rhs(u + 0.5 * h * k1u, phi + 0.5 * h * k1p, tm)
            k3u, k3p = system.rhs(u + 0.5 * h * k2u, phi + 0.5 * h * k2p, tm)
            k4u, k4p = system.rhs(u + h * k3u, phi + h * k3p, te)
            u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
            phi = phi + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(phi))):
                raise OracleBlowUp(f"reference solution became non-finite at t={te:.6g}", te)
        _, pd = system.rhs(u, phi, tb)
        traj.append(FieldState(tb, u.copy(), phi.copy(), pd))
    return traj


@dataclass(frozen=True)
class ErrorReport:
    l2_u: float
    h1_phi: float
    combined: float
    n_frames: int


def _frame_at(traj, t, tol):
    times = np.array([s.t for s in traj])
    i = int(np.argmin(np.abs(times - t)))
    if abs(times[i] - t) <= tol:
        return traj[i]
    j = int(np.searchsorted(times, t))
    if j == 0 or j >= len(traj):
        raise ValueError(f"time {t} outside trajectory range [{times[0]}, {times[-1]}]")
    a, b = traj[j - 1], traj[j]
    w = (t - a.t) / (b.t - a.t)
    return FieldState(t, (1 - w) * a.u + w * b.u, (1 - w) * a.phi + w * b.phi)


def compare_trajectories(a: list[FieldState], b: list[FieldState], ops: AssembledOperators) -> ErrorReport:
    """Sup-in-time ``L2(U)`` and ``H1(Omega)`` differences at the frames of ``a``.

    ``b`` is matched by time, with linear interpolation between its frames.
    """
    n_u, n_o = ops.mesh.n_nodes, ops.mesh.n_omega
    for traj in (a, b):
        for s in (traj[0], traj[-1]):
            if s.u.shape != (n_u,) or s.phi.shape != (n_o,):
                raise MeshMismatchError("trajectory does not live on the operators' mesh")
    tol = 1e-9 * max(1.0, abs(a[-1].t))
    eu = ep = ec = 0.0
    for sa in a:
        sb = _frame_at(b, sa.t, tol)
        du = l2_norm_u(sa.u - sb.u, ops)
        dp = h1_norm_phi(sa.phi - sb.phi, ops)
        eu, ep, ec = max(eu, du), max(ep, dp), max(ec, du + dp)
    return ErrorReport(eu, ep, ec, len(a))
