"""P1 assembly of the bilinear and linear forms of the two-domain weak problem.

All matrices are CSR. Container quantities are indexed by mesh node, medium
quantities by ``mesh.omega_of_u``. The medium basis functions are the
restrictions of the container hat functions, so the coupling matrix
``couple_M[i, j] = int_Omega omega_i zeta_j`` is a medium mass matrix with
container column numbering.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .geometry import MEDIUM, OUTER, Mesh
from .linalg import solve_spd
from .state import FieldState


@dataclass(frozen=True)
class ModelParams:
    k_omega: float
    k_wall: float
    latent_l: float
    tau: float
    xi: float
    lambda_bc: float
    t_end: float

    def problems(self) -> list[str]:
        out = []
        for name in ("k_omega", "k_wall", "tau", "xi", "t_end"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                out.append(f"{name} must be positive, got {v}")
        for name in ("lambda_bc", "latent_l"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                out.append(f"{name} must be non-negative, got {v}")
        return out

    def validate(self) -> "ModelParams":
        p = self.problems()
        if p:
            raise ValueError("invalid model parameters: " + "; ".join(p))
        return self


@dataclass(frozen=True, eq=False)
class AssembledOperators:
    mass_U: sp.csr_matrix
    stiff_U: sp.csr_matrix
    bmass_U: sp.csr_matrix
    mass_O: sp.csr_matrix
    stiff_O: sp.csr_matrix
    couple_M: sp.csr_matrix
    lumped_O: np.ndarray
    mesh: Mesh
    params: ModelParams

    @property
    def area_O(self) -> float:
        return float(self.lumped_O.sum())

    def dump_coo(self, directory) -> None:
        """Write every matrix as ``row col value`` text for debugging."""
        from pathlib import Path

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for f in fields(self):
            m = getattr(self, f.name)
            if sp.issparse(m):
                c = m.tocoo()
                np.savetxt(d / f"{f.name}.coo", np.column_stack([c.row, c.col, c.data]),
                           fmt=["%d", "%d", "%.17g"], header=f"{m.shape[0]} {m.shape[1]}")


# ---------------------------------------------------------------------------
# element kernels

def element_geometry(coords: np.ndarray):
    """Unsigned areas and barycentric gradients for an ``(nt, 3, 2)`` array of vertices."""
    x, y = coords[..., 0], coords[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * np.abs(det)
    grads = np.empty(coords.shape, dtype=float)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = (y[:, j] - y[:, k]) / det
        grads[:, i, 1] = (x[:, k] - x[:, j]) / det
    return area, grads


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def element_mass(coords: np.ndarray) -> np.ndarray:
    area, _ = element_geometry(np.atleast_3d(coords).reshape(-1, 3, 2))
    return area[:, None, None] * _MASS_REF


def element_stiffness(coords: np.ndarray, coef=1.0) -> np.ndarray:
    area, g = element_geometry(np.atleast_3d(coords).reshape(-1, 3, 2))
    coef = np.broadcast_to(np.asarray(coef, dtype=float), area.shape)
    return (coef * area)[:, None, None] * np.einsum("eid,ejd->eij", g, g)


def _scatter(local: np.ndarray, rows: np.ndarray, cols: np.ndarray, shape) -> sp.csr_matrix:
    r = np.repeat(rows, 3, axis=1).ravel()
    c = np.tile(cols, (1, 3)).ravel()
    m = sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def conductivity(mesh: Mesh, params: ModelParams) -> np.ndarray:
    return np.where(mesh.tri_region == MEDIUM, params.k_omega, params.k_wall)


def stiffness_matrix(mesh: Mesh, coef=1.0) -> sp.csr_matrix:
    n = mesh.n_nodes
    coords = mesh.nodes[mesh.triangles]
    return _scatter(element_stiffness(coords, coef), mesh.triangles, mesh.triangles, (n, n))


def assemble_operators(mesh: Mesh, params: ModelParams) -> AssembledOperators:
    params.validate()
    n, no = mesh.n_nodes, mesh.n_omega
    tri = mesh.triangles
    coords = mesh.nodes[tri]
    me = element_mass(coords)

    mass_U = _scatter(me, tri, tri, (n, n))
    stiff_U = stiffness_matrix(mesh, conductivity(mesh, params))

    med = mesh.tri_region == MEDIUM
    tri_O = mesh.omega_of_u[tri[med]]
    me_O = me[med]
    mass_O = _scatter(me_O, tri_O, tri_O, (no, no))
    stiff_O = _scatter(element_stiffness(coords[med]), tri_O, tri_O, (no, no))
    couple_M = _scatter(me_O, tri_O, tri[med], (no, n))

    outer = mesh.edges_with_tag(OUTER)
    elen = np.linalg.norm(mesh.nodes[outer[:, 1]] - mesh.nodes[outer[:, 0]], axis=1)
    be = elen[:, None, None] * (np.ones((2, 2)) + np.eye(2)) / 6.0
    r = np.repeat(outer, 2, axis=1).ravel()
    c = np.tile(outer, (1, 2)).ravel()
    bmass_U = sp.coo_matrix((be.ravel(), (r, c)), shape=(n, n)).tocsr()
    bmass_U.sum_duplicates()
    bmass_U.sort_indices()

    lumped_O = np.asarray(mass_O.sum(axis=1)).ravel()
    return AssembledOperators(mass_U, stiff_U, bmass_U, mass_O, stiff_O, couple_M, lumped_O, mesh, params)


# ---------------------------------------------------------------------------
# boundary data and loads

BoundaryData = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

_GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


class BoundaryEvaluationError(RuntimeError):
    pass


def _eval_boundary(g: BoundaryData, x, y, t):
    try:
        val = np.broadcast_to(np.asarray(g(x, y, t), dtype=float), x.shape)
    except Exception as exc:
        raise BoundaryEvaluationError(
            f"boundary data failed at t={t!r} on points starting at ({x.flat[0]:.6g}, {y.flat[0]:.6g}): {exc}"
        ) from exc
    bad = np.nonzero(~np.isfinite(val))[0]
    if bad.size:
        i = bad[0]
        raise BoundaryEvaluationError(
            f"boundary data is not finite at position ({x[i]:.6g}, {y[i]:.6g}), t={t!r}"
        )
    return val


class BoundaryLoad:
    """Precomputed two-point Gauss quadrature on the outer edges.

    ``loader(g, t)`` returns ``lambda * int_{dU} g(., t) zeta_i`` for every
    container node; exact whenever the trace of ``g`` is linear on each edge.
    """

    def __init__(self, mesh: Mesh, lambda_bc: float):
        outer = mesh.edges_with_tag(OUTER)
        pa = mesh.nodes[outer[:, 0]]
        pb = mesh.nodes[outer[:, 1]]
        elen = np.linalg.norm(pb - pa, axis=1)
        pts, rows, cols, vals = [], [], [], []
        ne = len(outer)
        for k, s in enumerate(_GAUSS2):
            pts.append((1 - s) * pa + s * pb)
            q = k * ne + np.arange(ne)
            rows += [outer[:, 0], outer[:, 1]]
            cols += [q, q]
            vals += [0.5 * elen * (1 - s), 0.5 * elen * s]
        self.points = np.concatenate(pts)
        self.weights = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(mesh.n_nodes, len(self.points)),
        )
        self.lambda_bc = lambda_bc

    def __call__(self, g: BoundaryData, t: float) -> np.ndarray:
        gv = _eval_boundary(g, self.points[:, 0], self.points[:, 1], t)
        return self.lambda_bc * (self.weights @ gv)


def assemble_boundary_load(mesh: Mesh, params: ModelParams, g: BoundaryData, t: float) -> np.ndarray:
    """``lambda * int_{dU} g(., t) zeta_i`` by two-point Gauss quadrature per outer edge."""
    return BoundaryLoad(mesh, params.lambda_bc)(g, t)


def boundary_l2_norm(mesh: Mesh, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
    """``||fn||_{L2(dU)}`` by two-point Gauss quadrature on each outer edge."""
    outer = mesh.edges_with_tag(OUTER)
    pa = mesh.nodes[outer[:, 0]]
    pb = mesh.nodes[outer[:, 1]]
    elen = np.linalg.norm(pb - pa, axis=1)
    total = 0.0
    for s in _GAUSS2:
        q = (1 - s) * pa + s * pb
        total += float(np.sum(0.5 * elen * np.asarray(fn(q[:, 0], q[:, 1]), dtype=float) ** 2))
    return np.sqrt(total)


# ---------------------------------------------------------------------------
# projection of initial data

# Strang-Fix / Dunavant degree-4 rule on the reference triangle (weights sum to 1)
_DUNAVANT4_BARY = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])
_DUNAVANT4_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


def _numerical_gradient(f, x, y):
    hx = 1e-6 * np.maximum(1.0, np.abs(x))
    hy = 1e-6 * np.maximum(1.0, np.abs(y))
    gx = (np.asarray(f(x + hx, y), float) - np.asarray(f(x - hx, y), float)) / (2 * hx)
    gy = (np.asarray(f(x, y + hy), float) - np.asarray(f(x, y - hy), float)) / (2 * hy)
    return gx, gy


def load_vector(mesh: Mesh, f, triangles=None, index=None, n=None, grad=None, with_gradient=False):
    """``int f w_i`` (plus ``int grad f . grad w_i`` if requested) over the given triangles."""
    tri = mesh.triangles if triangles is None else triangles
    idx = tri if index is None else index
    n = mesh.n_nodes if n is None else n
    coords = mesh.nodes[tri]
    area, grads = element_geometry(coords)
    out = np.zeros(n)
    for bary, w in zip(_DUNAVANT4_BARY, _DUNAVANT4_W):
        q = np.einsum("k,ekd->ed", bary, coords)
        fv = np.broadcast_to(np.asarray(f(q[:, 0], q[:, 1]), dtype=float), area.shape)
        contrib = (w * area * fv)[:, None] * bary[None, :]
        if with_gradient:
            gx, gy = grad(q[:, 0], q[:, 1]) if grad is not None else _numerical_gradient(f, q[:, 0], q[:, 1])
            gx = np.broadcast_to(np.asarray(gx, float), area.shape)
            gy = np.broadcast_to(np.asarray(gy, float), area.shape)
            contrib = contrib + (w * area)[:, None] * (gx[:, None] * grads[..., 0] + gy[:, None] * grads[..., 1])
        np.add.at(out, idx, contrib)
    return out


def project_initial_data(mesh: Mesh, ops: AssembledOperators, u0, phi0, phi0_grad=None, tol=1e-12,
                         maxit=5000) -> FieldState:
    """L2(U) projection of ``u0`` and H1(Omega) projection of ``phi0``.

    ``u0`` and ``phi0`` are callables ``f(x, y)`` on coordinate arrays. The
    gradient of ``phi0`` is taken by central differences unless given.
    """
    rhs_u = load_vector(mesh, u0)
    a = solve_spd(ops.mass_U, rhs_u, tol=tol, maxit=maxit)
    med = mesh.tri_region == MEDIUM
    tri = mesh.triangles[med]
    rhs_p = load_vector(mesh, phi0, triangles=tri, index=mesh.omega_of_u[tri], n=mesh.n_omega,
                        grad=phi0_grad, with_gradient=True)
    b = solve_spd((ops.mass_O + ops.stiff_O).tocsr(), rhs_p, tol=tol, maxit=maxit)
    return FieldState(0.0, a, b)
