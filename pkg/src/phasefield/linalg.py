"""Jacobi-preconditioned conjugate gradients for the SPD systems of the stepper."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class SolverError(RuntimeError):
    def __init__(self, message, residual=np.nan, iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def solve_spd(A, b, tol=1e-10, maxit=1000, x0=None, return_info=False):
    """Solve ``A x = b`` to relative residual ``tol``.

    Returns ``x`` (and ``(iterations, relres)`` if ``return_info``). ``b = 0``
    gives ``x = 0`` exactly. Raises :class:`SolverError` when ``maxit`` is
    exhausted or the matrix shows a non-positive curvature direction.
    """
    b = np.asarray(b, dtype=float)
    if A.shape != (b.size, b.size):
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has {b.size} entries")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros_like(b)
        return (x, (0, 0.0)) if return_info else x

    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    if np.any(diag <= 0):
        i = int(np.nonzero(diag <= 0)[0][0])
        raise SolverError(f"non-positive diagonal entry {diag[i]} at row {i}", iterations=0)
    dinv = 1.0 / diag

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    rnorm = np.linalg.norm(r)
    history = [rnorm / bnorm]
    if history[-1] <= tol:
        return (x, (0, history[-1])) if return_info else x

    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxit + 1):
        Ap = A @ p
        pAp = p @ Ap
        if not pAp > 0:
            raise SolverError(
                f"CG breakdown at iteration {it}: p^T A p = {pAp}", residual=history[-1], iterations=it
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        history.append(np.linalg.norm(r) / bnorm)
        if history[-1] <= tol:
            # guard against drift of the recursive residual
            true_res = np.linalg.norm(b - A @ x) / bnorm
            if true_res <= tol:
                return (x, (it, true_res)) if return_info else x
            r = b - A @ x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not converge in {maxit} iterations "
        f"(history length {len(history)}, final relative residual {history[-1]:.3e})",
        residual=history[-1],
        iterations=maxit,
    )
