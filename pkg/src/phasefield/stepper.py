"""First-order semi-implicit time stepping of the coupled Galerkin system.

Each step is two SPD solves. The phase equation carries no temperature
derivative, so it is advanced first; the heat equation then uses the fresh
discrete ``phi_dot`` as its latent-heat source. The double-well derivative
``(phi^3 - phi) / 2`` is evaluated nodally against the lumped medium mass.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np
import scipy.sparse as sp

from .assembly import AssembledOperators, BoundaryLoad, ModelParams
from .linalg import SolverError, solve_spd
from .state import FieldState, NonFiniteStateError

log = logging.getLogger(__name__)


class CubicMode(str, enum.Enum):
    SEMI_IMPLICIT = "SEMI_IMPLICIT"
    EXPLICIT = "EXPLICIT"
    # test hook: drops phi^3 entirely, leaving a linear system
    OFF = "OFF"


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    linsolve_tol: float = 1e-10
    linsolve_maxit: int = 2000
    cubic_mode: CubicMode = CubicMode.SEMI_IMPLICIT

    def __post_init__(self):
        object.__setattr__(self, "cubic_mode", CubicMode(self.cubic_mode))

    def problems(self) -> list[str]:
        out = []
        if not (np.isfinite(self.dt) and self.dt > 0):
            out.append(f"dt must be positive, got {self.dt}")
        if not 0 < self.linsolve_tol < 1:
            out.append(f"linsolve_tol must lie in (0, 1), got {self.linsolve_tol}")
        if not (isinstance(self.linsolve_maxit, (int, np.integer)) and self.linsolve_maxit >= 1):
            out.append(f"linsolve_maxit must be a positive integer, got {self.linsolve_maxit}")
        return out


class StepError(RuntimeError):
    def __init__(self, message, step_index=None, t=None):
        super().__init__(message)
        self.step_index = step_index
        self.t = t


def _diag_positions(A: sp.csr_matrix) -> np.ndarray:
    pos = np.empty(A.shape[0], dtype=np.int64)
    for i in range(A.shape[0]):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        k = np.searchsorted(A.indices[lo:hi], i)
        if k >= hi - lo or A.indices[lo + k] != i:
            raise ValueError(f"row {i} has no stored diagonal")
        pos[i] = lo + k
    return pos


class SemiImplicitStepper:
    def __init__(self, cfg: StepperConfig, params: ModelParams, ops: AssembledOperators, g):
        problems = cfg.problems() + params.problems()
        if problems:
            raise ValueError("; ".join(problems))
        self.cfg, self.params, self.ops, self.g = cfg, params, ops, g
        self._cache: dict[float, tuple] = {}
        self.coupleT = ops.couple_M.T.tocsr()
        self.boundary_load = BoundaryLoad(ops.mesh, params.lambda_bc)

    def _matrices(self, dt: float):
        if dt not in self._cache:
            p, o = self.params, self.ops
            phase = (p.tau / dt * o.mass_O + p.xi**2 * o.stiff_O).tocsr()
            phase.sort_indices()
            heat = (o.mass_U / dt + o.stiff_U + p.lambda_bc * o.bmass_U).tocsr()
            heat.sort_indices()
            self._cache[dt] = (phase, _diag_positions(phase), heat)
        return self._cache[dt]

    def phase_matrix(self, phi: np.ndarray, dt: float) -> sp.csr_matrix:
        phase, diag, _ = self._matrices(dt)
        if self.cfg.cubic_mode is not CubicMode.SEMI_IMPLICIT:
            return phase
        A = phase.copy()
        A.data[diag] += 0.5 * self.ops.lumped_O * phi**2
        return A

    def _solve(self, A, b, x0, what):
        try:
            return solve_spd(A, b, tol=self.cfg.linsolve_tol, maxit=self.cfg.linsolve_maxit, x0=x0)
        except SolverError as exc:
            raise SolverError(f"{what} solve failed: {exc}", exc.residual, exc.iterations) from exc

    def step(self, state: FieldState, dt: float | None = None) -> FieldState:
        dt = self.cfg.dt if dt is None else dt
        p, o = self.params, self.ops
        _, _, heat = self._matrices(dt)
        m = o.lumped_O
        phi, u = state.phi, state.u
        mode = self.cfg.cubic_mode

        # -phi/2 is explicit in every mode so the phase matrix stays SPD
        rhs = p.tau / dt * (o.mass_O @ phi) + 2.0 * (o.couple_M @ u) + 0.5 * m * phi
        if mode is CubicMode.EXPLICIT:
            rhs -= 0.5 * m * phi**3
        phi_new = self._solve(self.phase_matrix(phi, dt), rhs, phi, "phase")
        phi_dot = (phi_new - phi) / dt

        t_new = state.t + dt
        rhs_u = (o.mass_U @ u) / dt - 0.5 * p.latent_l * (self.coupleT @ phi_dot)
        if p.lambda_bc != 0.0:
            rhs_u += self.boundary_load(self.g, t_new)
        u_new = self._solve(heat, rhs_u, u, "heat")

        new = FieldState(t_new, u_new, phi_new, phi_dot)
        new.check()
        return new

    def n_steps(self, t0: float = 0.0) -> int:
        span = self.params.t_end - t0
        return max(0, int(np.ceil(span / self.cfg.dt - 1e-9)))

    def iterate(self, initial: FieldState) -> Iterator[tuple[int, FieldState]]:
        """Yield ``(k, state)`` after every step; the last step is truncated onto ``t_end``."""
        if abs(initial.t) > 0:
            raise ValueError(f"run must start at t = 0, got t = {initial.t}")
        initial.check(self.ops.mesh.n_nodes, self.ops.mesh.n_omega)
        dt, t_end = self.cfg.dt, self.params.t_end
        n = self.n_steps()
        state = initial
        for k in range(1, n + 1):
            h = dt if k < n else t_end - (k - 1) * dt
            try:
                state = self.step(state, h)
            except (SolverError, NonFiniteStateError) as exc:
                raise StepError(f"step {k} (t={state.t + h:.6g}) failed: {exc}", k, state.t + h) from exc
            # pin the clock to the grid so long runs do not drift
            state = state.with_time(t_end if k == n else k * dt)
            yield k, state

    def run(self, initial: FieldState, hooks: Iterable[Callable] | Callable | None = None) -> FieldState:
        if callable(hooks):
            hooks = [hooks]
        hooks = list(hooks or [])
        state = initial
        for k, state in self.iterate(initial):
            for hook in hooks:
                hook(state, k)
        return state

def step(state: FieldState, cfg: StepperConfig, params: ModelParams, ops: AssembledOperators, g) -> FieldState:
    if state.t + cfg.dt > params.t_end + cfg.dt * 1e-9:
        raise ValueError(f"step from t={state.t} by dt={cfg.dt} overshoots t_end={params.t_end}")
    return SemiImplicitStepper(cfg, params, ops, g).step(state)


def run(initial: FieldState, cfg: StepperConfig, params: ModelParams, ops: AssembledOperators, g,
        hooks=None) -> FieldState:
    return SemiImplicitStepper(cfg, params, ops, g).run(initial, hooks)
