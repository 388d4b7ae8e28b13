"""Refinement-ratio studies of the stepper's temporal order."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .assembly import AssembledOperators, ModelParams
from .diagnostics import DiagnosticsMonitor
from .oracle import compare_trajectories, reference_integrate
from .state import FieldState
from .stepper import SemiImplicitStepper, StepperConfig


@dataclass
class ConvergenceReport:
    dts: list[float]
    errors: list[float]
    energy_residuals: list[float] = field(default_factory=list)
    chain_residuals: list[float] = field(default_factory=list)
    fe_changes: list[float] = field(default_factory=list)
    oracle_substep: float = float("nan")
    oracle_self_diff: float = float("nan")
    seconds: float = 0.0
    # diagnostics of each stepper run, finest last
    monitors: list = field(default_factory=list, repr=False)

    @staticmethod
    def _ratios(v):
        return [a / b if b > 0 else float("nan") for a, b in zip(v, v[1:])]

    @property
    def error_ratios(self):
        return self._ratios(self.errors)

    @property
    def energy_ratios(self):
        return self._ratios(self.energy_residuals)

    @property
    def chain_ratios(self):
        return self._ratios(self.chain_residuals)

    @property
    def observed_orders(self):
        return [math.log2(r) if r > 0 else float("nan") for r in self.error_ratios]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("dt", "error", "energy_residual", "chain_residual", "free_energy_change"))
        n = len(self.dts)
        pad = lambda v: list(v) + [float("nan")] * (n - len(v))  # noqa: E731
        for row in zip(self.dts, self.errors, pad(self.energy_residuals), pad(self.chain_residuals),
                       pad(self.fe_changes)):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"{'dt':>10} {'error':>14} {'ratio':>8} {'energy_res':>12} {'ratio':>8} "
                 f"{'chain_res':>12} {'ratio':>8}"]
        er, en, ch = self.error_ratios, self.energy_ratios, self.chain_ratios
        for i, dt in enumerate(self.dts):
            r = lambda v: f"{v[i - 1]:8.3f}" if i > 0 and i - 1 < len(v) else " " * 8  # noqa: E731
            e_res = f"{self.energy_residuals[i]:12.4e}" if i < len(self.energy_residuals) else " " * 12
            c_res = f"{self.chain_residuals[i]:12.4e}" if i < len(self.chain_residuals) else " " * 12
            lines.append(f"{dt:10.4g} {self.errors[i]:14.6e} {r(er)} {e_res} {r(en)} {c_res} {r(ch)}")
        if not math.isnan(self.oracle_substep):
            lines.append(f"oracle substep {self.oracle_substep:.3g}, self-convergence (max norm, final state) "
                         f"{self.oracle_self_diff:.3e}")
        if self.fe_changes:
            rel = self.energy_residuals[-1] / abs(self.fe_changes[-1]) if self.fe_changes[-1] else float("nan")
            lines.append(f"finest energy residual / |free-energy change| = {rel:.4%}")
        lines.append(f"wall clock {self.seconds:.1f} s")
        return "\n".join(lines) + "\n"


def stepper_trajectory(initial: FieldState, dt: float, params: ModelParams, ops: AssembledOperators, g,
                       every: int = 1, cubic_mode=None):
    """Stored states every ``every`` steps (and the final one) plus the diagnostics monitor."""
    cfg = StepperConfig(dt) if cubic_mode is None else StepperConfig(dt, cubic_mode=cubic_mode)
    stepper = SemiImplicitStepper(cfg, params, ops, g)
    n = stepper.n_steps()
    mon = DiagnosticsMonitor(params, ops, initial)
    traj = [initial]
    for k, s in stepper.iterate(initial):
        mon(s, k)
        if k % every == 0 or k == n:
            traj.append(s)
    return traj, mon


def oracle_convergence(initial: FieldState, dts, params: ModelParams, ops: AssembledOperators, g,
                       oracle_ratio: int = 50, self_check: bool = True, check_factor: int = 4) -> ConvergenceReport:
    """Stepper error against an RK4 reference at ``min(dts) / oracle_ratio``.

    Errors are sup over the coarsest time grid of ``||e_u||_L2(U) + ||e_phi||_H1``.
    With ``self_check`` the reference is recomputed at ``check_factor`` times
    the substep and the max-norm difference of the final states is reported;
    it bounds the error of the coarser reference and so of the finer one.
    """
    t0 = time.perf_counter()
    dts = sorted(dts, reverse=True)
    coarse = dts[0]
    substep = dts[-1] / oracle_ratio
    ref = reference_integrate(initial, 1.0 / substep, params, ops, g, sample_dt=coarse)
    self_diff = float("nan")
    if self_check:
        ref2 = reference_integrate(initial, 1.0 / (check_factor * substep), params, ops, g, sample_dt=coarse)
        self_diff = max(float(np.max(np.abs(ref[-1].u - ref2[-1].u))),
                        float(np.max(np.abs(ref[-1].phi - ref2[-1].phi))))
    rep = ConvergenceReport(list(dts), [], oracle_substep=substep, oracle_self_diff=self_diff)
    for dt in dts:
        every = max(1, round(coarse / dt))
        traj, mon = stepper_trajectory(initial, dt, params, ops, g, every=every)
        rep.errors.append(compare_trajectories(traj, ref, ops).combined)
        rep.monitors.append(mon)
        rep.energy_residuals.append(mon.energy_residual)
        rep.chain_residuals.append(mon.chain_residual)
        rep.fe_changes.append(mon.records[-1].free_energy - mon.records[0].free_energy)
    rep.seconds = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# spatially uniform reduction

def uniform_rhs(params: ModelParams):
    """Vector field of the uniform reduction ``u' = -(l/2) phi'``, ``tau phi' = 2u + (phi - phi^3)/2``."""
    def f(t, y):
        u, phi = y
        phi_t = (2.0 * u + 0.5 * (phi - phi**3)) / params.tau
        return [-0.5 * params.latent_l * phi_t, phi_t]
    return f


def uniform_reference(params: ModelParams, u0: float, phi0: float, times) -> np.ndarray:
    sol = solve_ivp(uniform_rhs(params), (0.0, float(times[-1])), [u0, phi0], method="DOP853",
                    t_eval=times, rtol=1e-13, atol=1e-15)
    if not sol.success:
        raise RuntimeError(f"scalar reference integration failed: {sol.message}")
    return sol.y.T


def uniform_scalar_step(u: float, phi: float, dt: float, params: ModelParams) -> tuple[float, float]:
    """One step of the semi-implicit scheme written out for constant fields."""
    tau, l = params.tau, params.latent_l
    phi_new = (tau / dt * phi + 2.0 * u + 0.5 * phi) / (tau / dt + 0.5 * phi**2)
    u_new = u - 0.5 * l * (phi_new - phi)
    return u_new, phi_new


def uniform_convergence(mesh, ops: AssembledOperators, params: ModelParams, u0: float, phi0: float,
                        dts) -> ConvergenceReport:
    """Stepper on a wall-free, insulated mesh against the scalar reference.

    The mesh must have ``Omega = U`` and ``params.lambda_bc = 0`` so that
    constant fields stay constant.
    """
    if mesh.n_omega != mesh.n_nodes or params.lambda_bc != 0.0:
        raise ValueError("uniform reduction needs a wall-free mesh and lambda_bc = 0")
    t0 = time.perf_counter()
    dts = sorted(dts, reverse=True)
    initial = FieldState(0.0, np.full(mesh.n_nodes, u0), np.full(mesh.n_omega, phi0))
    rep = ConvergenceReport(list(dts), [])
    for dt in dts:
        traj, mon = stepper_trajectory(initial, dt, params, ops, lambda x, y, t: np.zeros(np.shape(x)))
        times = np.array([s.t for s in traj])
        exact = uniform_reference(params, u0, phi0, times)
        err = 0.0
        for s, (ue, pe) in zip(traj, exact):
            err = max(err, float(np.max(np.abs(s.u - ue))) + float(np.max(np.abs(s.phi - pe))))
        rep.errors.append(err)
        rep.energy_residuals.append(mon.energy_residual)
        rep.chain_residuals.append(mon.chain_residual)
        rep.fe_changes.append(mon.records[-1].free_energy - mon.records[0].free_energy)
    rep.seconds = time.perf_counter() - t0
    return rep


def uniform_params(params: ModelParams) -> ModelParams:
    return replace(params, lambda_bc=0.0)
