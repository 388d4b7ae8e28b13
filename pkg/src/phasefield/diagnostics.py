"""Free energy, monitored norms and discrete residuals of the energy identities.

The quartic and quadratic parts of the double well are integrated with the
lumped medium mass, matching the nodal cubic of the stepper. Residuals use
the same time levels the stepper consumes, so they measure time-discretization
error only.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np

from .assembly import AssembledOperators, ModelParams
from .state import FieldState

CSV_HEADER = (
    "t", "free_energy", "l2_u", "h1_phi", "bnd_flux_accum", "phidot_accum",
    "frozen_fraction", "energy_residual", "chain_residual",
)


class NonUniformSegmentError(ValueError):
    pass


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    free_energy: float
    l2_u: float
    h1_phi: float
    bnd_flux_accum: float
    phidot_accum: float
    frozen_fraction: float
    energy_residual: float = 0.0
    chain_residual: float = 0.0

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in astuple(self))


def double_well(phi: np.ndarray, ops: AssembledOperators) -> float:
    return float(ops.lumped_O @ (phi**4 / 8.0 - phi**2 / 4.0))


def free_energy(phi: np.ndarray, params: ModelParams, ops: AssembledOperators) -> float:
    grad = float(phi @ (ops.stiff_O @ phi))
    return double_well(phi, ops) + 0.5 * params.xi**2 * grad


def l2_norm_u(u, ops):
    return math.sqrt(max(float(u @ (ops.mass_U @ u)), 0.0))


def h1_norm_phi(phi, ops):
    return math.sqrt(max(float(phi @ (ops.mass_O @ phi) + phi @ (ops.stiff_O @ phi)), 0.0))


def frozen_fraction(phi, ops):
    return float(ops.lumped_O[phi < 0].sum() / ops.area_O)


def layer_width(mesh, phi: np.ndarray, hi: float = 0.9, lo: float = -0.9) -> float:
    """Width of the first ``lo -> hi`` transition of ``phi`` along the horizontal midline.

    Walks the medium nodes of the grid row nearest mid-height from the left
    interface inward and interpolates linearly between nodes. NaN when the
    profile has no such transition.
    """
    om = mesh.omega_of_u
    inside = np.nonzero(om >= 0)[0]
    ys = mesh.nodes[inside, 1]
    mid = 0.5 * mesh.spec.outer_height
    row_y = ys[np.argmin(np.abs(ys - mid))]
    row = inside[np.abs(ys - row_y) < 1e-12]
    row = row[np.argsort(mesh.nodes[row, 0])]
    x, v = mesh.nodes[row, 0], phi[om[row]]

    def crossing(level, start):
        for i in range(start, len(v) - 1):
            if v[i] < level <= v[i + 1]:
                return x[i] + (level - v[i]) / (v[i + 1] - v[i]) * (x[i + 1] - x[i]), i
        return None, None

    x_lo, i_lo = crossing(lo, 0)
    if x_lo is None:
        return float("nan")
    x_hi, _ = crossing(hi, i_lo)
    return float("nan") if x_hi is None else float(x_hi - x_lo)


def energy_increment(prev: FieldState, cur: FieldState, dt: float, params: ModelParams,
                     ops: AssembledOperators) -> float:
    """``dt * <phi_dot, 2 u^n - tau phi_dot>`` for one step."""
    pd = cur.phi_dot
    return dt * (2.0 * float(pd @ (ops.couple_M @ prev.u)) - params.tau * float(pd @ (ops.mass_O @ pd)))


def chain_increment(prev: FieldState, cur: FieldState, dt: float, ops: AssembledOperators) -> float:
    """``dt * <phi_dot, phi^3 - phi>`` with the stepper's ``(phi^n)^2 phi^{n+1}`` cubic."""
    pd = cur.phi_dot
    cubic = prev.phi**2 * cur.phi - prev.phi
    return dt * float(ops.lumped_O @ (pd * cubic))


def _quartic_quadratic(phi, ops):
    return float(ops.lumped_O @ (phi**4)) / 4.0 - float(ops.lumped_O @ (phi**2)) / 2.0


def _check_spacing(segment: Sequence[FieldState]) -> np.ndarray:
    t = np.array([s.t for s in segment])
    dts = np.diff(t)
    if dts.size == 0:
        return dts
    if np.any(dts <= 0):
        raise NonUniformSegmentError("segment times must increase")
    # the final step may be truncated to land on t_end
    body = dts[:-1] if dts.size > 1 else dts
    if np.any(np.abs(body - dts[0]) > 1e-9 * dts[0]) or dts[-1] > dts[0] * (1 + 1e-9):
        raise NonUniformSegmentError("segment spacing is not uniform")
    return dts


def energy_equality_residual(segment: Sequence[FieldState], params: ModelParams, ops: AssembledOperators) -> float:
    """``|FE(t) - FE(s) - sum dt <phi_dot, 2u - tau phi_dot>|`` over a stored segment."""
    dts = _check_spacing(segment)
    if dts.size == 0:
        return 0.0
    work = sum(energy_increment(a, b, h, params, ops) for a, b, h in zip(segment, segment[1:], dts))
    change = free_energy(segment[-1].phi, params, ops) - free_energy(segment[0].phi, params, ops)
    return abs(change - work)


def chain_rule_residual(segment: Sequence[FieldState], ops: AssembledOperators) -> float:
    dts = _check_spacing(segment)
    if dts.size == 0:
        return 0.0
    lhs = sum(chain_increment(a, b, h, ops) for a, b, h in zip(segment, segment[1:], dts))
    rhs = _quartic_quadratic(segment[-1].phi, ops) - _quartic_quadratic(segment[0].phi, ops)
    return abs(lhs - rhs)


def collect(state: FieldState, params: ModelParams, ops: AssembledOperators,
            prev: DiagnosticsRecord | None = None, dt: float | None = None) -> DiagnosticsRecord:
    """Snapshot diagnostics; accumulators continue from ``prev`` using ``dt``."""
    if prev is None:
        bnd = pdot = 0.0
    else:
        h = state.t - prev.t if dt is None else dt
        bnd = prev.bnd_flux_accum + h * float(state.u @ (ops.bmass_U @ state.u))
        pdot = prev.phidot_accum + h * float(state.phi_dot @ (ops.mass_O @ state.phi_dot))
    return DiagnosticsRecord(
        t=state.t,
        free_energy=free_energy(state.phi, params, ops),
        l2_u=l2_norm_u(state.u, ops),
        h1_phi=h1_norm_phi(state.phi, ops),
        bnd_flux_accum=bnd,
        phidot_accum=pdot,
        frozen_fraction=frozen_fraction(state.phi, ops),
        energy_residual=prev.energy_residual if prev else 0.0,
        chain_residual=prev.chain_residual if prev else 0.0,
    )


class DiagnosticsMonitor:
    """Run hook that collects a record per step and running identity residuals.

    The residual columns are the absolute running residuals from ``t = 0``.
    """

    def __init__(self, params: ModelParams, ops: AssembledOperators, initial: FieldState,
                 keep_states: bool = False):
        self.params, self.ops = params, ops
        self.records = [collect(initial, params, ops)]
        self._prev = initial
        self._fe0 = self.records[0].free_energy
        self._qq0 = _quartic_quadratic(initial.phi, ops)
        self._work = 0.0
        self._chain = 0.0
        self.states = [initial] if keep_states else None

    def __call__(self, state: FieldState, step_index: int | None = None) -> None:
        dt = state.t - self._prev.t
        self._work += energy_increment(self._prev, state, dt, self.params, self.ops)
        self._chain += chain_increment(self._prev, state, dt, self.ops)
        rec = collect(state, self.params, self.ops, self.records[-1], dt)
        e_res = abs(rec.free_energy - self._fe0 - self._work)
        c_res = abs(self._chain - (_quartic_quadratic(state.phi, self.ops) - self._qq0))
        rec = DiagnosticsRecord(*astuple(rec)[:7], e_res, c_res)
        self.records.append(rec)
        self._prev = state
        if self.states is not None:
            self.states.append(state)

    @property
    def energy_residual(self) -> float:
        return self.records[-1].energy_residual

    @property
    def chain_residual(self) -> float:
        return self.records[-1].chain_residual

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def records_to_csv(records: Sequence[DiagnosticsRecord], stream=None) -> str:
    buf = io.StringIO() if stream is None else stream
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([repr(float(v)) for v in astuple(r)])
    return buf.getvalue() if stream is None else ""


def read_csv(path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"unexpected diagnostics header {rows[0]}")
    return [DiagnosticsRecord(*map(float, row)) for row in rows[1:]]


assert tuple(f.name for f in fields(DiagnosticsRecord)) == CSV_HEADER
