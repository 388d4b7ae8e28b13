"""Continuous dependence on data, checked by perturbation ladders.

A base problem and perturbed copies (initial temperature, initial phase or
boundary temperature shifted by a fixed smooth profile times a scale) are
advanced in lockstep on the same mesh and time grid. For each scale the
difference norms

    sup_t ||u_bar||_L2(U),  sup_t ||phi_bar||_H1(Omega),
    (sum dt ||grad u_bar||^2)^(1/2),  (sum dt ||phi_bar_t||^2)^(1/2)

are recorded and a log-log slope is fitted across the ladder. Linear
dependence on the data shows up as slope 1. The integrated quantities are
reported as square roots so that all four are norms of the same homogeneity.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .assembly import AssembledOperators, ModelParams, boundary_l2_norm, project_initial_data, stiffness_matrix
from .boundary import PerturbedBoundary
from .diagnostics import h1_norm_phi, l2_norm_u
from .geometry import Mesh
from .state import FieldState
from .stepper import SemiImplicitStepper, StepError, StepperConfig

QUANTITIES = ("sup_l2_u", "sup_h1_phi", "grad_u_l2t", "phidot_l2t")
COMPONENTS = ("u0", "phi0", "g")


class PerturbationStudyError(RuntimeError):
    pass


@dataclass(frozen=True)
class PerturbationSpec:
    eps_u0: float = 0.0
    eps_phi0: float = 0.0
    eps_g: float = 0.0
    ladder: tuple[float, ...] = (1e-1, 1e-2, 1e-3)

    def __post_init__(self):
        lad = tuple(float(v) for v in self.ladder)
        if not lad or any(v <= 0 for v in lad) or any(b >= a for a, b in zip(lad, lad[1:])):
            raise ValueError(f"ladder must be positive and strictly decreasing, got {lad}")
        object.__setattr__(self, "ladder", lad)

    def amplitude(self, component: str) -> float:
        return getattr(self, f"eps_{component}")


# ---------------------------------------------------------------------------
# profiles

def _bump(a, b, s):
    """``sin^2`` bump on ``[a, b]``, zero outside."""
    z = np.clip((s - a) / (b - a), 0.0, 1.0)
    return np.sin(np.pi * z) ** 2


@dataclass
class Profiles:
    """Unit-norm data perturbations on a given mesh.

    ``u`` has unit ``L2(U)`` norm, ``phi`` unit ``H1(Omega)`` norm, and
    ``g(x, y)`` unit norm in ``L2(dU x (0, T))`` (constant in time).
    """

    u: np.ndarray
    phi: np.ndarray
    g: object


def make_profiles(mesh: Mesh, ops: AssembledOperators, t_end: float) -> Profiles:
    spec = mesh.spec
    W, H, d = spec.outer_width, spec.outer_height, spec.wall_thickness

    def pu(x, y):
        # off-centre so the bump is not aligned with the symmetry of the problem
        return _bump(0.1 * W, 0.7 * W, x) * _bump(0.2 * H, 0.6 * H, y)

    def pphi(x, y):
        return _bump(d, 0.6 * W, x) * _bump(0.4 * H, 0.8 * H, y)

    proj = project_initial_data(mesh, ops, pu, pphi)
    u = proj.u / l2_norm_u(proj.u, ops)
    phi = proj.phi / h1_norm_phi(proj.phi, ops)

    def raw_g(x, y):
        return np.exp(-(((y - 0.3 * H) / (0.15 * H)) ** 2)) * (1.0 + 0.5 * x / W)

    scale = 1.0 / (boundary_l2_norm(mesh, raw_g) * math.sqrt(t_end))

    def pg(x, y):
        return scale * raw_g(x, y)

    return Profiles(u, phi, pg)


# ---------------------------------------------------------------------------
# study

@dataclass
class ScalingReport:
    ladder: tuple[float, ...]
    # component -> quantity -> one value per rung
    norms: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    slopes: dict[str, dict[str, float]] = field(default_factory=dict)
    amplitudes: dict[str, float] = field(default_factory=dict)

    def min_slope(self) -> float:
        vals = [v for comp in self.slopes.values() for v in comp.values()]
        return min(vals) if vals and not any(math.isnan(v) for v in vals) else float("nan")

    def all_zero(self) -> bool:
        return all(v == 0.0 for comp in self.norms.values() for q in comp.values() for v in q)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("component", "amplitude", "scale") + QUANTITIES)
        for comp, qs in self.norms.items():
            for i, s in enumerate(self.ladder):
                w.writerow([comp, repr(self.amplitudes[comp]), repr(s)] + [repr(qs[q][i]) for q in QUANTITIES])
        for comp, sl in self.slopes.items():
            w.writerow([comp, repr(self.amplitudes[comp]), "slope"] + [repr(sl[q]) for q in QUANTITIES])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"perturbation ladder: {', '.join(f'{s:g}' for s in self.ladder)}"]
        for comp, qs in self.norms.items():
            lines.append(f"\n[{comp}] amplitude {self.amplitudes[comp]:g}")
            lines.append("  " + f"{'scale':>10}" + "".join(f"{q:>14}" for q in QUANTITIES))
            for i, s in enumerate(self.ladder):
                lines.append("  " + f"{s:>10.3g}" + "".join(f"{qs[q][i]:>14.6e}" for q in QUANTITIES))
            sl = self.slopes[comp]
            lines.append("  " + f"{'slope':>10}" + "".join(f"{sl[q]:>14.4f}" for q in QUANTITIES))
        if self.all_zero():
            lines.append("\nall difference norms are exactly zero; slopes are undefined")
        return "\n".join(lines) + "\n"


def fit_slope(scales, values) -> float:
    v = np.asarray(values, float)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(scales, float)), np.log(v), 1)[0])


class _Accumulator:
    def __init__(self, ops, grad_stiffness):
        self.ops, self.K = ops, grad_stiffness
        self.sup_u = self.sup_phi = self.grad = self.pdot = 0.0

    def add(self, base: FieldState, pert: FieldState, dt: float | None):
        du, dp = pert.u - base.u, pert.phi - base.phi
        self.sup_u = max(self.sup_u, l2_norm_u(du, self.ops))
        self.sup_phi = max(self.sup_phi, h1_norm_phi(dp, self.ops))
        if dt is not None:
            dpd = pert.phi_dot - base.phi_dot
            self.grad += dt * float(du @ (self.K @ du))
            self.pdot += dt * float(dpd @ (self.ops.mass_O @ dpd))

    def values(self):
        return dict(zip(QUANTITIES, (self.sup_u, self.sup_phi, math.sqrt(self.grad), math.sqrt(self.pdot))))


def perturbation_study(mesh: Mesh, ops: AssembledOperators, initial: FieldState, g, spec: PerturbationSpec,
                       cfg: StepperConfig, params: ModelParams, profiles: Profiles | None = None) -> ScalingReport:
    """Run every rung of the ladder for each perturbed data component.

    Components with zero amplitude are skipped; if all amplitudes are zero a
    single ``none`` component with identical data is run, whose differences
    must vanish identically.
    """
    prof = make_profiles(mesh, ops, params.t_end) if profiles is None else profiles
    comps = [c for c in COMPONENTS if spec.amplitude(c) != 0.0] or ["none"]
    report = ScalingReport(spec.ladder)
    # unit-conductivity stiffness: grad norms independent of k_omega, k_wall
    K1 = stiffness_matrix(mesh, 1.0)

    runs = []
    for comp in comps:
        amp = 0.0 if comp == "none" else spec.amplitude(comp)
        report.amplitudes[comp] = amp
        for i, s in enumerate(spec.ladder):
            a = amp * s
            u0, phi0, gp = initial.u, initial.phi, g
            if comp == "u0":
                u0 = u0 + a * prof.u
            elif comp == "phi0":
                phi0 = phi0 + a * prof.phi
            elif comp == "g":
                gp = PerturbedBoundary(g, prof.g, a)
            st = FieldState(0.0, u0, phi0)
            acc = _Accumulator(ops, K1)
            acc.add(initial, st, None)
            runs.append((comp, i, SemiImplicitStepper(cfg, params, ops, gp).iterate(st), acc))

    base = SemiImplicitStepper(cfg, params, ops, g)
    prev_t = 0.0
    for k, b in base.iterate(initial):
        dt = b.t - prev_t
        prev_t = b.t
        for comp, i, it, acc in runs:
            try:
                _, p = next(it)
            except StepError as exc:
                raise PerturbationStudyError(
                    f"component {comp}, rung {i} (scale {spec.ladder[i]:g}) failed: {exc}") from exc
            acc.add(b, p, dt)

    for comp in comps:
        report.norms[comp] = {q: [] for q in QUANTITIES}
    for comp, i, _, acc in runs:
        for q, v in acc.values().items():
            report.norms[comp][q].append(v)
    for comp in comps:
        report.slopes[comp] = {q: fit_slope(spec.ladder, report.norms[comp][q]) for q in QUANTITIES}
    return report


def uniqueness_probe(mesh: Mesh, ops: AssembledOperators, initial: FieldState, g, cfg: StepperConfig,
                     params: ModelParams, n_reps: int = 3, threads=None) -> float:
    """Max-norm difference over all pairs of ``n_reps`` identical runs and all time levels.

    ``threads`` optionally gives a thread limit per repetition.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    threads = [1] * n_reps if threads is None else list(threads)
    trajs = []
    for r in range(n_reps):
        stepper = SemiImplicitStepper(cfg, params, ops, g)
        n = stepper.n_steps()
        arr = np.empty((n + 1, mesh.n_nodes + mesh.n_omega))
        arr[0] = np.concatenate([initial.u, initial.phi])
        with threadpool_limits(limits=threads[r]):
            for k, s in stepper.iterate(initial):
                arr[k, :mesh.n_nodes] = s.u
                arr[k, mesh.n_nodes:] = s.phi
        trajs.append(arr)
    worst = 0.0
    for i in range(n_reps):
        for j in range(i + 1, n_reps):
            worst = max(worst, float(np.max(np.abs(trajs[i] - trajs[j]))))
    return worst
