"""Wiring of a parsed scenario: mesh, operators, initial data, boundary data, outputs."""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .assembly import AssembledOperators, assemble_operators
from .boundary import ConstantBoundary, RampBoundary, TableBoundary
from .config import BoundarySpec, ScenarioConfig
from .diagnostics import CSV_HEADER, DiagnosticsMonitor
from .geometry import Mesh, MeshSpecError, build_nested_rect_mesh
from .output import write_vtk
from .state import FieldState
from .stepper import SemiImplicitStepper, StepError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_IO = 3


@dataclass
class Scenario:
    config: ScenarioConfig
    mesh: Mesh
    ops: AssembledOperators
    initial: FieldState
    g: object


def boundary_function(spec: BoundarySpec):
    if spec.preset == "constant":
        return ConstantBoundary(spec.value)
    if spec.preset == "ramp":
        return RampBoundary(spec.start, spec.rate, spec.floor)
    if spec.preset == "table":
        times, values = zip(*spec.table)
        return TableBoundary(tuple(times), tuple(values))
    raise ValueError(f"unknown boundary preset {spec.preset!r}")


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    mesh = build_nested_rect_mesh(cfg.mesh)
    ops = assemble_operators(mesh, cfg.params)
    u0, phi0 = cfg.initial.values()
    # both projections reproduce constants, so skip the solves and keep them exact
    initial = FieldState(0.0, np.full(mesh.n_nodes, u0), np.full(mesh.n_omega, phi0))
    return Scenario(cfg, mesh, ops, initial, boundary_function(cfg.boundary))


def _row(rec) -> str:
    return ",".join(repr(float(getattr(rec, name))) for name in CSV_HEADER) + "\n"


@dataclass
class RunResult:
    exit_code: int
    steps_planned: int = 0
    steps_done: int = 0
    final_frozen_fraction: float = float("nan")
    wall_clock: float = 0.0
    failure_step: int | None = None
    message: str = ""
    monitor: DiagnosticsMonitor | None = None
    final_state: FieldState | None = None


def _write_summary(path, res: RunResult) -> None:
    lines = [
        f"status = {'ok' if res.exit_code == EXIT_OK else 'failed'}",
        f"exit_code = {res.exit_code}",
        f"steps_planned = {res.steps_planned}",
        f"steps_completed = {res.steps_done}",
        f"final_frozen_fraction = {res.final_frozen_fraction!r}",
        f"wall_clock_seconds = {res.wall_clock:.3f}",
        f"failure_step = {'none' if res.failure_step is None else res.failure_step}",
    ]
    if res.message:
        lines.append(f"message = {res.message}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def run_scenario(cfg: ScenarioConfig, output_dir=None, threads: int | None = None, hooks=()) -> RunResult:
    """Run a scenario, streaming ``diagnostics.csv``, snapshots and ``summary.txt``.

    Outputs written before a solver failure are kept; the summary records the
    failing step. ``hooks`` are extra ``hook(state, k)`` callbacks.
    """
    out = cfg.output.dir if output_dir is None else str(output_dir)
    threads = cfg.threads if threads is None else threads
    t_start = time.perf_counter()
    with threadpool_limits(limits=threads):
        try:
            sc = build_scenario(cfg)
        except (MeshSpecError, ValueError) as exc:
            return RunResult(EXIT_CONFIG, message=str(exc))
        try:
            os.makedirs(out, exist_ok=True)
            csv_fh = open(os.path.join(out, "diagnostics.csv"), "w", encoding="utf-8", newline="")
        except OSError as exc:
            log.error("cannot open output directory %s: %s", out, exc)
            return RunResult(EXIT_IO, message=str(exc))

        stepper = SemiImplicitStepper(cfg.stepper, cfg.params, sc.ops, sc.g)
        res = RunResult(EXIT_OK, steps_planned=stepper.n_steps())
        stride = cfg.output.stride
        monitor = DiagnosticsMonitor(cfg.params, sc.ops, sc.initial)
        res.monitor = monitor
        state = sc.initial

        def snapshot(s, k):
            write_vtk(os.path.join(out, f"snap_{k:06d}.vtk"), sc.mesh, s.u, s.phi)

        def record(s, k):
            nonlocal state
            monitor(s, k)
            csv_fh.write(_row(monitor.records[-1]))
            state = s
            res.steps_done = k
            if k % stride == 0:
                snapshot(s, k)
            if k % max(1, res.steps_planned // 10) == 0:
                log.info("step %d/%d t=%.4g frozen=%.3f", k, res.steps_planned, s.t,
                         monitor.records[-1].frozen_fraction)

        try:
            with csv_fh:
                csv_fh.write(",".join(CSV_HEADER) + "\n")
                csv_fh.write(_row(monitor.records[0]))
                snapshot(sc.initial, 0)
                stepper.run(sc.initial, [record, *hooks])
        except StepError as exc:
            log.error("%s", exc)
            res.exit_code, res.failure_step, res.message = EXIT_SOLVER, exc.step_index, str(exc)
        except OSError as exc:
            log.error("output failure: %s", exc)
            res.exit_code, res.message = EXIT_IO, str(exc)

        res.final_state = state
        res.final_frozen_fraction = monitor.records[-1].frozen_fraction
        res.wall_clock = time.perf_counter() - t_start
        try:
            _write_summary(os.path.join(out, "summary.txt"), res)
        except OSError as exc:
            log.error("cannot write summary: %s", exc)
            res.exit_code = res.exit_code or EXIT_IO
    return res
