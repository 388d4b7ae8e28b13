"""Command-line entry point.

    phasefield run <config> [--output-dir DIR] [--threads N] [--quiet]
    phasefield mesh-check <config>
    phasefield perturbation-study <config>
    phasefield convergence-study <config>

``<config>`` is a path to a ``key = value`` file or ``preset:NAME`` for one
of the built-in presets (ampoule, freezing, equilibrium). Exit status: 0
success, 1 configuration error, 2 solver or check failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from threadpoolctl import threadpool_limits

from .config import PRESETS, ConfigError, ScenarioConfig, load_config, serialize_config
from .convergence import oracle_convergence, uniform_convergence, uniform_params
from .geometry import MeshSpecError, build_nested_rect_mesh, validate_mesh
from .assembly import assemble_operators
from .output import write_vtk
from .scenario import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, build_scenario, run_scenario
from .stepper import StepError
from .wellposedness import PerturbationSpec, PerturbationStudyError, perturbation_study

log = logging.getLogger("phasefield")


def _load(source: str) -> ScenarioConfig:
    if source.startswith("preset:"):
        name = source.split(":", 1)[1]
        if name not in PRESETS:
            raise ConfigError([f"unknown preset {name!r}; choose from {', '.join(PRESETS)}"])
        return PRESETS[name]()
    return load_config(source)


def _write(outdir: str, name: str, text: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, name), "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_run(cfg: ScenarioConfig, outdir: str, threads: int) -> int:
    res = run_scenario(cfg, outdir, threads)
    if res.exit_code == EXIT_OK:
        log.info("finished %d steps in %.1f s, final frozen fraction %.4f", res.steps_done, res.wall_clock,
                 res.final_frozen_fraction)
    else:
        log.error("run failed: %s", res.message)
    return res.exit_code


def cmd_mesh_check(cfg: ScenarioConfig, outdir: str, threads: int) -> int:
    mesh = build_nested_rect_mesh(cfg.mesh)
    problems = validate_mesh(mesh)
    lines = [f"nodes = {mesh.n_nodes}", f"medium_nodes = {mesh.n_omega}", f"triangles = {len(mesh.triangles)}",
             f"max_edge = {mesh.max_edge_length()!r}", f"violations = {len(problems)}"]
    lines += [f"  {p}" for p in problems]
    _write(outdir, "mesh_check.txt", "\n".join(lines) + "\n")
    write_vtk(os.path.join(outdir, "mesh.vtk"), mesh)
    for p in problems:
        log.error("%s", p)
    log.info("%d violations", len(problems))
    return EXIT_OK if not problems else EXIT_SOLVER


def cmd_perturbation(cfg: ScenarioConfig, outdir: str, threads: int) -> int:
    pc = cfg.perturbation
    spec = PerturbationSpec(pc.eps_u0, pc.eps_phi0, pc.eps_g, pc.ladder)
    sc = build_scenario(cfg)
    with threadpool_limits(limits=threads):
        rep = perturbation_study(sc.mesh, sc.ops, sc.initial, sc.g, spec, cfg.stepper, cfg.params)
    _write(outdir, "perturbation.csv", rep.to_csv())
    _write(outdir, "perturbation.txt", rep.to_text())
    log.info("\n%s", rep.to_text())
    return EXIT_OK


def cmd_convergence(cfg: ScenarioConfig, outdir: str, threads: int) -> int:
    cc = cfg.convergence
    dts = [cfg.stepper.dt / 2**i for i in range(cc.levels)]
    with threadpool_limits(limits=threads):
        if cc.mode == "uniform":
            mesh_spec = replace(cfg.mesh, wall_thickness=0.0)
            params = uniform_params(cfg.params)
            mesh = build_nested_rect_mesh(mesh_spec)
            ops = assemble_operators(mesh, params)
            u0, phi0 = cfg.initial.values()
            rep = uniform_convergence(mesh, ops, params, u0, phi0, dts)
        else:
            sc = build_scenario(cfg)
            rep = oracle_convergence(sc.initial, dts, cfg.params, sc.ops, sc.g, oracle_ratio=cc.oracle_ratio)
    _write(outdir, "convergence.csv", rep.to_csv())
    text = rep.to_text() + "observed orders: " + ", ".join(f"{p:.3f}" for p in rep.observed_orders) + "\n"
    _write(outdir, "convergence.txt", text)
    log.info("\n%s", text)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "mesh-check": cmd_mesh_check,
    "perturbation-study": cmd_perturbation,
    "convergence-study": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phasefield", description="Two-domain phase-field solver")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="config file or preset:NAME")
        p.add_argument("--output-dir", help="overrides output.dir")
        p.add_argument("--threads", type=int, help="overrides threads")
        p.add_argument("--quiet", action="store_true", help="only report errors")
    sub.add_parser("presets", help="print the built-in presets as config files")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name, make in PRESETS.items():
            print(f"# preset:{name}\n{serialize_config(make())}")
        return EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            log.error("%s", e)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        log.error("--threads must be at least 1")
        return EXIT_CONFIG
    outdir = args.output_dir or cfg.output.dir
    threads = args.threads or cfg.threads
    try:
        return COMMANDS[args.command](cfg, outdir, threads)
    except (MeshSpecError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (StepError, PerturbationStudyError) as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
