import dataclasses
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasefield.cli import main
from phasefield.config import PRESETS, BoundarySpec, OutputSpec, serialize_config
from phasefield.geometry import MeshSpec, build_nested_rect_mesh
from phasefield.output import WALL_SENTINEL, read_vtk_point_data, vtk_text, write_vtk
from phasefield.scenario import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, run_scenario


def small_config(**changes):
    cfg = PRESETS["equilibrium"]()
    cfg = dataclasses.replace(cfg, mesh=MeshSpec(1.0, 1.0, 0.2, 0.1))
    return dataclasses.replace(cfg, **changes)


def cooling_config(t_end=0.05, stride=3):
    cfg = small_config(boundary=BoundarySpec("ramp", start=0.0, rate=-20.0),
                       output=OutputSpec(stride=stride, dir="unused"))
    return dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, t_end=t_end),
                               stepper=dataclasses.replace(cfg.stepper, dt=5e-3))


def test_vtk_layout(small_mesh):
    u = np.linspace(0, 1, small_mesh.n_nodes)
    phi = np.linspace(-1, 1, small_mesh.n_omega)
    lines = vtk_text(small_mesh, u, phi).splitlines()
    assert lines[:4] == ["# vtk DataFile Version 3.0", "phasefield snapshot", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    nt = len(small_mesh.triangles)
    for header in (f"POINTS {small_mesh.n_nodes} double", f"CELLS {nt} {4 * nt}", f"CELL_TYPES {nt}",
                   f"POINT_DATA {small_mesh.n_nodes}", f"CELL_DATA {nt}"):
        assert header in lines
    i = lines.index(f"CELL_TYPES {nt}")
    assert set(lines[i + 1:i + 1 + nt]) == {"5"}


def test_vtk_sentinel_discipline(tmp_path, small_mesh):
    phi = np.random.default_rng(0).uniform(-1.5, 1.5, small_mesh.n_omega)
    path = tmp_path / "s.vtk"
    write_vtk(path, small_mesh, np.zeros(small_mesh.n_nodes), phi)
    data = read_vtk_point_data(path)
    wall_only = small_mesh.omega_of_u < 0
    assert np.all(data["phi"][wall_only] == WALL_SENTINEL)
    assert np.all(data["phi"][~wall_only] != WALL_SENTINEL)
    assert np.array_equal(data["phi"][~wall_only], phi[small_mesh.omega_of_u[~wall_only]])


def test_equilibrium_snapshots_identical(tmp_path):
    res = run_scenario(PRESETS["equilibrium"](), tmp_path)
    assert res.exit_code == EXIT_OK
    snaps = sorted(p for p in os.listdir(tmp_path) if p.startswith("snap_"))
    assert len(snaps) == res.steps_done // 2 + 1
    first = (tmp_path / snaps[0]).read_bytes()
    assert all((tmp_path / s).read_bytes() == first for s in snaps[1:])


@settings(max_examples=6)
@given(stride=st.integers(1, 12))
def test_snapshot_count(tmp_path_factory, stride):
    out = tmp_path_factory.mktemp("run")
    res = run_scenario(cooling_config(stride=stride), out)
    snaps = [p for p in os.listdir(out) if p.startswith("snap_")]
    assert res.exit_code == EXIT_OK and res.steps_done == 10
    assert len(snaps) == res.steps_done // stride + 1
    assert "snap_000000.vtk" in snaps


def test_outputs_and_summary(tmp_path):
    res = run_scenario(cooling_config(), tmp_path)
    rows = (tmp_path / "diagnostics.csv").read_text().splitlines()
    assert rows[0] == "t,free_energy,l2_u,h1_phi,bnd_flux_accum,phidot_accum,frozen_fraction,energy_residual,chain_residual"
    assert len(rows) == 1 + res.steps_done + 1
    summary = (tmp_path / "summary.txt").read_text()
    assert "status = ok" in summary and "steps_completed = 10" in summary
    assert f"final_frozen_fraction = {res.final_frozen_fraction!r}" in summary
    assert "wall_clock_seconds" in summary


def test_rerun_is_byte_identical(tmp_path):
    cfg = cooling_config()
    texts = []
    for i in range(2):
        run_scenario(cfg, tmp_path / str(i), threads=1)
        texts.append((tmp_path / str(i) / "diagnostics.csv").read_bytes())
    assert texts[0] == texts[1]


def test_solver_failure_keeps_partial_outputs(tmp_path):
    cfg = cooling_config(t_end=0.1)
    cfg = dataclasses.replace(cfg, boundary=BoundarySpec("table", table=((0.0, 0.0), (0.02, 0.0), (0.021, 1e308))))
    with np.errstate(all="ignore"):
        res = run_scenario(cfg, tmp_path)
    assert res.exit_code == EXIT_SOLVER and res.failure_step is not None and res.failure_step > 1
    summary = (tmp_path / "summary.txt").read_text()
    assert "status = failed" in summary and f"failure_step = {res.failure_step}" in summary
    rows = (tmp_path / "diagnostics.csv").read_text().splitlines()
    assert len(rows) == 1 + res.failure_step  # header, initial record, completed steps
    assert (tmp_path / "snap_000000.vtk").exists()


def test_unwritable_output_is_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run_scenario(cooling_config(), blocker / "sub").exit_code == EXIT_IO


# ---------------------------------------------------------------------------
# command line

def write_cfg(tmp_path, cfg, name="c.cfg"):
    path = tmp_path / name
    path.write_text(serialize_config(cfg))
    return str(path)


def test_cli_run(tmp_path):
    path = write_cfg(tmp_path, cooling_config())
    out = tmp_path / "out"
    assert main(["run", path, "--output-dir", str(out), "--quiet", "--threads", "1"]) == EXIT_OK
    assert (out / "summary.txt").exists()


def test_cli_config_error(tmp_path, caplog):
    bad = tmp_path / "bad.cfg"
    bad.write_text("params.tau = abc\nnope = 1\n")
    assert main(["run", str(bad), "--quiet"]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.cfg"), "--quiet"]) == EXIT_CONFIG
    assert main(["run", "preset:nope", "--quiet"]) == EXIT_CONFIG


def test_cli_mesh_check(tmp_path):
    path = write_cfg(tmp_path, small_config())
    out = tmp_path / "mc"
    assert main(["mesh-check", path, "--output-dir", str(out), "--quiet"]) == EXIT_OK
    text = (out / "mesh_check.txt").read_text()
    assert "violations = 0" in text
    assert (out / "mesh.vtk").read_text().startswith("# vtk DataFile Version 3.0")


def test_cli_perturbation_study_zero_amplitudes(tmp_path):
    path = write_cfg(tmp_path, cooling_config())
    out = tmp_path / "ps"
    assert main(["perturbation-study", path, "--output-dir", str(out), "--quiet"]) == EXIT_OK
    assert "exactly zero" in (out / "perturbation.txt").read_text()
    assert (out / "perturbation.csv").exists()


def test_cli_convergence_study_uniform(tmp_path):
    cfg = cooling_config(t_end=0.05)
    cfg = dataclasses.replace(
        cfg, initial=dataclasses.replace(cfg.initial, preset="constant", u0=0.0, phi0=0.5),
        stepper=dataclasses.replace(cfg.stepper, dt=2e-3),
        convergence=dataclasses.replace(cfg.convergence, mode="uniform", levels=4))
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "cs"
    assert main(["convergence-study", path, "--output-dir", str(out), "--quiet"]) == EXIT_OK
    text = (out / "convergence.txt").read_text()
    orders = [float(v) for v in text.split("observed orders:")[1].split(",")]
    assert all(abs(p - 1.0) <= 0.25 for p in orders)


def test_cli_presets_listing(capsys):
    assert main(["presets"]) == EXIT_OK
    assert "preset:ampoule" in capsys.readouterr().out


def test_mesh_only_vtk(tmp_path):
    mesh = build_nested_rect_mesh(MeshSpec(1.0, 1.0, 0.25, 0.5))
    write_vtk(tmp_path / "m.vtk", mesh)
    text = (tmp_path / "m.vtk").read_text()
    assert "POINT_DATA" not in text and "CELL_DATA" in text
