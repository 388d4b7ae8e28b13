"""Legacy-VTK ASCII snapshots (unstructured grid, version 3.0)."""
from __future__ import annotations

import os

import numpy as np

from .geometry import Mesh

# phi is only defined on medium nodes; pure wall nodes carry this value
WALL_SENTINEL = -999.0
VTK_TRIANGLE = 5
TITLE = "phasefield snapshot"


def _fmt(values) -> str:
    return "\n".join("%.17g" % v for v in values)


def pad_phi(mesh: Mesh, phi: np.ndarray) -> np.ndarray:
    out = np.full(mesh.n_nodes, WALL_SENTINEL)
    inside = mesh.omega_of_u >= 0
    out[inside] = phi[mesh.omega_of_u[inside]]
    return out


def vtk_text(mesh: Mesh, u: np.ndarray | None = None, phi: np.ndarray | None = None) -> str:
    n, nt = mesh.n_nodes, len(mesh.triangles)
    lines = ["# vtk DataFile Version 3.0", TITLE, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += ["%.17g %.17g 0" % (x, y) for x, y in mesh.nodes]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += ["3 %d %d %d" % tuple(t) for t in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    if u is not None or phi is not None:
        lines.append(f"POINT_DATA {n}")
        if u is not None:
            lines += ["SCALARS u double 1", "LOOKUP_TABLE default", _fmt(u)]
        if phi is not None:
            lines += ["SCALARS phi double 1", "LOOKUP_TABLE default", _fmt(pad_phi(mesh, phi))]
    lines += [f"CELL_DATA {nt}", "SCALARS region int 1", "LOOKUP_TABLE default"]
    lines += [str(int(r)) for r in mesh.tri_region]
    return "\n".join(lines) + "\n"


def write_vtk(path, mesh: Mesh, u=None, phi=None) -> None:
    tmp = f"{path}.part"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write(vtk_text(mesh, u, phi))
    os.replace(tmp, path)


def read_vtk_point_data(path) -> dict[str, np.ndarray]:
    """Point scalars of a file written by :func:`write_vtk` (enough for tests and scripts)."""
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    out, i = {}, 0
    n = None
    while i < len(lines):
        head = lines[i].split()
        if head[:1] == ["POINT_DATA"]:
            n = int(head[1])
        elif head[:1] == ["CELL_DATA"]:
            n = None
        elif head[:1] == ["SCALARS"] and n is not None:
            out[head[1]] = np.array([float(v) for v in lines[i + 2:i + 2 + n]])
            i += 2 + n
            continue
        i += 1
    return out
