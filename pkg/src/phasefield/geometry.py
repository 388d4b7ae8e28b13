"""Structured triangulations of a rectangular container with a rectangular cavity.

The container ``U`` is the outer rectangle ``[0, w] x [0, h]``; the medium
``Omega`` is the inner rectangle inset by the wall thickness; the wall region
``D`` is what is left. Grid lines are snapped to the cavity boundary so the
interface is resolved exactly by mesh edges.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

WALL = 0
MEDIUM = 1

OUTER = 0
INTERFACE = 1

REGION_NAMES = {WALL: "WALL", MEDIUM: "MEDIUM"}
EDGE_TAG_NAMES = {OUTER: "OUTER", INTERFACE: "INTERFACE"}


class MeshSpecError(ValueError):
    pass


@dataclass(frozen=True)
class MeshSpec:
    outer_width: float
    outer_height: float
    wall_thickness: float
    target_h: float

    def problems(self) -> list[str]:
        out = []
        if not self.outer_width > 0:
            out.append(f"outer_width must be positive, got {self.outer_width}")
        if not self.outer_height > 0:
            out.append(f"outer_height must be positive, got {self.outer_height}")
        if not self.wall_thickness >= 0:
            out.append(f"wall_thickness must be non-negative, got {self.wall_thickness}")
        if not self.target_h > 0:
            out.append(f"target_h must be positive, got {self.target_h}")
        if not out:
            if self.outer_width <= 2 * self.wall_thickness:
                out.append("outer_width must exceed twice the wall thickness")
            if self.outer_height <= 2 * self.wall_thickness:
                out.append("outer_height must exceed twice the wall thickness")
        return out

    @property
    def medium_area(self) -> float:
        t = self.wall_thickness
        return (self.outer_width - 2 * t) * (self.outer_height - 2 * t)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming P1 triangulation with region and boundary tags.

    ``omega_of_u[i]`` is the medium index of container node ``i`` or -1 for
    nodes that only touch wall triangles. Interface nodes are shared, so a
    single nodal temperature serves both regions.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    tri_region: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    omega_of_u: np.ndarray
    spec: MeshSpec | None = None
    u_of_omega: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("nodes", "triangles", "tri_region", "boundary_edges", "edge_tags", "omega_of_u"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        omega = self.omega_of_u
        inv = np.full(int(omega.max()) + 1 if omega.size and omega.max() >= 0 else 0, -1, dtype=np.int64)
        valid = np.nonzero(omega >= 0)[0]
        inv[omega[valid]] = valid
        object.__setattr__(self, "u_of_omega", _frozen(inv))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_omega(self) -> int:
        return len(self.u_of_omega)

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def region_area(self, region: int | None = None) -> float:
        a = self.triangle_areas()
        if region is None:
            return float(a.sum())
        return float(a[self.tri_region == region].sum())

    def edges_with_tag(self, tag: int) -> np.ndarray:
        return self.boundary_edges[self.edge_tags == tag]

    def max_edge_length(self) -> float:
        p = self.nodes[self.triangles]
        lens = [np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)]
        return float(np.max(lens))


def _axis_lines(length: float, wall: float, h: float) -> np.ndarray:
    if wall > 0:
        breaks = [0.0, wall, length - wall, length]
    else:
        breaks = [0.0, length]
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        seg = np.linspace(a, b, n + 1)
        seg[0], seg[-1] = a, b
        pieces.append(seg if not pieces else seg[1:])
    return np.concatenate(pieces)


def _edge_map(triangles: np.ndarray) -> dict[tuple[int, int], list[int]]:
    emap: dict[tuple[int, int], list[int]] = defaultdict(list)
    for t, tri in enumerate(triangles.tolist()):
        for k in range(3):
            a, b = tri[k], tri[(k + 1) % 3]
            emap[(a, b) if a < b else (b, a)].append(t)
    return emap


def build_nested_rect_mesh(spec: MeshSpec) -> Mesh:
    problems = spec.problems()
    if problems:
        raise MeshSpecError("invalid mesh spec: " + "; ".join(problems))

    t = spec.wall_thickness
    xs = _axis_lines(spec.outer_width, t, spec.target_h)
    ys = _axis_lines(spec.outer_height, t, spec.target_h)
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    a = j * (nx + 1) + i
    b = a + 1
    c = a + nx + 2
    d = a + nx + 1
    # alternate the diagonal in a checkerboard to avoid a preferred direction
    flip = (i + j) % 2 == 1
    t1 = np.where(flip[:, None], np.column_stack([a, b, d]), np.column_stack([a, b, c]))
    t2 = np.where(flip[:, None], np.column_stack([b, c, d]), np.column_stack([a, c, d]))
    triangles = np.empty((2 * len(a), 3), dtype=np.int64)
    triangles[0::2] = t1
    triangles[1::2] = t2

    cx = 0.5 * (xs[i] + xs[i + 1])
    cy = 0.5 * (ys[j] + ys[j + 1])
    inside = (cx > t) & (cx < spec.outer_width - t) & (cy > t) & (cy < spec.outer_height - t)
    tri_region = np.repeat(np.where(inside, MEDIUM, WALL), 2).astype(np.int8)

    edges, tags = [], []
    for (p, q), tris in sorted(_edge_map(triangles).items()):
        if len(tris) == 1:
            edges.append((p, q))
            tags.append(OUTER)
        elif tri_region[tris[0]] != tri_region[tris[1]]:
            edges.append((p, q))
            tags.append(INTERFACE)

    medium_nodes = np.unique(triangles[tri_region == MEDIUM])
    omega_of_u = np.full(len(nodes), -1, dtype=np.int64)
    omega_of_u[medium_nodes] = np.arange(len(medium_nodes))

    return Mesh(
        nodes=nodes,
        triangles=triangles,
        tri_region=tri_region,
        boundary_edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        edge_tags=np.asarray(tags, dtype=np.int8),
        omega_of_u=omega_of_u,
        spec=spec,
    )


def validate_mesh(mesh: Mesh) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    violations: list[str] = []
    n = mesh.n_nodes
    tris = np.asarray(mesh.triangles)
    if tris.size and (tris.min() < 0 or tris.max() >= n):
        bad = np.nonzero((tris < 0).any(axis=1) | (tris >= n).any(axis=1))[0]
        for t in bad:
            violations.append(f"triangle {t}: node index out of range {tris[t].tolist()}")
        return violations

    areas = mesh.triangle_areas()
    for t in np.nonzero(~(areas > 0))[0]:
        violations.append(f"triangle {t}: negative area ({areas[t]:.3e})")

    for t in np.nonzero(~np.isin(mesh.tri_region, (WALL, MEDIUM)))[0]:
        violations.append(f"triangle {t}: unknown region tag {mesh.tri_region[t]}")

    emap = _edge_map(tris)
    tagged: dict[tuple[int, int], int] = {}
    for (p, q), tag in zip(mesh.boundary_edges.tolist(), mesh.edge_tags.tolist()):
        key = (p, q) if p < q else (q, p)
        if key in tagged:
            violations.append(f"edge {key}: tagged more than once")
        tagged[key] = tag

    lo = mesh.nodes.min(axis=0)
    hi = mesh.nodes.max(axis=0)

    def on_hull(key):
        pts = mesh.nodes[list(key)]
        return any(
            np.all(np.isclose(pts[:, ax], v, rtol=0.0, atol=1e-12 * (1 + abs(v))))
            for ax in (0, 1)
            for v in (lo[ax], hi[ax])
        )

    for key, owners in emap.items():
        tag = tagged.get(key)
        if len(owners) > 2:
            violations.append(f"edge {key}: shared by {len(owners)} triangles {owners}")
            continue
        if len(owners) == 1:
            if not on_hull(key):
                violations.append(f"edge {key}: bounds one triangle but is interior (hanging node or gap)")
            elif tag != OUTER:
                violations.append(f"edge {key}: outer boundary edge not tagged OUTER")
            continue
        regions = {int(mesh.tri_region[o]) for o in owners}
        if tag == OUTER:
            violations.append(f"edge {key}: tagged OUTER but shared by triangles {owners}")
        elif tag == INTERFACE and regions != {WALL, MEDIUM}:
            violations.append(
                f"edge {key}: tagged INTERFACE but separates "
                + "/".join(REGION_NAMES.get(int(mesh.tri_region[o]), "?") for o in owners)
                + " triangles"
            )
        elif tag is None and regions == {WALL, MEDIUM}:
            violations.append(f"edge {key}: separates MEDIUM and WALL but is not tagged INTERFACE")
    for key in tagged:
        if key not in emap:
            violations.append(f"edge {key}: tagged but not an edge of any triangle")

    medium = np.zeros(n, dtype=bool)
    medium[tris[mesh.tri_region == MEDIUM].ravel()] = True
    omega = np.asarray(mesh.omega_of_u)
    if omega.shape != (n,):
        violations.append(f"omega_of_u: length {omega.shape} does not match {n} nodes")
        return violations
    for v in np.nonzero(medium & (omega < 0))[0]:
        violations.append(f"node {v}: touches a MEDIUM triangle but has no medium index")
    for v in np.nonzero(~medium & (omega >= 0))[0]:
        violations.append(f"node {v}: has medium index {omega[v]} but touches no MEDIUM triangle")
    idx = np.sort(omega[omega >= 0])
    if not np.array_equal(idx, np.arange(len(idx))):
        violations.append("omega_of_u: medium indices are not a permutation of 0..n_omega-1")
    return violations
