"""Nested uniform triangulations of the square, the L-shape and a polygonal disc.

Refinement is red (each triangle split into 4 through its edge midpoints).
Vertex numbering is nested: the first ``n`` vertices of level k are the
vertices of level k-1 in the same order, followed by one new vertex per
level-(k-1) edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels

DEFAULT_MAX_LEVEL = 10
LOCATE_TOL = 1e-12


class MeshError(ValueError):
    pass


class OutsideDomainError(MeshError):
    def __init__(self, point, distance):
        self.point = tuple(point)
        self.distance = distance
        super().__init__(
            f"point {self.point} is outside the domain (distance {distance:.3e} to the nearest triangle)"
        )


class HierarchyError(MeshError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    n_sides: int = 4

    KINDS = ("unit_square", "l_shape", "polygon_disc")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise MeshError(f"unknown domain kind {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "polygon_disc" and self.n_sides < 3:
            raise MeshError("polygon_disc needs n_sides >= 3")

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], n_sides=int(d.get("n_sides", 4)))

    def to_dict(self):
        if self.kind == "polygon_disc":
            return {"kind": self.kind, "n_sides": self.n_sides}
        return {"kind": self.kind}


@dataclass(frozen=True, eq=False)
class TriMesh:
    """One level of a nested triangulation.

    ``midpoint_parents[j]`` holds the two level-(k-1) vertices whose edge
    midpoint produced vertex ``n_parent + j``.
    """

    level: int
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loop: np.ndarray
    parent: TriMesh | None = None
    midpoint_parents: np.ndarray | None = None
    spec: DomainSpec | None = field(default=None, repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def boundary_segments(self):
        """(start, end) coordinates of each boundary segment, in loop order."""
        a = self.vertices[self.boundary_loop]
        b = self.vertices[np.roll(self.boundary_loop, -1)]
        return a, b

    @cached_property
    def edges(self):
        """Unique undirected edges (sorted vertex pairs) and triangle->edge map."""
        t = self.triangles
        # local edge i joins vertices i and i+1
        raw = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
        raw = np.sort(raw, axis=1)
        uniq, inverse = np.unique(raw, axis=0, return_inverse=True)
        return uniq, inverse.reshape(-1, 3)

    @property
    def h(self):
        """Level-0 longest edge scaled by 2^-level."""
        root = self.ancestor(0)
        e = root.vertices[root.edges[0]]
        return float(np.max(np.linalg.norm(e[:, 1] - e[:, 0], axis=1))) * 2.0 ** (-self.level)

    def ancestor(self, level):
        m = self
        while m is not None and m.level > level:
            m = m.parent
        if m is None or m.level != level:
            raise HierarchyError(f"level {level} is not part of this hierarchy")
        return m

    def hierarchy(self):
        """Meshes from level 0 up to this one."""
        chain = []
        m = self
        while m is not None:
            chain.append(m)
            m = m.parent
        return chain[::-1]

    def is_boundary_vertex(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_loop] = True
        return mask


def _level0(spec):
    if spec.kind == "unit_square":
        v = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
        t = [(0, 1, 2), (0, 2, 3)]
        loop = [0, 1, 2, 3]
    elif spec.kind == "l_shape":
        # (-1,1)^2 minus the closed fourth quadrant; reentrant corner at the origin
        v = [(-1.0, -1.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 0.0),
             (1.0, 0.0), (-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)]
        squares = [(0, 1, 3, 2), (2, 3, 6, 5), (3, 4, 7, 6)]
        t = []
        for a, b, c, d in squares:
            t += [(a, b, c), (a, c, d)]
        loop = [0, 1, 3, 4, 7, 6, 5, 2]
    else:
        n = spec.n_sides
        ang = 2.0 * np.pi * np.arange(n) / n
        v = [(0.0, 0.0)] + list(zip(np.cos(ang), np.sin(ang)))
        t = [(0, 1 + j, 1 + (j + 1) % n) for j in range(n)]
        loop = list(range(1, n + 1))
    return TriMesh(
        level=0,
        vertices=np.array(v, dtype=np.float64),
        triangles=np.array(t, dtype=np.int64),
        boundary_loop=np.array(loop, dtype=np.int64),
        spec=spec,
    )


def refine(mesh: TriMesh) -> TriMesh:
    """Red refinement; boundary midpoints of the disc are projected to the circle."""
    edges, tri_edges = mesh.edges
    nv = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])

    # boundary loop: insert each segment's midpoint after its start vertex
    loop = mesh.boundary_loop
    seg = np.sort(np.stack([loop, np.roll(loop, -1)], axis=1), axis=1)
    seg_ids = _edge_index(edges, seg)
    if mesh.spec is not None and mesh.spec.kind == "polygon_disc":
        bm = mids[seg_ids]
        mids[seg_ids] = bm / np.linalg.norm(bm, axis=1)[:, None]
    new_loop = np.empty(2 * len(loop), dtype=np.int64)
    new_loop[0::2] = loop
    new_loop[1::2] = nv + seg_ids

    t = mesh.triangles
    # tri_edges[:, i] joins local vertices i and i+1
    m01 = nv + tri_edges[:, 0]
    m12 = nv + tri_edges[:, 1]
    m20 = nv + tri_edges[:, 2]
    children = np.stack(
        [
            np.stack([t[:, 0], m01, m20], axis=1),
            np.stack([m01, t[:, 1], m12], axis=1),
            np.stack([m20, m12, t[:, 2]], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)

    return TriMesh(
        level=mesh.level + 1,
        vertices=np.vstack([mesh.vertices, mids]),
        triangles=children,
        boundary_loop=new_loop,
        parent=mesh,
        midpoint_parents=edges,
        spec=mesh.spec,
    )


def _edge_index(edges, pairs):
    """Row index in the lexicographically sorted ``edges`` of each sorted pair."""
    key_e = edges[:, 0] * (edges.max() + 1) + edges[:, 1]
    key_p = pairs[:, 0] * (edges.max() + 1) + pairs[:, 1]
    idx = np.searchsorted(key_e, key_p)
    if np.any(idx >= len(key_e)) or np.any(key_e[np.minimum(idx, len(key_e) - 1)] != key_p):
        raise MeshError("boundary segment is not a mesh edge")
    return idx


def generate(spec: DomainSpec, k: int, max_level: int = DEFAULT_MAX_LEVEL) -> TriMesh:
    """Level-k mesh with the full hierarchy down to level 0 reachable via ``parent``."""
    if k < 0:
        raise MeshError("refinement level must be >= 0")
    if k > max_level:
        raise MeshError(f"refinement level {k} exceeds the configured maximum {max_level}")
    mesh = _level0(spec)
    for _ in range(k):
        mesh = refine(mesh)
    return mesh


def dist_to_boundary(mesh: TriMesh, p) -> float:
    a, b = mesh.boundary_segments
    return float(kernels.min_segment_distance(np.atleast_2d(np.asarray(p, dtype=float)), a, b)[0])


def dist_to_boundary_many(mesh: TriMesh, points) -> np.ndarray:
    a, b = mesh.boundary_segments
    return kernels.min_segment_distance(points, a, b)


def locate(mesh: TriMesh, p, tol: float = LOCATE_TOL):
    """(triangle index, barycentric coordinates) of ``p``; ties go to the lowest index."""
    tri, bary = locate_many(mesh, np.atleast_2d(np.asarray(p, dtype=float)), tol)
    return int(tri[0]), bary[0]


def locate_many(mesh: TriMesh, points, tol: float = LOCATE_TOL):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tri, bary = kernels.locate_points(mesh.vertices, mesh.triangles, points, tol)
    missing = np.flatnonzero(tri < 0)
    if missing.size:
        p = points[missing[0]]
        raise OutsideDomainError(p, dist_to_boundary(mesh, p))
    return tri, bary


def prolong(values, coarse: TriMesh, target: TriMesh) -> np.ndarray:
    """Inject a P1 coefficient vector from ``coarse`` into the finer ``target``."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) != coarse.n_vertices:
        raise HierarchyError(
            f"coefficient vector has length {len(values)}, mesh has {coarse.n_vertices} vertices"
        )
    if coarse.level > target.level or target.ancestor(coarse.level) is not coarse:
        raise HierarchyError("meshes do not belong to the same hierarchy")
    chain = []
    m = target
    while m is not coarse:
        chain.append(m)
        m = m.parent
    v = values
    for fine in reversed(chain):
        mp = fine.midpoint_parents
        v = np.concatenate([v, 0.5 * (v[mp[:, 0]] + v[mp[:, 1]])])
    return v


def dump(mesh: TriMesh, path) -> None:
    """Plain-text mesh: "nv nt nb", vertex lines, triangle lines, boundary indices."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_loop)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for b in mesh.boundary_loop:
            fh.write(f"{b}\n")


def load_dump(path):
    """Read a file written by :func:`dump` into (vertices, triangles, boundary_loop)."""
    with open(path) as fh:
        nv, nt, nb = (int(s) for s in fh.readline().split())
        rows = [fh.readline().split() for _ in range(nv + nt + nb)]
    vertices = np.array([[float(a), float(b)] for a, b in rows[:nv]])
    triangles = np.array([[int(s) for s in r] for r in rows[nv:nv + nt]], dtype=np.int64)
    loop = np.array([int(r[0]) for r in rows[nv + nt:]], dtype=np.int64)
    return vertices, triangles, loop
