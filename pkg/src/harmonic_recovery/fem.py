"""Piecewise-linear finite element operators on a :class:`~.mesh.TriMesh`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .exprlang import FieldExpr, eval_field_array, is_zero
from .mesh import TriMesh, locate

MASS_LOCAL = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
RESIDUAL_TOL = 1e-12
# direct factorization up to this many unknowns, preconditioned CG beyond
DIRECT_LIMIT = 2_000_000


class AssemblyError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message if residual is None else f"{message} (relative residual {residual:.3e})")


@dataclass(frozen=True)
class DofPartition:
    interior_ids: np.ndarray
    boundary_ids: np.ndarray  # boundary loop order

    @classmethod
    def from_mesh(cls, mesh: TriMesh):
        mask = mesh.is_boundary_vertex()
        return cls(np.flatnonzero(~mask), np.asarray(mesh.boundary_loop, dtype=np.int64))

    @property
    def n(self):
        return len(self.interior_ids) + len(self.boundary_ids)


@dataclass(frozen=True)
class PointEval:
    target: tuple
    triangle: int
    vertex_ids: np.ndarray
    weights: np.ndarray

    def __call__(self, coeffs):
        return float(np.dot(np.asarray(coeffs)[..., self.vertex_ids], self.weights))

    def apply(self, coeffs):
        """Evaluate one coefficient vector or the columns of a (n, k) array."""
        return self.weights @ np.asarray(coeffs)[self.vertex_ids]

    def dense(self, n):
        e = np.zeros(n)
        np.add.at(e, self.vertex_ids, self.weights)
        return e


def _symmetric(rows, cols, vals, n):
    a = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    # (A + A^T)/2 is bitwise symmetric: a_ij + a_ji == a_ji + a_ij
    a = (a + a.T) * 0.5
    a.sort_indices()
    return a.tocsr()


def _triplets(triangles):
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    return rows, cols


def _check_areas(areas):
    bad = np.flatnonzero(areas <= 0.0)
    if bad.size:
        raise AssemblyError(f"degenerate or inverted triangle {bad[0]} (area {areas[bad[0]]:.3e})")


def assemble_volume_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """A[i, j] = integral of grad N_i . grad N_j over the domain."""
    areas, kloc = kernels.element_stiffness(mesh.vertices, mesh.triangles)
    _check_areas(areas)
    rows, cols = _triplets(mesh.triangles)
    return _symmetric(rows, cols, kloc.ravel(), mesh.n_vertices)


def assemble_volume_mass(mesh: TriMesh) -> sp.csr_matrix:
    areas = mesh.areas
    _check_areas(areas)
    rows, cols = _triplets(mesh.triangles)
    vals = (areas[:, None, None] * MASS_LOCAL[None]).ravel()
    return _symmetric(rows, cols, vals, mesh.n_vertices)


def assemble_boundary_h1(mesh: TriMesh):
    """Periodic 1D P1 mass and stiffness along the boundary loop (boundary numbering)."""
    a, b = mesh.boundary_segments
    lengths = np.linalg.norm(b - a, axis=1)
    if np.any(lengths <= 0.0):
        raise AssemblyError("zero-length boundary segment")
    nb = len(lengths)
    i = np.arange(nb)
    j = (i + 1) % nb
    rows = np.concatenate([i, i, j, j])
    cols = np.concatenate([i, j, i, j])
    mvals = np.concatenate([2 * lengths, lengths, lengths, 2 * lengths]) / 6.0
    inv = 1.0 / lengths
    svals = np.concatenate([inv, -inv, -inv, inv])
    return _symmetric(rows, cols, mvals, nb), _symmetric(rows, cols, svals, nb)


def point_eval(mesh: TriMesh, p) -> PointEval:
    tri, bary = locate(mesh, p)
    return PointEval(tuple(float(c) for c in p), tri, mesh.triangles[tri].copy(), bary)


def load_vector(mesh: TriMesh, f: FieldExpr) -> np.ndarray:
    """F_i = integral of f N_i by the edge-midpoint rule (exact for quadratics)."""
    t = mesh.triangles
    v = mesh.vertices
    # midpoint of local edge (i, i+1)
    m = np.stack([0.5 * (v[t[:, 0]] + v[t[:, 1]]),
                  0.5 * (v[t[:, 1]] + v[t[:, 2]]),
                  0.5 * (v[t[:, 2]] + v[t[:, 0]])], axis=1)
    fm = eval_field_array(f, m[..., 0], m[..., 1])
    # N_i is 1/2 at the two midpoints adjacent to vertex i
    w = mesh.areas[:, None] / 3.0 * 0.5
    local = np.stack([fm[:, 0] + fm[:, 2], fm[:, 0] + fm[:, 1], fm[:, 1] + fm[:, 2]], axis=1) * w
    return np.bincount(t.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


class SPDSolver:
    """Solve with a fixed symmetric positive definite sparse matrix to a relative tolerance.

    Uses a sparse direct factorization (computed once, read-only afterwards)
    unless the matrix is larger than ``direct_limit``, in which case
    Jacobi-preconditioned conjugate gradients are used.
    """

    def __init__(self, matrix, tol=RESIDUAL_TOL, method=None, direct_limit=DIRECT_LIMIT):
        self.matrix = sp.csc_matrix(matrix)
        self.tol = tol
        n = self.matrix.shape[0]
        self._norm = spla.norm(self.matrix, np.inf) if n else 0.0
        if method is None:
            method = "direct" if n <= direct_limit else "cg"
        self.method = method
        self._lu = None
        if method == "direct" and n > 0:
            try:
                self._lu = spla.splu(
                    self.matrix,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            except (MemoryError, RuntimeError):
                self.method = "cg"
        if self.method == "cg":
            d = self.matrix.diagonal()
            self._jacobi = spla.LinearOperator((n, n), matvec=lambda x: x / d, dtype=np.float64)

    @property
    def n(self):
        return self.matrix.shape[0]

    def _residual(self, x, b):
        """Normwise backward error ||Ax - b|| / (||A|| ||x|| + ||b||), worst column."""
        r = self.matrix @ x - b
        scale = self._norm * np.linalg.norm(x, axis=0) + np.linalg.norm(b, axis=0)
        return np.max(np.linalg.norm(r, axis=0) / np.where(scale > 0, scale, 1.0))

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if self.n == 0:
            return np.zeros_like(b)
        if self._lu is not None:
            x = self._lu.solve(b)
            res = self._residual(x, b)
            if res > self.tol:
                # one step of iterative refinement
                x = x - self._lu.solve(self.matrix @ x - b)
                res = self._residual(x, b)
            if res > self.tol:
                raise SolverError("direct solve did not reach the tolerance", res)
            return x
        if b.ndim == 2:
            return np.column_stack([self.solve(col) for col in b.T])
        x, info = spla.cg(self.matrix, b, rtol=self.tol, atol=0.0,
                          maxiter=10 * self.n, M=self._jacobi)
        res = self._residual(x, b)
        if info != 0 or res > 10 * self.tol:
            raise SolverError("conjugate gradients did not converge", res)
        return x


class VolumeOperators:
    """Stiffness matrix, DOF split and the interior factorization for one mesh."""

    def __init__(self, mesh: TriMesh, solver_method=None):
        self.mesh = mesh
        self.A = assemble_volume_stiffness(mesh)
        self.part = DofPartition.from_mesh(mesh)
        I, B = self.part.interior_ids, self.part.boundary_ids
        self.A_II = self.A[I][:, I].tocsc()
        self.A_IB = self.A[I][:, B].tocsr()
        self.interior_solver = SPDSolver(self.A_II, method=solver_method)


def harmonic_extend(mesh, A, part: DofPartition, g, solver: SPDSolver | None = None) -> np.ndarray:
    """Discrete harmonic extension of boundary values ``g`` (loop order)."""
    g = np.asarray(g, dtype=np.float64)
    I, B = part.interior_ids, part.boundary_ids
    if g.shape[0] != len(B):
        raise ValueError(f"boundary vector has length {g.shape[0]}, expected {len(B)}")
    if solver is None:
        solver = SPDSolver(A[I][:, I])
    u = np.zeros((part.n,) + g.shape[1:])
    u[B] = g
    u[I] = solver.solve(-(A[I][:, B] @ g))
    return u


def extend(ops: VolumeOperators, g) -> np.ndarray:
    """:func:`harmonic_extend` reusing the operators' factorization."""
    g = np.asarray(g, dtype=np.float64)
    I, B = ops.part.interior_ids, ops.part.boundary_ids
    u = np.zeros((ops.part.n,) + g.shape[1:])
    u[B] = g
    u[I] = ops.interior_solver.solve(-(ops.A_IB @ g))
    return u


def solve_u0(mesh: TriMesh, f: FieldExpr, ops: VolumeOperators | None = None) -> np.ndarray:
    """Homogeneous Dirichlet Poisson solve: -lap u0 = f, u0 = 0 on the boundary."""
    if is_zero(f):
        return np.zeros(mesh.n_vertices)
    if ops is None:
        ops = VolumeOperators(mesh)
    F = load_vector(mesh, f)
    u = np.zeros(mesh.n_vertices)
    u[ops.part.interior_ids] = ops.interior_solver.solve(F[ops.part.interior_ids])
    return u
