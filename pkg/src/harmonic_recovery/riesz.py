"""Discrete Riesz representers of point evaluation on discrete harmonic functions.

For a point x the boundary function psi solves

    <psi, v>_{H^1(Gamma)} = (E_h v)(x)   for all boundary P1 functions v,

and phi = E_h psi is its discrete harmonic extension. ``representer_schur``
is the production path; the dense and saddle-point variants are independent
oracles for small meshes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .fem import (PointEval, SPDSolver, VolumeOperators, assemble_boundary_h1,
                  extend, point_eval)
from .linalg import DEFAULT_TAU, ObservationMatrix
from .mesh import TriMesh

DENSE_ORACLE_MAX_BOUNDARY = 2000
SADDLE_ORACLE_MAX_UNKNOWNS = 6000


class OracleSizeError(ValueError):
    pass


class RieszForms:
    """All operators needed for representers on one mesh, factorized once.

    Factorizations are read-only after construction, so representers for
    different points can be computed from several threads.
    """

    def __init__(self, mesh: TriMesh, solver_method=None):
        self.mesh = mesh
        self.volume = VolumeOperators(mesh, solver_method=solver_method)
        self.M_gamma, self.S_gamma = assemble_boundary_h1(mesh)
        self.B = (self.M_gamma + self.S_gamma).tocsc()
        self.boundary_solver = SPDSolver(self.B)

    @property
    def A(self):
        return self.volume.A

    @property
    def part(self):
        return self.volume.part

    def point_eval(self, p) -> PointEval:
        return point_eval(self.mesh, p)


@dataclass
class RieszPair:
    point: tuple
    psi: np.ndarray
    phi: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def value_at(self, ev: PointEval) -> float:
        return ev(self.phi)


def _split(forms, ev):
    e = ev.dense(forms.mesh.n_vertices)
    return e[forms.part.interior_ids], e[forms.part.boundary_ids]


def _diagnostics(forms, psi, phi, rhs):
    I = forms.part.interior_ids
    r_int = forms.A[I] @ phi
    scale = abs(forms.A).max() * max(np.max(np.abs(phi)), 1e-300)
    r_bdy = forms.B @ psi - rhs
    return {
        "interior_residual": float(np.max(np.abs(r_int), initial=0.0) / scale),
        "boundary_residual": float(np.linalg.norm(r_bdy) / max(np.linalg.norm(rhs), 1e-300)),
    }


def representer_schur(forms: RieszForms, x, scale: float = 1.0) -> RieszPair:
    """Representer via two interior solves and one boundary solve.

    ``scale`` multiplies the point-evaluation functional.
    """
    ev = forms.point_eval(x)
    e_I, e_B = _split(forms, ev)
    e_I, e_B = scale * e_I, scale * e_B
    z = forms.volume.interior_solver.solve(e_I)
    # rhs_j = (E_h g_j)(x) for the boundary nodal basis g_j
    rhs = e_B - forms.volume.A_IB.T @ z
    psi = forms.boundary_solver.solve(rhs)
    phi = extend(forms.volume, psi)
    return RieszPair(ev.target, psi, phi, _diagnostics(forms, psi, phi, rhs))


def representers(forms: RieszForms, points, threads: int = 1):
    """Schur representers for several points, optionally on a thread pool."""
    points = [tuple(map(float, p)) for p in points]
    if threads == 1 or len(points) <= 1:
        return [representer_schur(forms, p) for p in points]
    with ThreadPoolExecutor(max_workers=threads if threads > 0 else None) as pool:
        return list(pool.map(lambda p: representer_schur(forms, p), points))


def representer_dense_oracle(forms: RieszForms, x) -> RieszPair:
    """Builds the load vector by extending every boundary basis function explicitly."""
    nb = len(forms.part.boundary_ids)
    if nb > DENSE_ORACLE_MAX_BOUNDARY:
        raise OracleSizeError(f"{nb} boundary DOFs exceed the dense-oracle guard ({DENSE_ORACLE_MAX_BOUNDARY})")
    ev = forms.point_eval(x)
    ext = extend(forms.volume, np.eye(nb))  # column j = E_h g_j
    rhs = ev.apply(ext)
    psi = sla.solve(forms.B.toarray(), rhs, assume_a="pos")
    phi = extend(forms.volume, psi)
    pair = RieszPair(ev.target, psi, phi, _diagnostics(forms, psi, phi, rhs))
    pair.diagnostics["load"] = rhs
    return pair


def saddle_system(forms: RieszForms):
    """Dense symmetric indefinite matrix of the (phi, pi) block system."""
    n = forms.mesh.n_vertices
    I, B = forms.part.interior_ids, forms.part.boundary_ids
    nI = len(I)
    K = np.zeros((n + nI, n + nI))
    K[np.ix_(B, B)] = forms.B.toarray()
    A_cols = forms.A[:, I].toarray()
    K[:n, n:] = A_cols
    K[n:, :n] = A_cols.T
    return K


def representer_saddle_oracle(forms: RieszForms, x) -> RieszPair:
    """Solve the full saddle-point system; pi is returned in the diagnostics."""
    n = forms.mesh.n_vertices
    nI = len(forms.part.interior_ids)
    if n + nI > SADDLE_ORACLE_MAX_UNKNOWNS:
        raise OracleSizeError(f"{n + nI} unknowns exceed the saddle-oracle guard ({SADDLE_ORACLE_MAX_UNKNOWNS})")
    ev = forms.point_eval(x)
    K = saddle_system(forms)
    rhs = np.zeros(n + nI)
    rhs[:n] = ev.dense(n)
    try:
        sol = sla.solve(K, rhs, assume_a="sym")
    except sla.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular saddle-point system: {exc}") from exc
    phi = sol[:n]
    pi = np.zeros(n)
    pi[forms.part.interior_ids] = sol[n:]
    psi = phi[forms.part.boundary_ids].copy()
    e_I, e_B = _split(forms, ev)
    rhs_b = e_B - forms.volume.A_IB.T @ forms.volume.interior_solver.solve(e_I)
    pair = RieszPair(ev.target, psi, phi, _diagnostics(forms, psi, phi, rhs_b))
    pair.diagnostics["pi"] = pi
    return pair


def assemble_observation(forms: RieszForms, pairs, points, tau_rel=DEFAULT_TAU) -> ObservationMatrix:
    """G[i, j] = phi_j(x_i)."""
    if len(pairs) != len(points):
        raise ValueError("pairs and points differ in length")
    n = forms.mesh.n_vertices
    if any(len(p.phi) != n for p in pairs):
        raise ValueError("representer computed on a different mesh")
    phis = np.column_stack([p.phi for p in pairs]) if pairs else np.zeros((n, 0))
    G = np.vstack([forms.point_eval(x).apply(phis) for x in points]) if len(points) else np.zeros((0, 0))
    return ObservationMatrix(G, tau_rel=tau_rel)
