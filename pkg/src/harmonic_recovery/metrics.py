"""Error norms between P1 fields of one hierarchy and convergence studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exprlang import FieldExpr, eval_field_array, parse_field
from .fem import assemble_volume_mass, assemble_volume_stiffness
from .linalg import DEFAULT_TAU
from .mesh import DomainSpec, HierarchyError, TriMesh, dist_to_boundary, dist_to_boundary_many, generate, prolong
from .recovery import MeasurementSet, run_recovery
from .riesz import RieszForms, representer_schur

DEFAULT_MIN_GAP = 2


class EmptyRegionError(ValueError):
    pass


class ErrorNorms:
    """H1, L-infinity and interior L-infinity norms on one fine mesh.

    L-infinity norms are sampled at the fine vertices and triangle centroids.
    """

    def __init__(self, fine: TriMesh, forms: RieszForms | None = None):
        self.fine = fine
        A = forms.A if forms is not None else assemble_volume_stiffness(fine)
        self.energy = (A + assemble_volume_mass(fine)).tocsr()
        nv, nt = fine.n_vertices, fine.n_triangles
        rows = np.concatenate([np.arange(nv), np.repeat(np.arange(nv, nv + nt), 3)])
        cols = np.concatenate([np.arange(nv), fine.triangles.ravel()])
        vals = np.concatenate([np.ones(nv), np.full(3 * nt, 1.0 / 3.0)])
        self.sample = sp.csr_matrix((vals, (rows, cols)), shape=(nv + nt, nv))
        self.points = np.vstack([fine.vertices, fine.centroids])
        self._dist = None

    @property
    def dist(self):
        if self._dist is None:
            self._dist = dist_to_boundary_many(self.fine, self.points)
        return self._dist

    def lift(self, v):
        """Prolong a coefficient vector of any hierarchy level to the fine mesh."""
        v = np.asarray(v, dtype=float)
        for m in self.fine.hierarchy():
            if m.n_vertices == len(v):
                return prolong(v, m, self.fine)
        raise HierarchyError(f"no level of the hierarchy has {len(v)} vertices")

    def h1(self, a, b):
        e = self.lift(a) - self.lift(b)
        return float(math.sqrt(max(e @ (self.energy @ e), 0.0)))

    def sampled_difference(self, a, b):
        return self.sample @ (self.lift(a) - self.lift(b))

    def mask(self, d):
        if d < 0:
            raise ValueError("d must be non-negative")
        if d == 0:
            # the sup over the open domain equals the max over its closure
            return np.ones(len(self.points), dtype=bool)
        m = self.dist > d
        if not np.any(m):
            raise EmptyRegionError(f"no evaluation point lies farther than d = {d} from the boundary")
        return m

    def linf(self, a, b):
        return float(np.max(np.abs(self.sampled_difference(a, b))))

    def linf_d(self, a, b, d):
        diff = self.sampled_difference(a, b)
        return float(np.max(np.abs(diff[self.mask(d)])))

    def exact_samples(self, exact: FieldExpr):
        return eval_field_array(exact, self.points[:, 0], self.points[:, 1])


def h1_error(fine_mesh, a, b):
    return ErrorNorms(fine_mesh).h1(a, b)


def linf_error(fine_mesh, a, b):
    return ErrorNorms(fine_mesh).linf(a, b)


def linf_d_error(fine_mesh, a, b, d):
    return ErrorNorms(fine_mesh).linf_d(a, b, d)


def rates(errors):
    """log2(err[k-1]/err[k]); None for the first entry or non-positive errors."""
    out = [None]
    for prev, cur in zip(errors[:-1], errors[1:]):
        out.append(math.log2(prev / cur) if prev > 0 and cur > 0 else None)
    return out


def lsq_rate(levels, errors):
    """Least-squares slope p of log2(err) = c - p * level."""
    k = np.asarray(levels, dtype=float)
    y = np.log2(np.asarray(errors, dtype=float))
    slope = np.polyfit(k, y, 1)[0]
    return float(-slope)


@dataclass
class ErrorRow:
    level: int
    h: float
    err_h1: float
    err_linf: float
    err_linf_d: float
    rate_h1: float | None = None
    rate_linf: float | None = None
    rate_linf_d: float | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class ErrorReport:
    rows: list
    surrogate_level: int
    d: float
    kind: str = "riesz"

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def lsq_rate(self, name, k_from=None, k_to=None):
        rows = [r for r in self.rows
                if (k_from is None or r.level >= k_from) and (k_to is None or r.level <= k_to)]
        return lsq_rate([r.level for r in rows], [getattr(r, name) for r in rows])


def _fill_rates(rows):
    for name in ("h1", "linf", "linf_d"):
        for r, rate in zip(rows, rates([getattr(r, "err_" + name) for r in rows])):
            setattr(r, "rate_" + name, rate)


def _check_levels(k_min, k_max, K, min_gap):
    if not 0 <= k_min <= k_max:
        raise ValueError("need 0 <= k_min <= k_max")
    if K - k_max < min_gap:
        raise ValueError(f"surrogate level K={K} must exceed k_max={k_max} by at least {min_gap}")


def convergence_study(spec: DomainSpec, k_min: int, k_max: int, K: int, d: float, point=None,
                      meas: MeasurementSet | None = None, f="0", exact_field=None,
                      tau_rel: float = DEFAULT_TAU, min_gap: int = DEFAULT_MIN_GAP,
                      threads: int = 1, max_level: int | None = None) -> ErrorReport:
    """Overrefinement errors of one representer, or recovery errors against an exact field.

    With ``point`` the reference is the level-K representer. With ``meas``
    the recovery at each level is compared with ``exact_field`` (analytic
    values for L-infinity, its level-K nodal interpolant for H1).
    """
    if (point is None) == (meas is None):
        raise ValueError("give exactly one of point or meas")
    _check_levels(k_min, k_max, K, min_gap)
    fine = generate(spec, K) if max_level is None else generate(spec, K, max_level=max_level)
    fine_forms = RieszForms(fine)
    norms = ErrorNorms(fine, fine_forms)
    norms.mask(d)

    rows = []
    if point is not None:
        ref = representer_schur(fine_forms, point).phi
        ref_samples = norms.sample @ ref
        for k in range(k_min, k_max + 1):
            forms = RieszForms(fine.ancestor(k))
            phi = representer_schur(forms, point).phi
            diff = norms.sample @ norms.lift(phi) - ref_samples
            rows.append(ErrorRow(k, fine.ancestor(k).h, norms.h1(ref, phi),
                                 float(np.max(np.abs(diff))),
                                 float(np.max(np.abs(diff[norms.mask(d)])))))
        kind = "riesz"
    else:
        if exact_field is None:
            raise ValueError("recovery studies need exact_field")
        if isinstance(exact_field, str):
            exact_field = parse_field(exact_field)
        exact_samples = norms.exact_samples(exact_field)
        exact_nodal = exact_samples[:fine.n_vertices]
        for k in range(k_min, k_max + 1):
            mesh = fine.ancestor(k)
            forms = fine_forms if k == K else RieszForms(mesh)
            res = run_recovery(mesh, f, meas, tau_rel=tau_rel, forms=forms, threads=threads)
            diff = norms.sample @ norms.lift(res.ustar) - exact_samples
            rows.append(ErrorRow(k, mesh.h, norms.h1(exact_nodal, res.ustar),
                                 float(np.max(np.abs(diff))),
                                 float(np.max(np.abs(diff[norms.mask(d)]))),
                                 extra={
                                     "max_residual": res.diagnostics["max_residual"],
                                     "discarded": res.diagnostics["discarded"],
                                     "condition": res.diagnostics["condition"],
                                     "warnings": res.diagnostics["warnings"],
                                 }))
        kind = "recovery"
    _fill_rates(rows)
    return ErrorReport(rows, K, d, kind)


@dataclass
class ProximityRow:
    point: tuple
    d: float
    err_h1: float
    err_linf: float


def boundary_proximity_study(spec: DomainSpec, points, k: int, K: int) -> list:
    """||phi_K - phi_k|| in H1 and L-infinity for a sequence of points."""
    if k >= K:
        raise ValueError("need k < K")
    fine = generate(spec, K)
    fine_forms = RieszForms(fine)
    coarse_forms = RieszForms(fine.ancestor(k))
    norms = ErrorNorms(fine, fine_forms)
    out = []
    for p in points:
        p = tuple(float(c) for c in p)
        ref = representer_schur(fine_forms, p).phi
        phi = representer_schur(coarse_forms, p).phi
        out.append(ProximityRow(p, dist_to_boundary(fine, p), norms.h1(ref, phi), norms.linf(ref, phi)))
    return out
