"""Recovery of u = u0 + u_H from point values with unknown boundary data."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exprlang import FieldExpr, eval_field, parse_field
from .fem import solve_u0
from .linalg import DEFAULT_TAU, ObservationMatrix, delta_bound, l1_opnorm
from .mesh import TriMesh
from .riesz import RieszForms, assemble_observation, representers

MIN_SEPARATION = 1e-10


class RankDeficiencyWarning(UserWarning):
    pass


@dataclass
class MeasurementSet:
    points: np.ndarray
    values: np.ndarray
    provenance: str = "external"
    field_source: str | None = None
    noise: float = 0.0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.values = np.asarray(self.values, dtype=float).ravel()
        if len(self.points) != len(self.values):
            raise ValueError(f"{len(self.points)} points but {len(self.values)} values")
        if len(self.points) > 1:
            d = np.linalg.norm(self.points[:, None] - self.points[None], axis=-1)
            d[np.diag_indices_from(d)] = np.inf
            if d.min() <= MIN_SEPARATION:
                i, j = np.unravel_index(np.argmin(d), d.shape)
                raise ValueError(f"measurement points {i} and {j} coincide")

    @property
    def m(self):
        return len(self.values)


def box_formation(m: int) -> np.ndarray:
    """Ring of m points about 0.1 inside the unit square, m/4 per side.

    Point i on each side sits at (i + 1)/17 along it.
    """
    if m <= 0 or m % 4:
        raise ValueError("box formation needs a positive multiple of 4 points")
    pts = []
    for i in range(m // 4):
        t = (i + 1) / 17
        pts += [(0.9, t), (0.1, t), (t, 0.1), (t, 0.9)]
    return np.array(pts)


def grid_formation(m: int) -> np.ndarray:
    """Uniform k x k lattice strictly inside the unit square (m = k^2)."""
    k = math.isqrt(m)
    if m <= 0 or k * k != m:
        raise ValueError("grid formation needs a perfect-square number of points")
    t = np.arange(1, k + 1) / (k + 1)
    xx, yy = np.meshgrid(t, t, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def synthesize_measurements(exact: FieldExpr | str, points, noise: float = 0.0, rng=None) -> MeasurementSet:
    """Values of the analytic field at the points, optionally with uniform noise."""
    if isinstance(exact, str):
        exact = parse_field(exact)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.array([eval_field(exact, p) for p in points])
    if noise:
        rng = np.random.default_rng(rng)
        values = values + noise * rng.uniform(-1.0, 1.0, size=values.shape)
    return MeasurementSet(points, values, provenance="synthetic", field_source=exact.source, noise=noise)


@dataclass
class RecoveryResult:
    u0h: np.ndarray
    pairs: list
    Ghat: ObservationMatrix
    Uhat: np.ndarray
    ustar: np.ndarray
    omega_hat: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def uH(self):
        return self.ustar - self.u0h


def run_recovery(mesh: TriMesh, f: FieldExpr | str, meas: MeasurementSet, tau_rel: float = DEFAULT_TAU,
                 forms: RieszForms | None = None, threads: int = 1) -> RecoveryResult:
    if isinstance(f, str):
        f = parse_field(f)
    if forms is None:
        forms = RieszForms(mesh)
    evals = [forms.point_eval(p) for p in meas.points]

    u0h = solve_u0(mesh, f, ops=forms.volume)
    omega_hat = meas.values - np.array([ev(u0h) for ev in evals])

    pairs = representers(forms, meas.points, threads=threads)
    G = assemble_observation(forms, pairs, meas.points, tau_rel=tau_rel)
    Uhat = G.pinv(tau_rel) @ omega_hat

    phis = np.column_stack([p.phi for p in pairs])
    ustar = u0h + phis @ Uhat

    residuals = np.array([ev(ustar) for ev in evals]) - meas.values
    discarded = G.discarded(tau_rel)
    diag = {
        "m": meas.m,
        "condition": G.condition(tau_rel),
        "discarded": discarded,
        "singular_values": G.singular_values.tolist(),
        "residuals": residuals.tolist(),
        "max_residual": float(np.max(np.abs(residuals))),
        "asymmetry": G.asymmetry(),
        "warnings": [],
    }
    if discarded:
        msg = f"{discarded} of {meas.m} singular values below {tau_rel:g} * s_max were discarded"
        diag["warnings"].append(msg)
        warnings.warn(msg, RankDeficiencyWarning, stacklevel=2)
    return RecoveryResult(u0h, pairs, G, Uhat, ustar, omega_hat, diag)


@dataclass
class NearOptimalityReport:
    m: int
    g_inv_norm: float
    delta: float | None
    epsilon: float
    diverged: bool
    message: str = ""


def near_optimality_report(result: RecoveryResult, eps1: float, eps2: float, f_bound: float = 0.0,
                           harmonic_bound: float = 0.0, c_x: float = 0.0) -> NearOptimalityReport:
    """Evaluate the tolerance budget of the near-optimality bound.

    ``f_bound`` stands in for Lambda_0 ||f||, ``harmonic_bound`` for
    Lambda_{s,d} C_B and ``c_x`` for max_j |phi_j|_X; none of them can be
    computed from a single run, so they are caller-supplied proxies. The
    norm of the thresholded pseudo-inverse of G-hat is used for ||G^-1||.
    """
    m = result.Ghat.m
    g = l1_opnorm(result.Ghat.pinv())
    delta = delta_bound(g, m, eps2)
    if delta is None:
        return NearOptimalityReport(m, g, None, math.inf, True, "eps2 exceeds eps2_bar: no perturbation bound")
    eps = (eps1
           + m * g * (2.0 * f_bound + harmonic_bound) * eps2
           + (c_x + eps2) * (m * g * eps1 + m * (harmonic_bound + f_bound + eps1) * delta))
    return NearOptimalityReport(m, g, delta, eps, False)

