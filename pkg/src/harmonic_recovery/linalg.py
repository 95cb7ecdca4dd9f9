"""Dense algebra for the small m x m observation matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

DEFAULT_TAU = 1e-14
JACOBI_TOL = 1e-15
JACOBI_SWEEPS = 30


class SVDConvergenceError(ArithmeticError):
    pass


def _complete_basis(q, keep):
    """Fill the columns of ``q`` not flagged in ``keep`` with an orthonormal completion."""
    n = q.shape[0]
    basis = [q[:, j] for j in range(q.shape[1]) if keep[j]]
    extra = []
    for e in np.eye(n):
        if len(basis) + len(extra) == q.shape[1]:
            break
        v = e.copy()
        for _ in range(2):
            for b in basis + extra:
                v -= (b @ v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            extra.append(v / nv)
    out = q.copy()
    for j, v in zip(np.flatnonzero(~keep), extra):
        out[:, j] = v
    return out


def svd(mat, tol=JACOBI_TOL, max_sweeps=JACOBI_SWEEPS):
    """(U, s, Vt) with s sorted descending, via one-sided Jacobi rotations."""
    a = np.asarray(mat, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("svd expects a square matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    w, v, sweeps, converged = kernels.jacobi_svd(a, tol, max_sweeps)
    if not converged:
        raise SVDConvergenceError(f"one-sided Jacobi did not converge in {sweeps} sweeps")
    s = np.linalg.norm(w, axis=0)
    order = np.argsort(-s, kind="stable")
    s, w, v = s[order], w[:, order], v[:, order]
    nonzero = s > 0.0
    u = np.zeros_like(w)
    u[:, nonzero] = w[:, nonzero] / s[nonzero]
    if not np.all(nonzero):
        u = _complete_basis(u, nonzero)
    return u, s, v.T


def pinv_threshold(mat, tau_rel=DEFAULT_TAU):
    """Moore-Penrose pseudo-inverse keeping singular values > tau_rel * s_max."""
    if not 0.0 <= tau_rel < 1.0:
        raise ValueError("tau_rel must lie in [0, 1)")
    u, s, vt = svd(mat)
    keep = s > tau_rel * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def l1_opnorm(mat) -> float:
    """Operator norm on l1: largest absolute column sum."""
    return float(np.max(np.sum(np.abs(np.asarray(mat, dtype=float)), axis=0)))


def delta_bound(g_inv_norm, m, eps2):
    """Perturbation bound for the inverse observation matrix.

    Returns ``None`` when ``m * g_inv_norm * eps2 >= 1``; there the Neumann
    series argument gives no bound.
    """
    if g_inv_norm < 0 or m < 0 or eps2 < 0:
        raise ValueError("delta_bound inputs must be non-negative")
    q = m * g_inv_norm * eps2
    if q >= 1.0:
        return None
    return m * g_inv_norm ** 2 * eps2 / (1.0 - q)


def weighted_l2(z) -> float:
    """sqrt(mean(z_i^2))."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ValueError("weighted_l2 of an empty vector")
    return float(np.sqrt(np.mean(z * z)))


@dataclass
class ObservationMatrix:
    entries: np.ndarray
    tau_rel: float = DEFAULT_TAU
    _svd: tuple | None = field(default=None, repr=False)

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def svd(self):
        if self._svd is None:
            self._svd = svd(self.entries)
        return self._svd

    @property
    def singular_values(self):
        return self.svd[1]

    def kept(self, tau_rel=None):
        tau = self.tau_rel if tau_rel is None else tau_rel
        s = self.singular_values
        if not s.size or s[0] == 0.0:
            return np.zeros(s.shape, dtype=bool)
        return s > tau * s[0]

    def rank(self, tau_rel=None):
        return int(np.count_nonzero(self.kept(tau_rel)))

    def discarded(self, tau_rel=None):
        return self.m - self.rank(tau_rel)

    def condition(self, tau_rel=None):
        """s_max / smallest kept singular value."""
        r = self.rank(tau_rel)
        if r == 0:
            return float("inf")
        s = self.singular_values
        return float(s[0] / s[r - 1])

    def pinv(self, tau_rel=None):
        u, s, vt = self.svd
        keep = self.kept(tau_rel)
        inv = np.zeros_like(s)
        inv[keep] = 1.0 / s[keep]
        return (vt.T * inv) @ u.T

    def asymmetry(self):
        """max |G - G^T| relative to max |G|."""
        g = self.entries
        scale = np.max(np.abs(g))
        return float(np.max(np.abs(g - g.T)) / scale) if scale > 0 else 0.0
