"""Pure-Python/numpy versions of the compiled kernels in ``_ckernels.pyx``."""

import numpy as np


def element_stiffness(vertices, triangles):
    p = vertices[triangles]  # (nt, 3, 2)
    # edge opposite vertex i
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    areas = 0.5 * (e[:, 2, 0] * -e[:, 1, 1] - e[:, 2, 1] * -e[:, 1, 0])
    with np.errstate(divide="ignore"):
        scale = np.where(areas == 0.0, 0.0, 0.25 / np.where(areas == 0.0, 1.0, areas))
    kloc = np.einsum("tid,tjd->tij", e, e) * scale[:, None, None]
    return areas, kloc


def jacobi_svd(a, tol=1e-15, max_sweeps=30):
    """One-sided (Hestenes) Jacobi. Returns (A V as columns, V, sweeps, converged)."""
    wt = np.array(a, dtype=np.float64).T.copy()
    n = wt.shape[0]
    vt = np.eye(n)
    sweep = 0
    rotated = True
    while rotated and sweep < max_sweeps:
        rotated = False
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                wp, wq = wt[p], wt[q]
                alpha = float(wp @ wp)
                beta = float(wq @ wq)
                gamma = float(wp @ wq)
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                wt[p], wt[q] = c * wp - s * wq, s * wp + c * wq
                vp, vq = vt[p], vt[q]
                vt[p], vt[q] = c * vp - s * vq, s * vp + c * vq
    return wt.T.copy(), vt.T.copy(), sweep, not rotated


def min_segment_distance(points, seg_a, seg_b, chunk=4096):
    d = seg_b - seg_a
    len2 = np.einsum("ij,ij->i", d, d)
    safe = np.where(len2 > 0.0, len2, 1.0)
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk, None, :]
        t = np.einsum("psd,sd->ps", p - seg_a[None], d) / safe
        t = np.clip(np.where(len2 > 0.0, t, 0.0), 0.0, 1.0)
        q = seg_a[None] + t[..., None] * d[None] - p
        out[start:start + chunk] = np.sqrt(np.min(np.einsum("psd,psd->ps", q, q), axis=1))
    return out


def locate_points(vertices, triangles, points, tol=1e-12):
    """First triangle (lowest index) whose barycentrics are all >= -tol; -1 if none."""
    p0 = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - p0
    e2 = vertices[triangles[:, 2]] - p0
    det = e1[:, 0] * e2[:, 1] - e2[:, 0] * e1[:, 1]
    ok_det = det != 0.0
    safe = np.where(ok_det, det, 1.0)
    tri = np.full(len(points), -1, dtype=np.int64)
    bary = np.zeros((len(points), 3))
    for i, (px, py) in enumerate(points):
        dx = px - p0[:, 0]
        dy = py - p0[:, 1]
        l1 = (dx * e2[:, 1] - e2[:, 0] * dy) / safe
        l2 = (e1[:, 0] * dy - dx * e1[:, 1]) / safe
        l0 = 1.0 - l1 - l2
        inside = ok_det & (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
        hits = np.flatnonzero(inside)
        if hits.size:
            t = hits[0]
            tri[i] = t
            bary[i] = (l0[t], l1[t], l2[t])
    return tri, bary
