# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures and results mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def element_stiffness(const double[:, ::1] vertices, const cnp.int64_t[:, ::1] triangles):
    cdef Py_ssize_t nt = triangles.shape[0]
    cdef Py_ssize_t t, i, j
    cdef cnp.int64_t a, b, c
    cdef double ex[3]
    cdef double ey[3]
    cdef double area, scale
    areas_arr = np.empty(nt, dtype=np.float64)
    kloc_arr = np.empty((nt, 3, 3), dtype=np.float64)
    cdef double[::1] areas = areas_arr
    cdef double[:, :, ::1] kloc = kloc_arr
    for t in range(nt):
        a = triangles[t, 0]
        b = triangles[t, 1]
        c = triangles[t, 2]
        # edge opposite vertex i
        ex[0] = vertices[c, 0] - vertices[b, 0]
        ey[0] = vertices[c, 1] - vertices[b, 1]
        ex[1] = vertices[a, 0] - vertices[c, 0]
        ey[1] = vertices[a, 1] - vertices[c, 1]
        ex[2] = vertices[b, 0] - vertices[a, 0]
        ey[2] = vertices[b, 1] - vertices[a, 1]
        area = 0.5 * (ex[2] * (-ey[1]) - ey[2] * (-ex[1]))
        areas[t] = area
        if area == 0.0:
            scale = 0.0
        else:
            scale = 0.25 / area
        for i in range(3):
            for j in range(3):
                kloc[t, i, j] = (ex[i] * ex[j] + ey[i] * ey[j]) * scale
    return areas_arr, kloc_arr


def jacobi_svd(const double[:, :] a, double tol=1e-15, int max_sweeps=30):
    """One-sided (Hestenes) Jacobi. Returns (A V as columns, V, sweeps, converged)."""
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    wt_arr = np.ascontiguousarray(np.asarray(a, dtype=np.float64).T)
    vt_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] wt = wt_arr
    cdef double[:, ::1] vt = vt_arr
    cdef Py_ssize_t p, q, k
    cdef double alpha, beta, gamma, zeta, t, c, s, xp, xq
    cdef int sweep = 0
    cdef bint rotated = True
    while rotated and sweep < max_sweeps:
        rotated = False
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for k in range(m):
                    alpha += wt[p, k] * wt[p, k]
                    beta += wt[q, k] * wt[q, k]
                    gamma += wt[p, k] * wt[q, k]
                if gamma == 0.0 or fabs(gamma) <= tol * sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for k in range(m):
                    xp = wt[p, k]
                    xq = wt[q, k]
                    wt[p, k] = c * xp - s * xq
                    wt[q, k] = s * xp + c * xq
                for k in range(n):
                    xp = vt[p, k]
                    xq = vt[q, k]
                    vt[p, k] = c * xp - s * xq
                    vt[q, k] = s * xp + c * xq
    return wt_arr.T.copy(), vt_arr.T.copy(), sweep, not rotated


def min_segment_distance(const double[:, ::1] points, const double[:, ::1] seg_a,
                         const double[:, ::1] seg_b):
    cdef Py_ssize_t npts = points.shape[0]
    cdef Py_ssize_t nseg = seg_a.shape[0]
    cdef Py_ssize_t i, j
    cdef double px, py, dx, dy, len2, t, qx, qy, d2, best
    out_arr = np.empty(npts, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(npts):
        px = points[i, 0]
        py = points[i, 1]
        best = 1e308
        for j in range(nseg):
            dx = seg_b[j, 0] - seg_a[j, 0]
            dy = seg_b[j, 1] - seg_a[j, 1]
            len2 = dx * dx + dy * dy
            if len2 > 0.0:
                t = ((px - seg_a[j, 0]) * dx + (py - seg_a[j, 1]) * dy) / len2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            qx = seg_a[j, 0] + t * dx - px
            qy = seg_a[j, 1] + t * dy - py
            d2 = qx * qx + qy * qy
            if d2 < best:
                best = d2
        out[i] = sqrt(best)
    return out_arr


def locate_points(const double[:, ::1] vertices, const cnp.int64_t[:, ::1] triangles,
                  const double[:, ::1] points, double tol=1e-12):
    """First triangle (lowest index) whose barycentrics are all >= -tol; -1 if none."""
    cdef Py_ssize_t npts = points.shape[0]
    cdef Py_ssize_t nt = triangles.shape[0]
    cdef Py_ssize_t i, t
    cdef cnp.int64_t a, b, c
    cdef double x0, y0, x1, y1, x2, y2, det, l0, l1, l2, px, py
    tri_arr = np.full(npts, -1, dtype=np.int64)
    bary_arr = np.zeros((npts, 3), dtype=np.float64)
    cdef cnp.int64_t[::1] tri = tri_arr
    cdef double[:, ::1] bary = bary_arr
    for i in range(npts):
        px = points[i, 0]
        py = points[i, 1]
        for t in range(nt):
            a = triangles[t, 0]
            b = triangles[t, 1]
            c = triangles[t, 2]
            x0 = vertices[a, 0]
            y0 = vertices[a, 1]
            x1 = vertices[b, 0] - x0
            y1 = vertices[b, 1] - y0
            x2 = vertices[c, 0] - x0
            y2 = vertices[c, 1] - y0
            det = x1 * y2 - x2 * y1
            if det == 0.0:
                continue
            l1 = ((px - x0) * y2 - x2 * (py - y0)) / det
            l2 = (x1 * (py - y0) - (px - x0) * y1) / det
            l0 = 1.0 - l1 - l2
            if l0 >= -tol and l1 >= -tol and l2 >= -tol:
                tri[i] = t
                bary[i, 0] = l0
                bary[i, 1] = l1
                bary[i, 2] = l2
                break
    return tri_arr, bary_arr
