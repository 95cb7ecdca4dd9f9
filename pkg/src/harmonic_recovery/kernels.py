"""Hot-loop kernels, compiled when available.

The Cython extension ``_ckernels`` is used if it was built; otherwise the numpy
versions in ``_pykernels`` are used. Setting the environment variable
``HARMONIC_RECOVERY_KERNELS=python`` forces the fallback at import time.
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("HARMONIC_RECOVERY_KERNELS", "").lower() == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def element_stiffness(vertices, triangles):
    """Per-triangle signed areas and 3x3 P1 stiffness matrices."""
    return _impl.element_stiffness(_f64(vertices), _i64(triangles))


def jacobi_svd(a, tol=1e-15, max_sweeps=30):
    return _impl.jacobi_svd(_f64(a), tol, max_sweeps)


def min_segment_distance(points, seg_a, seg_b):
    """Distance from each point to the nearest of the segments [seg_a, seg_b]."""
    return _impl.min_segment_distance(_f64(points), _f64(seg_a), _f64(seg_b))


def locate_points(vertices, triangles, points, tol=1e-12):
    return _impl.locate_points(_f64(vertices), _i64(triangles), _f64(points), tol)


__all__ = [
    "BACKEND",
    "element_stiffness",
    "jacobi_svd",
    "min_segment_distance",
    "locate_points",
]
