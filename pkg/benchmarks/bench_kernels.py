"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so the result does not depend on
HARMONIC_RECOVERY_KERNELS. Prints one line per kernel and problem size.
"""

import argparse
import timeit

import numpy as np

from harmonic_recovery import _pykernels
from harmonic_recovery.mesh import DomainSpec, generate

try:
    from harmonic_recovery import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    sq = DomainSpec("unit_square")
    for k in (6, 8):
        m = generate(sq, k)
        yield f"element_stiffness  level {k} ({m.n_triangles} triangles)", "element_stiffness", \
            (m.vertices, m.triangles)
    for n in (16, 64):
        a = rng.standard_normal((n, n))
        yield f"jacobi_svd         m = {n}", "jacobi_svd", (a @ a.T, 1e-15, 30)
    m = generate(sq, 7)
    a, b = m.boundary_segments
    pts = np.vstack([m.vertices, m.centroids])
    yield f"min_segment_dist   {len(pts)} points x {len(a)} segments", "min_segment_distance", (pts, a, b)
    m = generate(sq, 6)
    pts = rng.uniform(0.0, 1.0, (256, 2))
    yield f"locate_points      256 points in {m.n_triangles} triangles", "locate_points", \
        (m.vertices, m.triangles, pts, 1e-12)


def best_time(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    if _ckernels is None:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'kernel':52s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>8s}")
    for label, name, inputs in cases(rng):
        tp = best_time(getattr(_pykernels, name), inputs, args.repeat)
        if _ckernels is None:
            print(f"{label:52s} {tp:12.3e}")
            continue
        tc = best_time(getattr(_ckernels, name), inputs, args.repeat)
        print(f"{label:52s} {tp:12.3e} {tc:12.3e} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
