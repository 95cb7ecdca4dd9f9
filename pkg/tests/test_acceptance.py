"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records one ``CRITERION n: PASS|FAIL ...`` line. Under pytest the
lines are printed in the terminal summary (see conftest.py); running this file
directly prints them as each criterion finishes.
"""

import math
import sys
import warnings

import numpy as np
import pytest

from harmonic_recovery.exprlang import parse_field
from harmonic_recovery.fem import VolumeOperators, harmonic_extend, point_eval, solve_u0
from harmonic_recovery.linalg import pinv_threshold
from harmonic_recovery.mesh import DomainSpec, dist_to_boundary, generate
from harmonic_recovery.metrics import boundary_proximity_study, convergence_study
from harmonic_recovery.recovery import box_formation, run_recovery, synthesize_measurements
from harmonic_recovery.riesz import (RieszForms, assemble_observation, representer_dense_oracle,
                                     representer_saddle_oracle, representer_schur, representers)

SQ = DomainSpec("unit_square")
LS = DomainSpec("l_shape")
EXACT = "exp(x)*cos(y)"
U0_CENTER_F2 = 0.1473427065589965  # Fourier series value, see test_fem.py

RESULTS = {}


def record(n, ok, detail):
    line = f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    if __name__ == "__main__":
        print(line, flush=True)
    return ok


def test_c01_oracle_triple_equality():
    fine = generate(SQ, 3)
    worst = 0.0
    for k in (1, 2, 3):
        forms = RieszForms(fine.ancestor(k))
        for x in ((0.5, 0.5), (0.3, 0.8)):
            s = representer_schur(forms, x).psi
            d = representer_dense_oracle(forms, x).psi
            p = representer_saddle_oracle(forms, x).psi
            worst = max(worst, np.max(np.abs(s - d)), np.max(np.abs(s - p)), np.max(np.abs(d - p)))
    assert record(1, worst <= 1e-9, f"max |psi discrepancy| = {worst:.2e} (tol 1e-9)")


def test_c02_gram_structure():
    forms = RieszForms(generate(SQ, 5))
    pts = box_formation(16)
    G = assemble_observation(forms, representers(forms, pts), pts).entries
    norm = np.linalg.norm(G, 2)
    asym = np.max(np.abs(G - G.T)) / np.max(np.abs(G))
    emin = np.linalg.eigvalsh(0.5 * (G + G.T)).min()
    ok = asym <= 1e-8 and emin >= -1e-10 * norm
    assert record(2, ok, f"relative asymmetry {asym:.2e} (tol 1e-8), min eigenvalue / ||G|| = {emin / norm:.2e} "
                         f"(tol -1e-10)")


def test_c03_harmonic_extension():
    mesh = generate(SQ, 4)
    ops = VolumeOperators(mesh)
    rng = np.random.default_rng(2024)
    I = ops.part.interior_ids
    A_inf = np.max(np.abs(ops.A).sum(axis=1))
    worst_orth, minimal = 0.0, True
    for _ in range(3):
        g = rng.standard_normal(len(ops.part.boundary_ids))
        u = harmonic_extend(mesh, ops.A, ops.part, g, solver=ops.interior_solver)
        # v^T A u for every interior nodal basis vector v is row i of A u
        worst_orth = max(worst_orth, np.max(np.abs((ops.A @ u)[I])) / (A_inf * np.max(np.abs(u))))
        e_min = u @ (ops.A @ u)
        for _ in range(20):
            w = u.copy()
            w[I] += rng.standard_normal(len(I)) * rng.uniform(1e-4, 1.0)
            minimal &= bool(e_min <= w @ (ops.A @ w))
    ok = worst_orth <= 1e-10 and minimal
    assert record(3, ok, f"Galerkin orthogonality {worst_orth:.2e} (tol 1e-10), energy minimal over 60 trials: "
                         f"{minimal}")


def test_c04_measurement_consistency():
    mesh = generate(SQ, 6)
    forms = RieszForms(mesh)
    parts, ok = [], True
    for m in (4, 16):
        meas = synthesize_measurements(EXACT, box_formation(m))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run_recovery(mesh, "0", meas, tau_rel=1e-14, forms=forms)
        tol = 1e-8 * (1 + np.max(np.abs(meas.values)))
        this = res.diagnostics["discarded"] == 0 and res.diagnostics["max_residual"] <= tol
        ok &= this
        parts.append(f"m={m}: residual {res.diagnostics['max_residual']:.2e} (tol {tol:.2e}), "
                     f"discarded {res.diagnostics['discarded']}")
    assert record(4, ok, "; ".join(parts))


def test_c05_moore_penrose():
    rng = np.random.default_rng(5)
    worst = 0.0
    for m in (1, 2, 4, 8, 16, 32, 48, 64):
        for _ in range(3):
            b = rng.standard_normal((m, m))
            a = b @ b.T + 0.1 * np.eye(m)
            p = pinv_threshold(a, 0.0)
            res = (np.linalg.norm(a @ p @ a - a) / np.linalg.norm(a),
                   np.linalg.norm(p @ a @ p - p) / np.linalg.norm(p),
                   np.linalg.norm((a @ p).T - a @ p) / np.linalg.norm(a @ p),
                   np.linalg.norm((p @ a).T - p @ a) / np.linalg.norm(p @ a))
            worst = max(worst, *res)
    assert record(5, worst <= 1e-9, f"worst Moore-Penrose residual {worst:.2e} for m <= 64 (tol 1e-9)")


def test_c06_u0_oracle():
    errs = {}
    for k in (5, 6):
        mesh = generate(SQ, k)
        u = solve_u0(mesh, parse_field("2"))
        errs[k] = abs(point_eval(mesh, (0.5, 0.5))(u) - U0_CENTER_F2)
    ok = errs[5] <= 3e-3 and errs[6] <= 1e-3
    assert record(6, ok, f"|u0h(0.5,0.5) - {U0_CENTER_F2:.10f}|: level 5 {errs[5]:.2e} (tol 3e-3), "
                         f"level 6 {errs[6]:.2e} (tol 1e-3)")


def _rate_line(rep, bounds):
    ok, parts = True, []
    for name, (lo, hi) in bounds.items():
        r = rep.lsq_rate("err_" + name, 4, 6)
        this = r >= lo and (hi is None or r <= hi)
        ok &= this
        rng = f">= {lo}" if hi is None else f"in [{lo}, {hi}]"
        parts.append(f"{name} {r:.3f} {rng}{'' if this else ' MISSED'}")
    return ok, ", ".join(parts)


@pytest.mark.slow
def test_c07_square_interior_rates():
    rep = convergence_study(SQ, 3, 6, 8, 0.25, point=(0.5, 0.5))
    ok, detail = _rate_line(rep, {"h1": (0.85, 1.15), "linf": (1.6, 2.2), "linf_d": (1.7, 2.3)})
    assert record(7, ok, "least-squares rates k=4..6, K=8: " + detail)


@pytest.mark.slow
def test_c08_square_boundary_rates():
    rep = convergence_study(SQ, 3, 6, 8, 0.25, point=(0.0, math.sqrt(2) / 2))
    ok, detail = _rate_line(rep, {"h1": (0.8, 1.3), "linf": (0.8, 1.3), "linf_d": (1.6, 2.3)})
    assert record(8, ok, "least-squares rates k=4..6, K=8, d=0.25: " + detail)


@pytest.mark.slow
def test_c09_l_shape_rates():
    x = (-0.47, 0.47)
    # Omega_d uses the distance from the measurement point to the boundary
    d = dist_to_boundary(generate(LS, 0), x)
    rep = convergence_study(LS, 3, 6, 8, d, point=x)
    ok, detail = _rate_line(rep, {"h1": (0.6, None), "linf": (0.6, None), "linf_d": (1.2, None)})
    assert record(9, ok, f"least-squares rates k=4..6, K=8, d={d:.2f}: " + detail)


@pytest.mark.slow
def test_c10_boundary_proximity():
    pts = [(0.9, 0.5), (0.95, 0.5), (0.975, 0.5), (0.9875, 0.5)]
    rows = boundary_proximity_study(SQ, pts, 6, 8)
    h1 = [r.err_h1 for r in rows]
    li = [r.err_linf for r in rows]
    ok = all(a < b for a, b in zip(h1, h1[1:])) and all(a < b for a, b in zip(li, li[1:]))
    assert record(10, ok, "H1 " + " < ".join(f"{e:.2e}" for e in h1) + "; Linf " + " < ".join(f"{e:.2e}" for e in li))


@pytest.mark.slow
def test_c11_recovery_trend():
    err = {}
    for m in (4, 16):
        meas = synthesize_measurements(EXACT, box_formation(m))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = convergence_study(SQ, 2, 7, 8, 0.45, meas=meas, exact_field=EXACT, min_gap=1)
        err[m] = rep.column("err_linf_d")
    plateau = err[4][-1] / err[4][-2]
    ok = err[16][-1] < err[4][-1] and plateau >= 0.5
    # order-of-magnitude comparison with the published plateaus, reported only
    ref = {4: 2e-2, 16: 1e-4}
    within = {m: 0.1 <= err[m][-1] / ref[m] <= 10 for m in ref}
    detail = (f"level 7 Linf(Omega_0.45): m=16 {err[16][-1]:.3e} < m=4 {err[4][-1]:.3e}; m=4 plateau ratio "
              f"{plateau:.3f} (>= 0.5); non-blocking x10 match to published plateaus: m=4 {within[4]}, "
              f"m=16 {within[16]}")
    assert record(11, ok, detail)


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
