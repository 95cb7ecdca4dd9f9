import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harmonic_recovery.fem import point_eval
from harmonic_recovery.mesh import DomainSpec, generate
from harmonic_recovery.recovery import box_formation
from harmonic_recovery.riesz import (OracleSizeError, RieszForms, assemble_observation, representer_dense_oracle,
                                     representer_saddle_oracle, representer_schur, representers)

SQ = DomainSpec("unit_square")
LS = DomainSpec("l_shape")


@pytest.fixture(scope="module")
def forms_by_level():
    fine = generate(SQ, 5)
    return {k: RieszForms(fine.ancestor(k)) for k in range(6)}


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("x", [(0.5, 0.5), (0.3, 0.8), (0.0, 0.7), (0.61, 0.13)])
def test_triple_path_equality(forms_by_level, k, x):
    f = forms_by_level[k]
    s = representer_schur(f, x)
    d = representer_dense_oracle(f, x)
    p = representer_saddle_oracle(f, x)
    assert np.max(np.abs(s.psi - d.psi)) <= 1e-9
    assert np.max(np.abs(s.psi - p.psi)) <= 1e-9
    assert np.max(np.abs(s.phi - p.phi)) <= 1e-9


def test_level1_tight_agreement(forms_by_level):
    f = forms_by_level[1]
    s = representer_schur(f, (0.5, 0.5))
    assert np.max(np.abs(s.psi - representer_dense_oracle(f, (0.5, 0.5)).psi)) <= 1e-12
    assert np.max(np.abs(s.phi - representer_saddle_oracle(f, (0.5, 0.5)).phi)) <= 1e-10


def test_triple_path_l_shape():
    f = RieszForms(generate(LS, 2))
    x = (-0.47, 0.47)
    s = representer_schur(f, x)
    assert np.max(np.abs(s.psi - representer_dense_oracle(f, x).psi)) <= 1e-9
    assert np.max(np.abs(s.phi - representer_saddle_oracle(f, x).phi)) <= 1e-9


@pytest.mark.parametrize("x", [(0.5, 0.5), (0.2, 0.9), (0.0, math.sqrt(2) / 2), (1.0, 1.0)])
def test_pair_invariants(forms_by_level, x):
    f = forms_by_level[4]
    pair = representer_schur(f, x)
    assert np.array_equal(pair.phi[f.part.boundary_ids], pair.psi)
    assert pair.diagnostics["interior_residual"] <= 1e-10
    assert pair.diagnostics["boundary_residual"] <= 1e-12
    energy = pair.psi @ (f.B @ pair.psi)
    value = f.point_eval(x)(pair.phi)
    assert energy > 0
    assert math.isclose(energy, value, rel_tol=1e-9)


def test_boundary_vertex_point_gives_green_function(forms_by_level):
    f = forms_by_level[3]
    j = 5
    v = f.mesh.vertices[f.part.boundary_ids[j]]
    pair = representer_schur(f, v)
    e_B = np.zeros(len(f.part.boundary_ids))
    e_B[j] = 1.0
    assert np.allclose(f.B @ pair.psi, e_B, atol=1e-13)


def test_dense_oracle_load_sums_to_one(forms_by_level):
    d = representer_dense_oracle(forms_by_level[2], (0.3, 0.8))
    assert math.isclose(d.diagnostics["load"].sum(), 1.0, rel_tol=1e-12)


def test_saddle_multiplier_is_green_function(forms_by_level):
    f = forms_by_level[2]
    x = (0.3, 0.8)
    p = representer_saddle_oracle(f, x)
    I = f.part.interior_ids
    e = f.point_eval(x).dense(f.mesh.n_vertices)
    pi = p.diagnostics["pi"]
    r = f.volume.A_II @ pi[I] - e[I]
    assert np.max(np.abs(r)) <= 1e-10


def test_vertex_point_evaluation_exact(forms_by_level):
    f = forms_by_level[2]
    v = f.mesh.vertices[12]
    p = representer_saddle_oracle(f, v)
    assert f.point_eval(v)(p.phi) == p.phi[12]


def test_oracle_guards():
    f = RieszForms(generate(SQ, 9))
    with pytest.raises(OracleSizeError):
        representer_dense_oracle(f, (0.5, 0.5))
    with pytest.raises(OracleSizeError):
        representer_saddle_oracle(f, (0.5, 0.5))


def _boundary_permutation(mesh, transform):
    loop = mesh.boundary_loop
    pts = mesh.vertices[loop]
    image = transform(pts)
    index = {tuple(np.round(p, 12)): i for i, p in enumerate(pts)}
    return np.array([index[tuple(np.round(q, 12))] for q in image])


# on right isosceles meshes the hypotenuse couplings of the P1 stiffness vanish, so the
# stiffness matrix is the 5-point stencil and the whole dihedral group of the square acts
DIHEDRAL = {
    "identity": lambda p: p,
    "rot90": lambda p: np.column_stack([1.0 - p[:, 1], p[:, 0]]),
    "rot180": lambda p: 1.0 - p,
    "rot270": lambda p: np.column_stack([p[:, 1], 1.0 - p[:, 0]]),
    "mirror_x": lambda p: np.column_stack([1.0 - p[:, 0], p[:, 1]]),
    "mirror_y": lambda p: np.column_stack([p[:, 0], 1.0 - p[:, 1]]),
    "swap": lambda p: p[:, ::-1],
    "anti_swap": lambda p: 1.0 - p[:, ::-1],
}


@pytest.mark.parametrize("name", sorted(DIHEDRAL))
@pytest.mark.parametrize("k", [2, 4])
def test_center_representer_dihedral_symmetry(forms_by_level, name, k):
    f = forms_by_level[k]
    psi = representer_schur(f, (0.5, 0.5)).psi
    perm = _boundary_permutation(f.mesh, DIHEDRAL[name])
    assert np.max(np.abs(psi[perm] - psi)) <= 1e-10 * np.max(np.abs(psi))


def test_stiffness_has_no_hypotenuse_coupling(forms_by_level):
    m = forms_by_level[3].mesh
    A = forms_by_level[3].A.tocoo()
    off = A.row != A.col
    d = np.abs(m.vertices[A.row[off]] - m.vertices[A.col[off]])
    diagonal_pairs = (d[:, 0] > 0) & (d[:, 1] > 0)
    assert np.all(np.abs(A.data[off][diagonal_pairs]) < 1e-15)


@settings(max_examples=20, deadline=None)
@given(st.floats(-10, 10).filter(lambda c: abs(c) > 1e-3), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_scaling_covariance(c, x, y):
    f = RieszForms(generate(SQ, 3))
    base = representer_schur(f, (x, y))
    scaled = representer_schur(f, (x, y), scale=c)
    assert np.allclose(scaled.psi, c * base.psi, rtol=1e-13, atol=1e-15 * abs(c))
    assert np.allclose(scaled.phi, c * base.phi, rtol=1e-13, atol=1e-15 * abs(c))


def test_observation_m1_positive(forms_by_level):
    f = forms_by_level[3]
    pts = [(0.4, 0.6)]
    G = assemble_observation(f, representers(f, pts), pts)
    assert G.entries.shape == (1, 1) and G.entries[0, 0] > 0


def test_observation_mirror_pair(forms_by_level):
    f = forms_by_level[4]
    pts = [(0.25, 0.5), (0.75, 0.5)]
    G = assemble_observation(f, representers(f, pts), pts).entries
    # the pair is exchanged by the mirror x -> 1 - x
    assert abs(G[0, 0] - G[1, 1]) <= 1e-9 * abs(G).max()
    assert abs(G[0, 1] - G[1, 0]) <= 1e-9 * abs(G).max()


@pytest.mark.parametrize("spec, k, pts", [
    (SQ, 5, box_formation(16)),
    (SQ, 4, np.random.default_rng(0).uniform(0.05, 0.95, (12, 2))),
    (LS, 3, [(-0.5, 0.5), (0.5, 0.5), (-0.5, -0.5), (0.1, 0.1), (-0.9, 0.9)]),
])
def test_gram_symmetry_and_psd(spec, k, pts):
    f = RieszForms(generate(spec, k))
    pairs = representers(f, pts)
    G = assemble_observation(f, pairs, pts)
    norm = np.abs(G.entries).max()
    assert G.asymmetry() <= 1e-8
    eig = np.linalg.eigvalsh(0.5 * (G.entries + G.entries.T))
    assert eig.min() >= -1e-10 * norm
    gram = np.array([[pi.psi @ (f.B @ pj.psi) for pj in pairs] for pi in pairs])
    assert np.allclose(G.entries, gram, rtol=1e-9, atol=1e-12 * norm)


def test_threaded_representers_identical(forms_by_level):
    f = forms_by_level[4]
    pts = box_formation(16)
    serial = representers(f, pts, threads=1)
    threaded = representers(f, pts, threads=4)
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.phi, b.phi)


def test_observation_mesh_mismatch(forms_by_level):
    pairs = representers(forms_by_level[2], [(0.5, 0.5)])
    with pytest.raises(ValueError):
        assemble_observation(forms_by_level[3], pairs, [(0.5, 0.5)])
    with pytest.raises(ValueError):
        assemble_observation(forms_by_level[2], pairs, [(0.5, 0.5), (0.2, 0.2)])


def test_point_eval_matches_forms(forms_by_level):
    f = forms_by_level[2]
    assert f.point_eval((0.3, 0.3)).triangle == point_eval(f.mesh, (0.3, 0.3)).triangle
