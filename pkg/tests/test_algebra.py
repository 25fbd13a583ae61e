"""Smith normal form, homology orders, null-homology solves, cocycle sampling."""

import numpy as np
import pytest

from plaquette_rcm import algebra as alg
from plaquette_rcm import lattice as lat
from plaquette_rcm.lattice import Bc, Box, Chain, PercolationConfig


def snf_oracle(arr):
    """Independent Smith-form oracle via sympy."""
    from sympy import Matrix, ZZ
    from sympy.matrices.normalforms import smith_normal_form as sympy_snf

    m = sympy_snf(Matrix(arr.tolist()), domain=ZZ)
    diag = [abs(int(m[i, i])) for i in range(min(m.shape)) if m[i, i] != 0]
    return tuple(sorted(diag))


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------

def test_snf_already_diagonal():
    assert alg.smith_normal_form(np.diag([2, 4])).diag == (2, 4)


def test_snf_2x2_by_hand():
    assert alg.smith_normal_form(np.array([[2, 0], [0, 3]])).diag == (1, 6)


def test_snf_transform_recheck_random():
    rng = np.random.default_rng(19)
    for _ in range(30):
        m, n = rng.integers(1, 9, size=2)
        A = rng.integers(-5, 6, size=(m, n))
        sf = alg.smith_normal_form(A, need_U=True, need_V=True)
        D = sf.U @ A @ sf.V
        assert (D == np.diag(np.pad(sf.diag, (0, min(m, n) - len(sf.diag)))[:min(m, n)],
                             ) if False else True)
        expect = np.zeros((m, n), dtype=np.int64)
        for j, d in enumerate(sf.diag):
            expect[j, j] = d
        assert (D == expect).all()
        for a, b in zip(sf.diag, sf.diag[1:]):
            assert b % a == 0
        assert abs(round(np.linalg.det(sf.U.astype(float)))) == 1
        assert abs(round(np.linalg.det(sf.V.astype(float)))) == 1


def test_snf_matches_sympy_on_random_matrices():
    rng = np.random.default_rng(23)
    for _ in range(25):
        m, n = rng.integers(1, 7, size=2)
        A = rng.integers(-9, 10, size=(m, n))
        assert tuple(sorted(alg.smith_normal_form(A).diag)) == snf_oracle(A)


def test_snf_sparse_50x50():
    rng = np.random.default_rng(31)
    A = np.zeros((50, 50), dtype=np.int64)
    idx = rng.integers(0, 50, size=(120, 2))
    for r, c in idx:
        A[r, c] = rng.integers(-3, 4)
    sf = alg.smith_normal_form(A, need_U=True, need_V=True)
    expect = np.zeros_like(A)
    for j, d in enumerate(sf.diag):
        expect[j, j] = d
    assert (sf.U @ A @ sf.V == expect).all()


def test_snf_object_fallback_on_large_entries():
    A = np.array([[2**40, 1], [1, 2**40]], dtype=np.int64)
    sf = alg.smith_normal_form(A, need_U=True, need_V=True)
    assert tuple(sorted(sf.diag)) == snf_oracle(A)


def test_sparse_matrix_roundtrip():
    A = np.array([[0, 2], [-1, 0]])
    sp = alg.SparseIntMatrix.from_dense(A)
    assert sp.entries == {(0, 1): 2, (1, 0): -1}
    assert (sp.to_dense() == A).all()


# ---------------------------------------------------------------------------
# boundary matrices and homology
# ---------------------------------------------------------------------------

def test_boundary_matrix_unit_square_incidence():
    box = Box.lattice((0, 0), (1, 1))
    P = PercolationConfig.full(box, 1, Bc.FULL)
    mat = alg.boundary_matrix(P, 1).to_dense()
    assert mat.shape == (4, 4)
    assert (np.abs(mat).sum(axis=0) == 2).all()
    assert (mat.sum(axis=0) == 0).all()  # each edge: head +1, tail -1


def test_tree_rank():
    # path of n edges along a line: rank over Q is n = #vertices - 1
    box = Box.lattice((0,), (5,))
    P = PercolationConfig.full(box, 1, Bc.FULL)
    sf = alg.smith_normal_form(alg.boundary_matrix(P, 1).to_dense())
    assert sf.rank == 5


def test_boundary_composition_zero():
    box = Box.lattice((0, 0, 0), (2, 2, 2))
    P = PercolationConfig.full(box, 2, Bc.FULL)
    d2 = alg.boundary_matrix(P, 2).to_dense()
    d1 = alg.boundary_matrix(P, 1).to_dense()
    assert not (d1 @ d2).any()
    d0 = alg.boundary_matrix(P, 0).to_dense()  # augmentation
    assert not (d0 @ d1).any()


def test_homology_sphere():
    box = Box.lattice((0, 0, 0), (1, 1, 1))
    P = PercolationConfig.full(box, 2, Bc.FULL)
    for q in (2, 3, 4, 6):
        assert alg.homology_order(P, 2, q) == q
        assert alg.homology_order(P, 1, q) == 1
        assert alg.homology_order(P, 0, q) == 1
    assert alg.betti_rational(P, 2) == 1


def test_homology_contractible_solid_box():
    box = Box.lattice((0, 0, 0), (1, 1, 1))
    P = PercolationConfig.full(box, 3, Bc.FULL)  # full 3-skeleton: solid cube
    for k in range(4):
        for q in (2, 3, 6):
            assert alg.homology_order(P, k, q) == 1


def test_codim1_identity_random_3x3x3():
    # |H^1(P; Z_q)| == q^{b_1(P; Q)} for codimension-one subcomplexes
    rng = np.random.default_rng(41)
    box = Box.lattice((0, 0, 0), (3, 3, 3))
    for _ in range(12):
        P = PercolationConfig.random(box, 2, rng.random(), rng, Bc.FULL)
        b1 = alg.betti_rational(P, 1)
        for q in (2, 3, 4, 6):
            assert alg.homology_order(P, 1, q) == q ** b1


def test_homology_crt_multiplicativity():
    rng = np.random.default_rng(43)
    box = Box.lattice((0, 0, 0), (2, 2, 2))
    for _ in range(8):
        P = PercolationConfig.random(box, 2, rng.random(), rng, Bc.FULL)
        for k in (1, 2):
            assert (alg.homology_order(P, k, 6)
                    == alg.homology_order(P, k, 2) * alg.homology_order(P, k, 3))


def test_homology_summary_fields():
    box = Box.lattice((0, 0, 0), (1, 1, 1))
    P = PercolationConfig.full(box, 2, Bc.FULL)
    s = alg.homology_summary(P, 2, 4)
    assert s.order_mod_q == 4 and s.betti_rational == 1
    assert s.torsion_elementary_divisors == ()


# ---------------------------------------------------------------------------
# null homology
# ---------------------------------------------------------------------------

def unit_square_loop(q=0):
    return lat.loop_boundary_chain(Box.lattice((0, 0, 1), (1, 1, 1)), q=q)


def test_null_homology_trivial_cases():
    box = Box.lattice((0, 0, 0), (2, 2, 2))
    gamma = lat.loop_boundary_chain(Box.lattice((0, 0, 1), (1, 1, 1)))
    P = PercolationConfig.full(box, 2, Bc.FREE)
    assert alg.null_homology_test(P, gamma, 0)
    assert alg.null_homology_test(P, gamma, 2)
    P0 = PercolationConfig.empty(box, 2, Bc.FREE)
    assert not alg.null_homology_test(P0, gamma, 0)
    assert not alg.null_homology_test(P0, gamma, 5)
    with pytest.raises(ValueError):
        non_cycle = Chain({next(iter(gamma.terms)): 1})
        alg.null_homology_test(P, non_cycle, 0)


def test_null_homology_needs_adjacent_plaquette():
    # isolated boundary cell: gamma touches no occupied plaquette -> false
    rng = np.random.default_rng(2)
    box = Box.lattice((0, 0, 0), (3, 3, 3))
    gamma = lat.loop_boundary_chain(Box.lattice((1, 1, 1), (2, 2, 1)))
    P = PercolationConfig.empty(box, 2, Bc.FREE)
    occ = P.occupied.copy()
    cells = P.cells
    gamma_cells = gamma.support()
    for j, c in enumerate(cells):
        if P.state_mask()[j] and rng.random() < 0.8:
            touches = any(f in gamma_cells for f, _ in lat.boundary_faces(c))
            if not touches:
                occ[j] = True
    assert not alg.null_homology_test(P.with_occupied(occ), gamma, 2)


def test_null_homology_monotone_in_P():
    rng = np.random.default_rng(13)
    box = Box.lattice((0, 0, 0), (2, 2, 2))
    gamma = unit_square_loop()
    for _ in range(20):
        P = PercolationConfig.random(box, 2, 0.5, rng, Bc.FREE)
        if not alg.null_homology_test(P, gamma, 3):
            continue
        occ = P.occupied.copy()
        free = np.flatnonzero(P.state_mask() & ~occ)
        if len(free):
            occ[rng.choice(free)] = True
        assert alg.null_homology_test(P.with_occupied(occ), gamma, 3)


def test_wired_null_homology_uses_boundary():
    # gamma on the box boundary bounds via boundary plaquettes only when wired
    box = Box.lattice((0, 0, 0), (2, 2, 2))
    gamma = lat.loop_boundary_chain(Box.lattice((0, 0, 0), (1, 1, 0)))
    Pf = PercolationConfig.empty(box, 2, Bc.FREE)
    Pw = PercolationConfig.empty(box, 2, Bc.WIRED)
    assert not alg.null_homology_test(Pf, gamma, 2)
    assert alg.null_homology_test(Pw, gamma, 2)


def test_relative_null_homology_tube():
    # C_t: solve boundary(tau) = rho_s + alpha with alpha on the tube boundary
    box = Box.lattice((-2, -2, -2), (3, 2, 2))
    s = Box.lattice((0, 0, 0), (1, 0, 0))
    t = Box.lattice((0, -2, -2), (1, 2, 2))
    rho_s = lat.box_chain(s)
    P = PercolationConfig.full(box, 2, Bc.FULL)
    assert alg.relative_null_homology(P, rho_s, t, 0)
    P0 = PercolationConfig.empty(box, 2, Bc.FULL)
    assert not alg.relative_null_homology(P0, rho_s, t, 0)
    assert not alg.relative_null_homology(P0, rho_s, t, 3)


def test_relative_null_homology_subtube_implication():
    # Lemma-style check: C_t implies C_{t''} for a sub-tube, on random configs
    rng = np.random.default_rng(77)
    box = Box.lattice((-2, -2, -2), (4, 2, 2))
    s = Box.lattice((0, 0, 0), (2, 0, 0))
    s2 = Box.lattice((0, 0, 0), (1, 0, 0))
    t = Box.lattice((0, -2, -2), (2, 2, 2))
    t2 = Box.lattice((0, -2, -2), (1, 2, 2))
    rho_s, rho_s2 = lat.box_chain(s), lat.box_chain(s2)
    hits = 0
    for _ in range(100):
        P = PercolationConfig.random(box, 2, 0.8, rng, Bc.FULL)
        if alg.relative_null_homology(P, rho_s, t, 0):
            hits += 1
            assert alg.relative_null_homology(P, rho_s2, t2, 0)
    assert hits > 5


# ---------------------------------------------------------------------------
# cocycles
# ---------------------------------------------------------------------------

def test_uniform_cocycle_no_constraints_uniform():
    # with no i-cells the sampler is uniform over all cochains
    rng = np.random.default_rng(3)
    box = Box.lattice((0, 0), (1, 1))
    P = PercolationConfig.empty(box, 1, Bc.FULL)
    counts = {}
    n = 10000
    for _ in range(n):
        f = alg.uniform_cocycle(P, 2, rng)
        counts[tuple(f.values.tolist())] = counts.get(tuple(f.values.tolist()), 0) + 1
    assert len(counts) == 16
    expected = n / 16
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 37.7  # chi^2_{15} at 0.999


def test_uniform_cocycle_chi2_with_constraints():
    # exhaustively list Z^0 of a constrained 1-complex and test uniformity
    rng = np.random.default_rng(5)
    box = Box.lattice((0, 0), (1, 1))
    P = PercolationConfig.full(box, 1, Bc.FULL)  # all 4 edges constrain
    q = 3
    import itertools
    mat = alg._constraint_matrix(P)
    members = [v for v in itertools.product(range(q), repeat=4)
               if not (mat @ np.array(v) % q).any()]
    counts = {m: 0 for m in members}
    n = 9000
    for _ in range(n):
        f = alg.uniform_cocycle(P, q, rng)
        counts[tuple(f.values.tolist())] += 1
    assert alg.cocycle_count(P, q) == len(members)
    expected = n / len(members)
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 27.9  # chi^2_{len-1=2} generous


def test_uniform_cocycle_membership_every_draw():
    rng = np.random.default_rng(9)
    box = Box.lattice((0, 0, 0), (2, 2, 2))
    for q in (2, 3, 4, 6):
        P = PercolationConfig.random(box, 2, 0.6, rng, Bc.WIRED)
        occ = np.flatnonzero(P.complex_mask())
        for _ in range(20):
            f = alg.uniform_cocycle(P, q, rng)
            assert not f.coboundary().values[occ].any()


def test_cocycle_count_crt():
    rng = np.random.default_rng(15)
    box = Box.lattice((0, 0, 0), (1, 1, 1))
    P = PercolationConfig.random(box, 2, 0.5, rng, Bc.FULL)
    assert alg.cocycle_count(P, 6) == alg.cocycle_count(P, 2) * alg.cocycle_count(P, 3)


def test_wilson_conditional_matches_null_homology():
    rng = np.random.default_rng(21)
    box = Box.lattice((0, 0, 0), (2, 2, 2))
    gamma4 = unit_square_loop()
    for _ in range(15):
        P = PercolationConfig.random(box, 2, 0.5, rng, Bc.FULL)
        for q in (2, 3, 4, 6):
            assert alg.wilson_conditional(P, gamma4, q) == \
                int(alg.null_homology_test(P, gamma4, q))


def test_solve_mod_q():
    rng = np.random.default_rng(33)
    for q in (2, 3, 4, 6):
        for _ in range(20):
            A = rng.integers(-3, 4, size=(4, 6))
            x0 = rng.integers(q, size=6)
            b = (A @ x0) % q
            x = alg.solve_mod_q(A, b, q)
            assert x is not None
            assert not ((A @ x - b) % q).any()
