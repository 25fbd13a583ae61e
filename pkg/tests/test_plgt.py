"""Gauge theory: Hamiltonian, Wilson loops, coupling, comparison identity,
boundary conditions, and the composite-q anomaly."""

import math
from fractions import Fraction

import numpy as np
import pytest

from plaquette_rcm import algebra as alg
from plaquette_rcm import lattice as lat
from plaquette_rcm import plgt
from plaquette_rcm import prcm
from plaquette_rcm import verify
from plaquette_rcm.lattice import Bc, Box, CellId, Cochain, PercolationConfig

CUBE = Box.lattice((0, 0, 0), (1, 1, 1))


def face_loop(q=0):
    return lat.loop_boundary_chain(Box.lattice((0, 0, 0), (1, 1, 0)), q=q)


def random_cochain(box, k, q, rng):
    return Cochain(box, k, q, rng.integers(q, size=len(lat.enumerate_cells(box, k))))


# ---------------------------------------------------------------------------
# Hamiltonian and Wilson loops
# ---------------------------------------------------------------------------

def test_hamiltonian_zero_and_gauge():
    params = plgt.PlgtParams.from_p(0.6, 3, 1, 3, Bc.FULL)
    f0 = Cochain(CUBE, 1, 3)
    assert plgt.hamiltonian(f0, params) == -6
    rng = np.random.default_rng(0)
    h = random_cochain(CUBE, 0, 3, rng)
    assert plgt.hamiltonian(plgt.gauge_transform(f0, h), params) == -6


def test_hamiltonian_single_flip():
    params = plgt.PlgtParams.from_p(0.6, 2, 1, 3, Bc.FULL)
    f = Cochain(CUBE, 1, 2)
    f[CellId((0, 0, 0), (0,))] = 1
    # each edge of the cube bounds exactly two faces
    assert plgt.hamiltonian(f, params) == -4


def test_wilson_loop_values():
    gamma = face_loop(4)
    f = Cochain(CUBE, 1, 4)
    assert plgt.wilson_loop(f, gamma) == 1
    rng = np.random.default_rng(1)
    f = random_cochain(CUBE, 1, 4, rng)
    h = random_cochain(CUBE, 0, 4, rng)
    w1 = plgt.wilson_loop(f, gamma)
    w2 = plgt.wilson_loop(plgt.gauge_transform(f, h), gamma)
    assert abs(w1 - w2) < 1e-12
    assert abs(abs(w1) - 1) < 1e-12


def test_wilson_multiplicative_disjoint():
    box = Box.lattice((0, 0, 0), (3, 1, 1))
    g1 = lat.loop_boundary_chain(Box.lattice((0, 0, 0), (1, 1, 0)), q=5)
    g2 = lat.loop_boundary_chain(Box.lattice((2, 0, 0), (3, 1, 0)), q=5)
    rng = np.random.default_rng(2)
    f = random_cochain(box, 1, 5, rng)
    assert abs(plgt.wilson_loop(f, g1 + g2)
               - plgt.wilson_loop(f, g1) * plgt.wilson_loop(f, g2)) < 1e-12


# ---------------------------------------------------------------------------
# exact Gibbs law
# ---------------------------------------------------------------------------

def test_gibbs_uniform_at_beta_zero():
    params = plgt.PlgtParams(0.0, 2, 1, 3, Bc.FULL)
    g = plgt.gibbs_exact(CUBE, params)
    probs = {vals: p for vals, p in g.enumerate()}
    assert len(probs) == 2 ** 12
    assert len(set(probs.values())) == 1


def test_gibbs_gauge_pushforward_invariance():
    params = plgt.PlgtParams.from_p(0.55, 3, 1, 3, Bc.FULL)
    g = plgt.gibbs_exact(CUBE, params)
    rng = np.random.default_rng(3)
    h = random_cochain(CUBE, 0, 3, rng)
    for _ in range(25):
        f = random_cochain(CUBE, 1, 3, rng)
        assert g.prob_of(f) == g.prob_of(plgt.gauge_transform(f, h))


def test_gibbs_heatbath_stationarity():
    # heat-bath chain reproduces the exact unsat distribution within 3 sigma
    params = plgt.PlgtParams.from_p(0.5, 2, 1, 3, Bc.FULL)
    exact = plgt.gibbs_exact(CUBE, params).unsat_distribution()
    exact_mean = float(sum(u * p for u, p in exact.items()))
    rng = np.random.default_rng(4)
    f = Cochain(CUBE, 1, 2)
    us = []
    for sweep in range(3000):
        f = plgt.heatbath_spin_step(f, params, rng)
        if sweep >= 300:
            us.append(6 + plgt.hamiltonian(f, params))
    us = np.array(us, dtype=float)
    batches = us.reshape(30, -1).mean(axis=1)
    se = batches.std(ddof=1) / math.sqrt(len(batches))
    assert abs(us.mean() - exact_mean) < 3.5 * se + 0.02


# ---------------------------------------------------------------------------
# coupling
# ---------------------------------------------------------------------------

def test_coupling_marginals_cube():
    for q in (2, 4):
        res = verify.verify_coupling(CUBE, q, 0.7)
        assert res.ok, res.line()


def test_coupling_joint_weight_support():
    params = plgt.PlgtParams.from_p(0.5, 2, 1, 3, Bc.FULL)
    rng = np.random.default_rng(5)
    f = Cochain(CUBE, 1, 2)  # flat everywhere
    P = PercolationConfig.full(CUBE, 2, Bc.FULL)
    assert plgt.coupling_joint_weight(f, P, params) == Fraction(0.5) ** 6
    f2 = random_cochain(CUBE, 1, 2, rng)
    if plgt.hamiltonian(f2, params) != -6:
        assert plgt.coupling_joint_weight(f2, P, params) == 0


def test_coupling_full_enumeration_q2():
    # literal joint sum over (f, P) reproduces both exact marginals
    params = plgt.PlgtParams.from_p(0.3, 2, 1, 3, Bc.FULL)
    coup = plgt.coupling_exact(CUBE, params)
    gibbs = plgt.gibbs_exact(CUBE, params)
    rng = np.random.default_rng(6)
    for _ in range(10):
        f = random_cochain(CUBE, 1, 2, rng)
        assert coup.spin_marginal_weight_by_sum(f) == coup.spin_marginal_weight(f)
        assert coup.spin_prob(f) == gibbs.prob_of(f)
    mu = prcm.enumerate_measure(CUBE, prcm.PrcmParams(p=0.3, q=2, i=2, d=3,
                                                      bc=Bc.FULL))
    for P in coup.p_configs[::7]:
        assert coup.plaquette_marginal(P) == mu.prob_of(P)


def test_wired_coupling_counting_identity():
    # |Z^k(P^w) cap D_eta| == |Z^k(P^w)| / |Z^k(boundary complex)|
    box = Box.lattice((0, 0, 0), (2, 2, 2))
    rng = np.random.default_rng(7)
    for q in (2, 3, 4):
        P = PercolationConfig.random(box, 2, 0.5, rng, Bc.WIRED)
        delta = plgt._delta_rows(box, 1)
        complex_rows = delta[P.complex_mask()]
        n_edges = delta.shape[1]
        bidx = plgt._boundary_edge_idx(box, 1)
        # boundary cocycle count: flatness on the boundary 2-cells only
        bsig = np.flatnonzero(lat.boundary_cell_mask(box, 2))
        bcells = delta[bsig][:, bidx]
        z_boundary = alg.kernel_count_mod_q(bcells, q)
        # an eta: restriction of a random wired cocycle
        fw = alg.uniform_cocycle(P, q, rng)
        eta = fw.values[bidx] % q
        sel = np.zeros((len(bidx), n_edges), dtype=np.int64)
        for r, j in enumerate(bidx):
            sel[r, j] = 1
        A = np.vstack([complex_rows, sel])
        rhs = np.concatenate([np.zeros(len(complex_rows), dtype=np.int64), eta])
        assert alg.solve_mod_q(A, rhs, q) is not None
        lhs = alg.kernel_count_mod_q(A, q)
        assert lhs * z_boundary == alg.cocycle_count(P, q)


def test_gauge_orbit_transitivity():
    # for random boundary cocycles eta1, eta2 there is h with
    # delta h restricted to the boundary equal to their difference
    box = Box.lattice((0, 0, 0), (2, 2, 2))
    rng = np.random.default_rng(8)
    q = 4
    bidx = plgt._boundary_edge_idx(box, 1)
    delta01 = plgt._delta_rows(box, 0)  # vertices -> edges
    for _ in range(5):
        etas = []
        for _ in range(2):
            f = alg.uniform_cocycle(
                PercolationConfig.empty(box, 2, Bc.WIRED), q, rng)
            etas.append(f.values[bidx] % q)
        target = (etas[1] - etas[0]) % q
        h = alg.solve_mod_q(delta01[bidx], target, q)
        assert h is not None
        assert not ((delta01[bidx] @ h - target) % q).any()


def test_eta_and_wired_wilson_agree():
    # E[W_gamma] is the same for wired bc and for every eta bc
    box = Box.lattice((0, 0, 0), (1, 1, 2))
    gamma = lat.loop_boundary_chain(Box.lattice((0, 0, 1), (1, 1, 1)), q=3)
    q, p = 3, 0.6
    wired = plgt.PlgtParams.from_p(p, q, 1, 3, Bc.WIRED)
    ew, _, _ = plgt.wilson_expectation_exact(box, wired, gamma)
    rng = np.random.default_rng(9)
    bidx = plgt._boundary_edge_idx(box, 1)
    for _ in range(3):
        f = alg.uniform_cocycle(PercolationConfig.empty(box, 2, Bc.WIRED), q, rng)
        eta = tuple(int(v) for v in f.values[bidx] % q)
        pe = plgt.PlgtParams.from_p(p, q, 1, 3, Bc.WIRED, eta)
        ee, _, _ = plgt.wilson_expectation_exact(box, pe, gamma)
        assert abs(ee - ew) < 1e-12


# ---------------------------------------------------------------------------
# comparison identity
# ---------------------------------------------------------------------------

def test_comparison_identity_cube():
    gamma = face_loop()
    for q, p in ((3, 0.5), (6, 0.3)):
        res = verify.verify_comparison(CUBE, q, p, Bc.FULL, gamma)
        assert res.ok, res.line()


def test_comparison_beta_large_proxy():
    gamma = face_loop()
    res = verify.verify_comparison(CUBE, 3, 0.999, Bc.FULL, gamma)
    assert res.ok
    ew, muv = plgt.comparison_identity_check(
        CUBE, plgt.PlgtParams.from_p(0.999, 3, 1, 3, Bc.FULL), gamma.reduce_mod(3))
    assert ew.real > 0.99 and float(muv) > 0.99


def test_comparison_wired_and_eta():
    box = Box.lattice((0, 0, 0), (1, 1, 2))
    gamma = lat.loop_boundary_chain(Box.lattice((0, 0, 1), (1, 1, 1)))
    for q in (2, 4):
        res = verify.verify_comparison(box, q, 0.55, Bc.WIRED, gamma)
        assert res.ok, res.line()
    eta = plgt.eta_constant(box, 3, 1, 0)
    res = verify.verify_comparison(box, 3, 0.55, Bc.WIRED, gamma, eta=eta)
    assert res.ok, res.line()


def test_comparison_free_box_convention():
    box = Box.lattice((0, 0, 0), (1, 1, 2))
    gamma = lat.loop_boundary_chain(Box.lattice((0, 0, 1), (1, 1, 1)))
    res = verify.verify_comparison(box, 3, 0.4, Bc.FREE, gamma)
    assert res.ok, res.line()


# ---------------------------------------------------------------------------
# anomaly
# ---------------------------------------------------------------------------

def test_anomaly_k2():
    ex = plgt.anomaly_example(2)
    P, gamma = ex  # tuple protocol
    assert not alg.null_homology_test(P, gamma, 0)
    assert alg.null_homology_test(P, gamma.reduce_mod(2), 2)
    assert not alg.null_homology_test(P, gamma.reduce_mod(3), 3)
    for q in (2, 3):
        assert alg.wilson_conditional(P, gamma.reduce_mod(q), q) == \
            int(alg.null_homology_test(P, gamma.reduce_mod(q), q))


def test_anomaly_k3_and_k4():
    ex3 = plgt.anomaly_example(3)
    assert alg.null_homology_test(ex3.config, ex3.gamma.reduce_mod(3), 3)
    assert not alg.null_homology_test(ex3.config, ex3.gamma.reduce_mod(2), 2)
    ex4 = plgt.anomaly_example(4)
    for q, expect in ((2, True), (4, True), (3, False)):
        assert alg.null_homology_test(
            ex4.config, ex4.gamma.reduce_mod(q), q) is expect


def test_anomaly_tube_geometry():
    for k in (2, 3):
        ex = plgt.anomaly_example(k)
        cubes = ex.tube_cubes
        n = len(cubes)
        for a in range(n):
            for b in range(a + 1, n):
                diff = sorted(abs(x - y) for x, y in zip(cubes[a], cubes[b]))
                adjacent = diff == [0, 0, 1]
                consecutive = (b - a) in (1, n - 1)
                assert not (adjacent and not consecutive), (cubes[a], cubes[b])
    with pytest.raises(ValueError):
        plgt.anomaly_example(1)


def test_anomaly_conditional_by_sampling():
    # Monte Carlo cocycle average agrees with the exact 0/1 conditional
    ex = plgt.anomaly_example(2)
    rng = np.random.default_rng(10)
    for q in (2, 3):
        gq = ex.gamma.reduce_mod(q)
        acc = 0
        n = 150
        for _ in range(n):
            f = alg.uniform_cocycle(ex.config, q, rng)
            acc += np.exp(2j * np.pi * f.evaluate(gq) / q)
        mc = acc / n
        exact = alg.wilson_conditional(ex.config, gq, q)
        assert abs(mc - exact) < 4 / math.sqrt(n) + 1e-9


def test_comparison_fails_with_integer_event():
    # substituting V_gamma(Z) breaks the identity on the anomaly complex
    ex = plgt.anomaly_example(2)
    box, gamma = ex.config.box, ex.gamma
    q, p = 2, 0.5
    exact = alg.wilson_conditional(ex.config, gamma.reduce_mod(q), q)  # = 1
    wrong = int(alg.null_homology_test(ex.config, gamma, 0))           # = 0
    assert exact == 1 and wrong == 0


def test_eta_validation():
    with pytest.raises(ValueError):
        plgt._validate_eta(CUBE, 1, 3, (1,) * 5)
    eta = plgt.eta_constant(CUBE, 3, 1, 2)
    plgt._validate_eta(CUBE, 1, 3, eta)
