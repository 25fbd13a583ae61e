"""Executable identity suites: coupling marginals, Wilson/null-homology
comparison, codimension-one collapse, duality, linking criteria, FKG and
boundary-condition monotonicity.

Each suite returns a VerifyResult; the CLI exits nonzero when any fails.
All comparisons are exact (rational arithmetic) unless stated otherwise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import algebra as alg
from . import duality as dualmod
from . import plgt as plgtmod
from . import prcm as prcmmod
from .experiments import VGammaEvaluator, rng_for
from .lattice import (Bc, Box, Chain, Cochain, PercolationConfig,
                      enumerate_cells, loop_boundary_chain)


@dataclass
class VerifyResult:
    name: str
    ok: bool
    n_checked: int
    max_err: float = 0.0
    details: str = ""
    failures: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" max_err={self.max_err:.3g}" if self.max_err else ""
        return f"[{status}] {self.name}: {self.n_checked} checks{extra} {self.details}".rstrip()


def verify_coupling(box: Box, q: int, p: float, bc: Bc = Bc.FULL) -> VerifyResult:
    """Coupling marginals against the exact PLGT and PRCM laws.

    The plaquette marginal (cocycle counts) is compared entrywise with the
    homology-weighted random-cluster law; the spin marginal is compared on
    the exact unsatisfied-count pushforward, through which both densities
    factor, and against the literal sum over P on a sample of cochains.
    """
    params = plgtmod.PlgtParams.from_p(p, q, box.d - 2, box.d, bc)
    coup = plgtmod.coupling_exact(box, params)
    mu = prcmmod.enumerate_measure(
        box, prcmmod.PrcmParams(p=p, q=q, i=params.i, d=box.d, bc=bc))
    n = 0
    worst = Fraction(0)
    for P in coup.p_configs:
        diff = abs(coup.plaquette_marginal(P) - mu.prob_of(P))
        worst = max(worst, diff)
        n += 1
    ok = worst == 0
    gibbs = plgtmod.gibbs_exact(box, params)
    gdist = gibbs.unsat_distribution()
    # kappa spin marginal pushed onto the unsat count, from the same counts
    ctx = plgtmod._ExpansionContext(box, params)
    kdist: dict[int, Fraction] = {}
    m = len(ctx.state_idx)
    pf = Fraction(params.p)
    universe = list(ctx.state_idx)
    for S in plgtmod._all_subsets(universe):
        S = frozenset(S)
        rest = [j for j in universe if j not in S]
        cnt = 0
        for extra in plgtmod._all_subsets(rest):
            cnt += (-1) ** len(extra) * ctx.count(tuple(sorted(S | set(extra))))
        if cnt:
            u = m - len(S)
            kdist[u] = kdist.get(u, Fraction(0)) + cnt * (1 - pf) ** u
    total = sum(kdist.values())
    kdist = {u: v / total for u, v in kdist.items()}
    ok = ok and kdist == gdist
    n += len(gdist)
    # spot-check the closed-form spin marginal against the literal P-sum
    rng = rng_for(7, "coupling", box, q, p)
    n_edges = len(enumerate_cells(box, params.k))
    for _ in range(20):
        f = Cochain(box, params.k, q, rng.integers(q, size=n_edges))
        a = coup.spin_marginal_weight(f)
        b = coup.spin_marginal_weight_by_sum(f)
        ok = ok and a == b
        n += 1
    return VerifyResult("coupling-marginals", ok, n, float(worst),
                        f"q={q} p={p} bc={bc.value}")


def verify_comparison(box: Box, q: int, p: float, bc: Bc = Bc.FULL,
                      gamma: Chain | None = None, eta=None,
                      tol: float = 1e-12) -> VerifyResult:
    """E_nu[W_gamma] = mu(V_gamma) on one tiny complex, both sides exact."""
    params = plgtmod.PlgtParams.from_p(p, q, box.d - 2, box.d, bc, eta)
    if gamma is None:
        gamma = _default_gamma(box)
    gq = gamma.reduce_mod(q)
    ew, muv = plgtmod.comparison_identity_check(box, params, gq)
    err = abs(ew - float(muv))
    return VerifyResult("wilson-comparison", err <= tol, 1, err,
                        f"q={q} p={p} bc={'eta' if eta is not None else bc.value} "
                        f"E={ew.real:.10f} mu={float(muv):.10f}")


def _default_gamma(box: Box) -> Chain:
    lo = box.lo
    mid = (box.lo[-1] + box.hi[-1]) // 2
    mid -= mid % 2
    r = Box(lo[:-1] + (mid,), (lo[0] + 2, lo[1] + 2) + lo[2:-1] + (mid,))
    return loop_boundary_chain(r)


def verify_codim1(box: Box, q: int, p: float = 0.4) -> VerifyResult:
    """|H^{d-2}(P; Z_q)| = q^{b_{d-2}(P; Q)} on every config of the box, and
    entrywise equality of the group measure with the rational-q measure."""
    d = box.d
    base = PercolationConfig.empty(box, d - 1, Bc.FREE)
    state = np.flatnonzero(base.state_mask())
    n = 0
    ok = True
    for mask in range(1 << len(state)):
        occ = np.zeros(base.n_cells(), dtype=bool)
        occ[state[[j for j in range(len(state)) if mask >> j & 1]]] = True
        P = base.with_occupied(occ)
        if alg.homology_order(P, d - 2, q) != q ** alg.betti_rational(P, d - 2):
            ok = False
        n += 1
    group = prcmmod.enumerate_measure(
        box, prcmmod.PrcmParams(p=p, q=q, i=d - 1, d=d, bc=Bc.FREE))
    rational = prcmmod.enumerate_measure(
        box, prcmmod.PrcmParams(p=p, q=q, i=d - 1, d=d, bc=Bc.FREE, rational=True))
    for P in group.configs:
        if group.prob_of(P) != rational.prob_of(P):
            ok = False
        n += 1
    return VerifyResult("codim1-collapse", ok, n, 0.0, f"q={q} p={p}")


def verify_duality(box: Box, q: float, p: float) -> VerifyResult:
    """Entrywise duality: the PRCM law on the box equals the classical RCM
    law of the dual configuration at p*, with free and wired swapped."""
    pstar = prcmmod.p_star(Fraction(p), Fraction(q))
    n = 0
    ok = True
    for bc, wired_dual in ((Bc.FREE, True), (Bc.WIRED, False)):
        dist = prcmmod.enumerate_measure(
            box, prcmmod.PrcmParams(p=p, q=q, i=box.d - 1, d=box.d, bc=bc,
                                    rational=(q != int(q))))
        weights = []
        for P in dist.configs:
            Q = dualmod.dualize(P)
            Qbc = dualmod.DualBondConfig(Q.primal_box, Q.occupied, wired_dual)
            m = int(Qbc.occupied.sum())
            N = len(Qbc.occupied)
            ncomp = Qbc.n_components()
            w = (Fraction(pstar) ** m * (1 - Fraction(pstar)) ** (N - m)
                 * Fraction(q) ** (ncomp - 1))
            weights.append(w)
        Z = sum(weights)
        for P, w in zip(dist.configs, weights):
            if dist.prob_of(P) != w / Z:
                ok = False
            n += 1
    return VerifyResult("duality", ok, n, 0.0, f"q={q:g} p={p} at p*={float(pstar):.6f}")


def verify_linking(box: Box, gamma: Chain, n_configs: int, seed,
                   qs=(0, 2, 3, 4, 6), density_span=(0.2, 0.8)) -> VerifyResult:
    """v_gamma_dual_test == null_homology_test on random configs, all bcs."""
    rng = rng_for(seed, "linking", box)
    n = 0
    mismatches = 0
    evaluators = {bc: VGammaEvaluator(box, gamma, bc)
                  for bc in (Bc.FULL, Bc.FREE, Bc.WIRED)}
    bcs = list(evaluators)
    for t in range(n_configs):
        bc = bcs[t % len(bcs)]
        p = density_span[0] + rng.random() * (density_span[1] - density_span[0])
        P = PercolationConfig.random(box, box.d - 1, p, rng, bc)
        for q in qs:
            gq = gamma.reduce_mod(q)
            a = alg.null_homology_test(P, gq, q)
            b = dualmod.v_gamma_dual_test(P, gq, q)
            c = evaluators[bc].decide(P, q)
            n += 1
            if not (a == b == c):
                mismatches += 1
    return VerifyResult("linking-criterion", mismatches == 0, n, mismatches,
                        f"{n_configs} configs, q in {tuple(qs)}")


def verify_equator(box: Box, axis: int, height: int, n_configs: int,
                   seed) -> VerifyResult:
    """not V_gamma == hemisphere dual crossing for the equator loop, and
    independence of the coefficient group."""
    d = box.d
    lo = list(box.lo)
    hi = list(box.hi)
    lo[axis] = hi[axis] = 2 * height
    gamma = loop_boundary_chain(Box(tuple(lo), tuple(hi)))
    rng = rng_for(seed, "equator", box, axis, height)
    n = 0
    ok = True
    for t in range(n_configs):
        bc = (Bc.FULL, Bc.FREE, Bc.WIRED)[t % 3]
        P = PercolationConfig.random(box, d - 1, 0.25 + 0.5 * rng.random(), rng, bc)
        cross = dualmod.hemisphere_crossing(P, axis, height)
        vals = {alg.null_homology_test(P, gamma.reduce_mod(q), q) for q in (0, 2, 3)}
        n += 1
        if len(vals) != 1 or vals.pop() != (not cross):
            ok = False
    return VerifyResult("equator-crossing", ok, n, 0.0,
                        f"axis={axis} height={height}")


def _increasing_event_catalogue(box: Box, i: int, bc: Bc):
    from .lattice import boundary_cell_mask

    interior = np.flatnonzero(~boundary_cell_mask(box, i))
    a, b = int(interior[0]), int(interior[-1])
    gamma = _default_gamma(box)
    evaluator = VGammaEvaluator(box, gamma, bc)

    def occupied(j):
        return lambda P: bool(P.occupied[j])

    def count_at_least(k):
        return lambda P: P.n_occupied() >= k

    events = [("cell_low", occupied(a)), ("cell_high", occupied(b)),
              ("half_full", count_at_least(max(1, len(interior) // 2))),
              ("v_gamma", lambda P: evaluator.decide(P, 2))]
    return events


def verify_fkg(box: Box, q: float, p: float, bc: Bc = Bc.FREE) -> VerifyResult:
    """mu(A and B) >= mu(A) mu(B) for a catalogue of increasing pairs."""
    dist = prcmmod.enumerate_measure(
        box, prcmmod.PrcmParams(p=p, q=q, i=box.d - 1, d=box.d, bc=bc,
                                rational=(q != int(q))))
    events = _increasing_event_catalogue(box, box.d - 1, bc)
    ok = True
    n = 0
    for (name_a, A), (name_b, B) in itertools.combinations_with_replacement(events, 2):
        pa = dist.event_prob(A)
        pb = dist.event_prob(B)
        pab = dist.event_prob(lambda P: A(P) and B(P))
        n += 1
        if pab < pa * pb:
            ok = False
    return VerifyResult("fkg", ok, n, 0.0, f"q={q:g} p={p} bc={bc.value}")


def verify_extremal(box: Box, q: float, p: float) -> VerifyResult:
    """Free <= wired stochastic ordering on increasing events, exactly."""
    free = prcmmod.enumerate_measure(
        box, prcmmod.PrcmParams(p=p, q=q, i=box.d - 1, d=box.d, bc=Bc.FREE))
    wired = prcmmod.enumerate_measure(
        box, prcmmod.PrcmParams(p=p, q=q, i=box.d - 1, d=box.d, bc=Bc.WIRED))
    gamma = _default_gamma(box)
    ok = True
    n = 0
    for name, A in _increasing_event_catalogue(box, box.d - 1, Bc.FREE):
        n += 1
        if free.event_prob(A) > wired.event_prob(A):
            ok = False
    # V_gamma with the wired complex on the wired side (the V^inf proxy)
    ev_free = VGammaEvaluator(box, gamma, Bc.FREE)
    ev_wired = VGammaEvaluator(box, gamma, Bc.WIRED)
    pf = free.event_prob(lambda P: ev_free.decide(P, 2))
    pw = wired.event_prob(lambda P: ev_wired.decide(P, 2))
    n += 1
    if pf > pw:
        ok = False
    return VerifyResult("extremal-ordering", ok, n, 0.0, f"q={q:g} p={p}")


def _tiny_complex(box: Box) -> Box:
    """Clamp to the unit cube when the box is too big for exact coupling."""
    if len(enumerate_cells(box, box.d - 1)) > 8:
        return Box.lattice((0,) * box.d, (1,) * box.d)
    return box


SUITES = {
    "coupling": lambda box, q, p, **kw: verify_coupling(
        _tiny_complex(box), int(q), p),
    "comparison": lambda box, q, p, **kw: verify_comparison(
        _tiny_complex(box), int(q), p),
    "codim1": lambda box, q, p, **kw: verify_codim1(box, int(q), p),
    "duality": lambda box, q, p, **kw: verify_duality(box, q, p),
    "linking": lambda box, q, p, n=120, seed=0, **kw: verify_linking(
        box, _default_gamma(box), n, seed),
    "equator": lambda box, q, p, n=120, seed=0, **kw: verify_equator(
        box, box.d - 1, (box.lo[-1] + box.hi[-1]) // 4, n, seed),
    "fkg": lambda box, q, p, **kw: verify_fkg(box, q, p),
    "extremal": lambda box, q, p, **kw: verify_extremal(box, q, p),
}
