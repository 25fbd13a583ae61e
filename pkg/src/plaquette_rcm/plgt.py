"""Potts lattice gauge theory: Gibbs weights, Wilson loops, the joint
coupling with the plaquette random-cluster model, and the classic
composite-q anomaly configuration.

Spins are residues on the k-cells of a box; the Hamiltonian counts
unsatisfied coboundaries over the (k+1)-cells of the complex.  Exact
computations run in rational arithmetic: Gibbs weights are proportional to
(1-p)^{#unsat} with p = 1 - e^{-beta}, and Wilson expectations come from a
subset expansion whose terms are integer solution counts of linear systems
over Z_q together with root-of-unity subgroup sums.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import algebra as alg
from .lattice import (Bc, Box, CellId, Chain, Cochain, PercolationConfig,
                      boundary_cell_mask, cell_index, enumerate_cells,
                      full_boundary_matrix, loop_boundary_chain)


@dataclass(frozen=True)
class PlgtParams:
    """Parameters of the q-state Potts lattice gauge theory on a box.

    k is the spin-cell dimension (= i-1 for the coupled PRCM).  `eta`
    prescribes the spins on the boundary k-cells (a cocycle of the box
    boundary); bc=WIRED restricts to cochains whose boundary restriction
    is a cocycle; bc=FULL puts no boundary condition (finite complex), and
    bc=FREE uses the box convention without the boundary (k+1)-cells.
    """

    beta: float
    q: int
    k: int
    d: int
    bc: Bc = Bc.FULL
    eta: tuple | None = None  # values on boundary k-cells, canonical order
    p_exact: float | None = None  # pins p = 1 - e^{-beta} against rounding

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.q < 1:
            raise ValueError("q must be a positive integer")
        if not (0 <= self.k < self.d):
            raise ValueError("need 0 <= k < d")

    @property
    def i(self) -> int:
        return self.k + 1

    @property
    def p(self) -> float:
        return self.p_exact if self.p_exact is not None else -math.expm1(-self.beta)

    @classmethod
    def from_p(cls, p: float, q: int, k: int, d: int, bc: Bc = Bc.FULL,
               eta=None) -> "PlgtParams":
        if not (0 <= p < 1):
            raise ValueError("p must lie in [0, 1)")
        return cls(-math.log1p(-p), q, k, d, bc, eta, p_exact=p)


def _state_sigma_mask(box: Box, params: PlgtParams) -> np.ndarray:
    """Which (k+1)-cells the Hamiltonian sums over."""
    n = len(enumerate_cells(box, params.i))
    if params.bc is Bc.FULL:
        return np.ones(n, dtype=bool)
    return ~boundary_cell_mask(box, params.i)


def _boundary_edge_idx(box: Box, k: int) -> np.ndarray:
    return np.flatnonzero(boundary_cell_mask(box, k))


def eta_constant(box: Box, params_q: int, k: int, value: int) -> tuple:
    """A constant boundary cocycle: every boundary k-cell carries `value`."""
    n = int(boundary_cell_mask(box, k).sum())
    eta = (value % params_q,) * n
    _validate_eta(box, k, params_q, eta)
    return eta


def _validate_eta(box: Box, k: int, q: int, eta) -> None:
    """eta must be a cocycle of the boundary complex of the box."""
    bidx = _boundary_edge_idx(box, k)
    if len(eta) != len(bidx):
        raise ValueError(f"eta needs {len(bidx)} boundary {k}-cell values")
    f = np.zeros(len(enumerate_cells(box, k)), dtype=np.int64)
    f[bidx] = np.asarray(eta) % q
    df = (full_boundary_matrix(box, k + 1).T @ f) % q
    for j in np.flatnonzero(boundary_cell_mask(box, k + 1)):
        if df[j]:
            raise ValueError("eta is not a cocycle on the box boundary")


def hamiltonian(f: Cochain, params: PlgtParams) -> int:
    """H(f) = -#{sigma : delta f(sigma) = 0} over the state (k+1)-cells."""
    df = f.coboundary().values
    mask = _state_sigma_mask(f.box, params)
    return -int((df[mask] == 0).sum())


def wilson_loop(f: Cochain, gamma: Chain) -> complex:
    """W_gamma(f) = exp(2 pi i f(gamma) / q)."""
    return cmath.exp(2j * cmath.pi * f.evaluate(gamma) / f.q)


def gauge_transform(f: Cochain, h: Cochain) -> Cochain:
    """f + delta h."""
    return f + h.coboundary()


def in_state_space(f: Cochain, params: PlgtParams) -> bool:
    """Membership of f in the bc-restricted cochain set."""
    box = f.box
    if params.eta is not None:
        bidx = _boundary_edge_idx(box, params.k)
        return bool((f.values[bidx] == np.asarray(params.eta) % params.q).all())
    if params.bc is Bc.WIRED:
        df = f.coboundary().values
        return not df[boundary_cell_mask(box, params.i)].any()
    return True


# ---------------------------------------------------------------------------
# exact subset expansion
# ---------------------------------------------------------------------------

def _delta_rows(box: Box, k: int) -> np.ndarray:
    """delta as a matrix: row per (k+1)-cell, column per k-cell."""
    return full_boundary_matrix(box, k + 1).T


class _ExpansionContext:
    """Shared data for exact sums over the bc-restricted cochain space.

    Terms of the expansion prod_sigma [(1-p) + p K(delta f sigma)] are
    indexed by subsets T of the state (k+1)-cells; each contributes
    (p/(1-p))^|T| times a linear-system count over Z_q.
    """

    def __init__(self, box: Box, params: PlgtParams):
        self.box, self.params = box, params
        self.q = params.q
        self.delta = _delta_rows(box, params.k)
        self.state_idx = np.flatnonzero(_state_sigma_mask(box, params))
        if len(self.state_idx) > 20:
            raise ValueError("state space too large for the subset expansion")
        self.wired_rows = (np.flatnonzero(boundary_cell_mask(box, params.i))
                           if params.bc is Bc.WIRED or params.eta is not None
                           else np.array([], dtype=int))
        self.bidx = _boundary_edge_idx(box, params.k)
        n_edges = self.delta.shape[1]
        if params.eta is not None:
            sel = np.zeros((len(self.bidx), n_edges), dtype=np.int64)
            for r, j in enumerate(self.bidx):
                sel[r, j] = 1
            self.eta_rows = sel
            self.eta_rhs = np.asarray(params.eta, dtype=np.int64) % self.q
        else:
            self.eta_rows = None

    def system(self, T):
        """Constraint matrix (and rhs) for delta f = 0 on T plus the bc rows."""
        rows = [self.delta[sorted(T)]] if len(T) else []
        if len(self.wired_rows):
            rows.append(self.delta[self.wired_rows])
        A = np.vstack(rows) if rows else np.zeros((0, self.delta.shape[1]),
                                                  dtype=np.int64)
        if self.eta_rows is None:
            return A, None
        rhs = np.concatenate([np.zeros(A.shape[0], dtype=np.int64), self.eta_rhs])
        return np.vstack([A, self.eta_rows]), rhs

    def count(self, T) -> int:
        """#{f in D : delta f = 0 on T}."""
        A, rhs = self.system(T)
        if rhs is None:
            return alg.kernel_count_mod_q(A, self.q)
        x0 = alg.solve_mod_q(A, rhs, self.q)
        if x0 is None:
            return 0
        return alg.kernel_count_mod_q(A, self.q)

    def phase_sum(self, T, gvec) -> dict:
        """Coefficients c_a of sum over {f in D : delta f = 0 on T} of
        omega^{f(gamma)} as an element sum_a c_a omega^a of the group ring."""
        A, rhs = self.system(T)
        if rhs is None:
            x0 = np.zeros(A.shape[1], dtype=np.int64)
        else:
            x0 = alg.solve_mod_q(A, rhs, self.q)
            if x0 is None:
                return {}
        kernel = alg.kernel_count_mod_q(A, self.q)
        stacked = np.vstack([A, gvec[None, :]])
        sub = kernel // alg.kernel_count_mod_q(stacked, self.q)
        base = int(gvec @ x0) % self.q
        if sub == 1:
            return {base: kernel}
        # the phases fill the subgroup of order `sub` uniformly: the sum
        # vanishes unless collapsed; keep the exact group-ring element
        step = self.q // sub
        return {(base + step * t) % self.q: kernel // sub for t in range(sub)}


def _x_ratio(params: PlgtParams) -> Fraction:
    """p/(1-p) = e^beta - 1, exact in the float p."""
    pf = Fraction(params.p)
    return pf / (1 - pf)


def partition_terms(box: Box, params: PlgtParams):
    """All (|T|, count) pairs of the subset expansion (cached per call)."""
    ctx = _ExpansionContext(box, params)
    out = []
    for T in _all_subsets(ctx.state_idx):
        out.append((len(T), ctx.count(T)))
    return out


def _all_subsets(idx):
    idx = list(idx)
    for r in range(len(idx) + 1):
        yield from itertools.combinations(idx, r)


def gibbs_partition(box: Box, params: PlgtParams) -> Fraction:
    """Z = sum over the state space of (1-p)^{#unsat}, exact."""
    x = _x_ratio(params)
    terms = partition_terms(box, params)
    m = int(_state_sigma_mask(box, params).sum())
    pf = Fraction(params.p)
    return (1 - pf) ** m * sum(x ** t * c for t, c in terms)


def wilson_expectation_exact(box: Box, params: PlgtParams, gamma: Chain):
    """E_nu[W_gamma], exact through the subset expansion.

    Returns (complex value, group-ring numerator dict, denominator)."""
    ctx = _ExpansionContext(box, params)
    gvec = np.zeros(ctx.delta.shape[1], dtype=np.int64)
    idx = cell_index(box, params.k)
    for cell, coeff in gamma.terms.items():
        gvec[idx[cell]] = coeff
    x = _x_ratio(params)
    numer: dict[int, Fraction] = {}
    denom = Fraction(0)
    for T in _all_subsets(ctx.state_idx):
        w = x ** len(T)
        for a, c in ctx.phase_sum(T, gvec).items():
            numer[a] = numer.get(a, Fraction(0)) + w * c
        denom += w * ctx.count(T)
    value = sum(float(c) * cmath.exp(2j * cmath.pi * a / params.q)
                for a, c in numer.items()) / float(denom)
    return value, numer, denom


# ---------------------------------------------------------------------------
# exact Gibbs law and spin heat bath
# ---------------------------------------------------------------------------

class ExactGibbs:
    """Exact PLGT law on a tiny box; weights (1-p)^{#unsat} over the
    bc-restricted state set, with full enumeration when feasible."""

    def __init__(self, box: Box, params: PlgtParams, enumeration_cap: int = 2 ** 21):
        self.box, self.params = box, params
        self.n_edges = len(enumerate_cells(box, params.k))
        self.Z = gibbs_partition(box, params)
        self.cap = enumeration_cap

    def weight_of(self, f: Cochain) -> Fraction:
        if not in_state_space(f, self.params):
            return Fraction(0)
        satisfied = -hamiltonian(f, self.params)
        m = int(_state_sigma_mask(self.box, self.params).sum())
        pf = Fraction(self.params.p)
        return (1 - pf) ** (m - satisfied)

    def prob_of(self, f: Cochain) -> Fraction:
        return self.weight_of(f) / self.Z

    def enumerate(self):
        """Yield (values tuple, probability) over the whole state set."""
        q = self.params.q
        if q ** self.n_edges > self.cap:
            raise ValueError("state space too large for full enumeration")
        for vals in itertools.product(range(q), repeat=self.n_edges):
            f = Cochain(self.box, self.params.k, q, np.array(vals))
            w = self.weight_of(f)
            if w:
                yield vals, w / self.Z

    def unsat_distribution(self) -> dict[int, Fraction]:
        """Exact pushforward onto the number of unsatisfied cells."""
        ctx = _ExpansionContext(self.box, self.params)
        m = len(ctx.state_idx)
        n_ge = {}
        for T in _all_subsets(ctx.state_idx):
            n_ge[frozenset(T)] = ctx.count(T)
        pf = Fraction(self.params.p)
        dist: dict[int, Fraction] = {}
        universe = list(ctx.state_idx)
        for S in _all_subsets(universe):
            # exact-satisfied-set count by inclusion-exclusion over supersets
            S = frozenset(S)
            rest = [j for j in universe if j not in S]
            cnt = 0
            for extra in _all_subsets(rest):
                cnt += (-1) ** len(extra) * n_ge[S | frozenset(extra)]
            if cnt:
                u = m - len(S)
                dist[u] = dist.get(u, Fraction(0)) + cnt * (1 - pf) ** u / self.Z
        return dist


def gibbs_exact(box: Box, params: PlgtParams) -> ExactGibbs:
    return ExactGibbs(box, params)


def heatbath_spin_step(f: Cochain, params: PlgtParams, rng,
                       cells: list[int] | None = None) -> Cochain:
    """One heat-bath pass: resample each spin from its exact conditional.

    Boundary cells are frozen under eta bc; under wired bc a move must keep
    the boundary restriction a cocycle, so values violating a boundary
    (k+1)-cell are excluded from the conditional.
    """
    q = params.q
    box = f.box
    delta = _delta_rows(box, params.k)
    state = _state_sigma_mask(box, params)
    bmask_sigma = boundary_cell_mask(box, params.i)
    frozen = set()
    if params.eta is not None:
        frozen = set(_boundary_edge_idx(box, params.k).tolist())
    values = f.values.copy()
    pf = params.p
    order = range(len(values)) if cells is None else cells
    for e in order:
        if e in frozen:
            continue
        incident = np.flatnonzero(delta[:, e])
        weights = np.zeros(q)
        for a in range(q):
            values[e] = a
            df = (delta[incident] @ values) % q
            ok = True
            unsat = 0
            for row, sigma in zip(df, incident):
                if row == 0:
                    continue
                if params.bc is Bc.WIRED and params.eta is None and bmask_sigma[sigma]:
                    ok = False
                    break
                if state[sigma]:
                    unsat += 1
            weights[a] = (1 - pf) ** unsat if ok else 0.0
        weights /= weights.sum()
        values[e] = rng.choice(q, p=weights)
    return Cochain(box, params.k, q, values)


# ---------------------------------------------------------------------------
# the joint coupling
# ---------------------------------------------------------------------------

def coupling_joint_weight(f: Cochain, P: PercolationConfig,
                          params: PlgtParams) -> Fraction:
    """kappa(f, P) ~ prod over state sigma of (1-p) 1{out} + p 1{in, flat}."""
    if not in_state_space(f, params):
        return Fraction(0)
    pf = Fraction(params.p)
    df = f.coboundary().values
    w = Fraction(1)
    state = _state_sigma_mask(f.box, params)
    for j in np.flatnonzero(state):
        if P.occupied[j]:
            if df[j] % params.q:
                return Fraction(0)
            w *= pf
        else:
            w *= 1 - pf
    return w


class ExactCoupling:
    """Exact joint law kappa on tiny complexes, exposed through marginals.

    The plaquette marginal is p^|P| (1-p)^{N-|P|} |Z^{k}(P-complex) cap D|,
    an integer solution count; the spin marginal collapses onto the
    unsatisfied count since the joint weight factors through delta f.
    """

    def __init__(self, box: Box, params: PlgtParams):
        self.box, self.params = box, params
        bc = params.bc if params.eta is None else Bc.WIRED
        if bc is Bc.FULL:
            self.base = PercolationConfig.empty(box, params.i, Bc.FULL)
        else:
            self.base = PercolationConfig.empty(box, params.i, bc)
        self.state = np.flatnonzero(self.base.state_mask())
        if len(self.state) > 20:
            raise ValueError("too many plaquettes for exact coupling")
        self.ctx = _ExpansionContext(box, params)
        pf = Fraction(params.p)
        self.p_configs, self.p_weights = [], []
        for mask in range(1 << len(self.state)):
            occ = np.zeros(self.base.n_cells(), dtype=bool)
            chosen = [int(self.state[j]) for j in range(len(self.state))
                      if mask >> j & 1]
            occ[chosen] = True
            P = self.base.with_occupied(occ)
            cnt = self.ctx.count(tuple(chosen))
            k = len(chosen)
            self.p_configs.append(P)
            self.p_weights.append(pf ** k * (1 - pf) ** (len(self.state) - k) * cnt)
        self.Z = sum(self.p_weights)
        self._index = {c.occupied_key(): j for j, c in enumerate(self.p_configs)}

    def plaquette_marginal(self, P: PercolationConfig) -> Fraction:
        return self.p_weights[self._index[P.occupied_key()]] / self.Z

    def spin_marginal_weight(self, f: Cochain) -> Fraction:
        """Summed over P in closed form: (1-p)^{#unsat} on the state set."""
        if not in_state_space(f, self.params):
            return Fraction(0)
        df = f.coboundary().values
        unsat = int((df[self.state] != 0).sum())
        pf = Fraction(self.params.p)
        return (1 - pf) ** unsat

    def spin_marginal_weight_by_sum(self, f: Cochain) -> Fraction:
        """The same marginal by literally summing kappa(f, P) over all P."""
        total = Fraction(0)
        for P in self.p_configs:
            total += coupling_joint_weight(f, P, self.params)
        return total

    def spin_prob(self, f: Cochain) -> Fraction:
        return self.spin_marginal_weight(f) / self.Z


def coupling_exact(box: Box, params: PlgtParams) -> ExactCoupling:
    return ExactCoupling(box, params)


class ComparisonPreconditionError(ValueError):
    pass


def comparison_identity_check(box: Box, params: PlgtParams, gamma: Chain):
    """Both sides of E_nu[W_gamma] = mu(V_gamma), exact.

    Requires H_{k-1} of the ambient complex to vanish (true on boxes); the
    PLGT side comes from the subset expansion, the PRCM side from the
    exhaustive homology-weighted measure and null-homology tests.
    """
    from . import prcm as prcm_mod

    bc = params.bc if params.eta is None else Bc.WIRED
    ambient = PercolationConfig.full(box, params.i, bc if bc is not Bc.FULL else Bc.FULL)
    if params.k >= 1 and alg.homology_order(ambient, params.k - 1, params.q) != 1:
        raise ComparisonPreconditionError("H_{k-1} of the ambient complex not trivial")
    value, numer, denom = wilson_expectation_exact(box, params, gamma)
    mu_params = prcm_mod.PrcmParams(p=params.p, q=params.q, i=params.i,
                                    d=params.d, bc=bc)
    dist = prcm_mod.enumerate_measure(box, mu_params)
    gq = gamma.reduce_mod(params.q)
    mu_v = dist.event_prob(lambda P: alg.null_homology_test(P, gq, params.q))
    return value, mu_v


# ---------------------------------------------------------------------------
# the Aizenman-Frohlich composite-q anomaly
# ---------------------------------------------------------------------------

@dataclass
class AnomalyExample:
    """A tube of width one piercing a flat strip k times, all exterior
    plaquettes occupied: the boundary of the strip is k times a tube
    meridian in integer homology."""

    config: PercolationConfig
    gamma: Chain
    surface: Box
    tube_cubes: list
    core_loop: "object"

    def __iter__(self):
        return iter((self.config, self.gamma))


def _anomaly_cube_path(k: int) -> list[tuple[int, int, int]]:
    """Closed serpentine of unit cubes crossing z=0 downward at the strip
    plaquettes x in [4j, 4j+1] and upward outside the strip; cubes are
    keyed by their minimal corner (integer coordinates)."""
    cubes = []
    for j in range(k):
        x = 4 * j
        cubes.append((x, 0, 0))        # above sigma_j
        cubes.append((x, 0, -1))       # below sigma_j (crosses sigma_j)
        if j == k - 1:
            break
        cubes.append((x + 1, 0, -1))   # gap, below
        cubes.append((x + 1, 1, -1))   # sidestep north, below
        cubes.append((x + 1, 1, 0))    # rise outside the strip
        cubes.append((x + 1, 2, 0))    # to the far lane
        cubes.append((x + 2, 2, 0))
        cubes.append((x + 3, 2, 0))
        cubes.append((x + 3, 1, 0))    # back south
        cubes.append((x + 3, 0, 0))    # above the gap, next to sigma_{j+1}
    # return path: south below the plane, west, then rise to close
    xl = 4 * (k - 1)
    cubes.append((xl, -1, -1))
    cubes.append((xl, -2, -1))
    for c in range(xl - 1, -2, -1):
        cubes.append((c, -2, -1))
    cubes.append((-1, -1, -1))
    cubes.append((-1, -1, 0))          # rise outside the strip
    cubes.append((-1, 0, 0))           # closes onto the first cube
    return cubes


def anomaly_example(k: int) -> AnomalyExample:
    """The Aizenman-Frohlich configuration in d=3 for multiplicity k.

    gamma bounds over Z_q exactly when q divides k, and never over Z; the
    conditional Wilson expectation given the configuration equals the
    V_gamma(q) indicator.
    """
    from .duality import DualLoop

    if k < 2:
        raise ValueError("the anomaly needs k >= 2")
    cubes = _anomaly_cube_path(k)
    if len(set(cubes)) != len(cubes):
        raise AssertionError("tube self-intersects")
    box = Box.lattice((-1, -2, -1), (4 * k - 3, 3, 1))
    surface = Box.lattice((0, 0, 0), (4 * k - 3, 1, 0))
    gamma = loop_boundary_chain(surface)

    idx = cell_index(box, 2)
    n = len(enumerate_cells(box, 2))
    occupied = np.ones(n, dtype=bool)
    for (ax, ay, az), (bx, by, bz) in zip(cubes, cubes[1:] + cubes[:1]):
        diff = (bx - ax, by - ay, bz - az)
        if sorted(map(abs, diff)) != [0, 0, 1]:
            raise AssertionError(f"tube cubes not adjacent: {(ax, ay, az)} {(bx, by, bz)}")
        axis = next(j for j in range(3) if diff[j])
        face_corner = [2 * ax, 2 * ay, 2 * az]
        if diff[axis] > 0:
            face_corner[axis] += 2
        dirs = tuple(j for j in range(3) if j != axis)
        cell = CellId(tuple(face_corner), dirs)
        occupied[idx[cell]] = False
    P = PercolationConfig(box, 2, occupied, Bc.FULL)
    core = DualLoop(tuple(tuple(2 * c + 1 for c in cube) for cube in cubes))
    return AnomalyExample(P, gamma, surface, cubes, core)
