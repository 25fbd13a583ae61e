"""The plaquette random-cluster measure: exact weights on tiny boxes and
Markov-chain samplers.

Weights follow p^|P| (1-p)^(N-|P|) |H^{i-1}(P; Z_q)| with the wired variant
adjoining the boundary plaquettes, and the rational-coefficient variant
replacing the order by q^{b_{i-1}(P; Q)} (real q >= 1 allowed).  Exact
enumeration is done in rational arithmetic; the samplers are a single-bond
heat bath on the dual classical random-cluster model (codimension one) and
the Edwards-Sokal style alternation through the coupling conditionals.
"""

from __future__ import annotations

import math
import zlib
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import algebra as alg
from .duality import DualBondConfig, dual_geometry, dualize, undualize
from .lattice import Bc, Box, Cochain, PercolationConfig

ENUMERATION_CAP = 24


def rng_for(master_seed, *labels) -> np.random.Generator:
    """Deterministic stream split: master seed plus hashed labels."""
    words = []
    for lab in (master_seed,) + labels:
        if isinstance(lab, (int, np.integer)):
            words.append(int(lab) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(repr(lab).encode()) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


@dataclass(frozen=True)
class PrcmParams:
    """Parameters of the plaquette random-cluster measure."""

    p: float
    q: float
    i: int
    d: int
    bc: Bc = Bc.FREE
    rational: bool = False  # q^{b_{i-1}(P;Q)} weights, real q >= 1

    def __post_init__(self):
        if not (0 <= self.p <= 1):
            raise ValueError("p must lie in [0, 1]")
        if not (0 < self.i < self.d) and not (self.i == self.d):
            raise ValueError("need 0 < i < d")
        if self.rational:
            if self.q < 1:
                raise ValueError("rational mode needs real q >= 1")
        else:
            if self.q != int(self.q) or self.q < 1:
                raise ValueError("group mode needs integer q >= 1")

    @property
    def q_int(self) -> int:
        return int(self.q)


def p_star(p: float, q: float):
    """Dual bond parameter p* = (1-p) q / ((1-p) q + p); an involution."""
    if isinstance(p, Fraction) or isinstance(q, Fraction):
        p, q = Fraction(p), Fraction(q)
    num = (1 - p) * q
    return num / (num + p)


def beta_star(beta: float, q: float) -> float:
    """Dual inverse temperature log((e^b + q - 1)/(e^b - 1))."""
    if beta <= 0:
        raise ValueError("beta_star diverges at beta = 0")
    return math.log((math.exp(beta) + q - 1) / (math.exp(beta) - 1))


def beta_to_p(beta: float) -> float:
    return 1.0 - math.exp(-beta)


def config_weight(P: PercolationConfig, params: PrcmParams):
    """Unnormalized weight of one configuration, exact when q is integral."""
    if (P.box.dims() and P.i != params.i) or P.bc is not params.bc:
        raise ValueError("config inconsistent with params")
    n = P.n_state_cells()
    k = P.n_occupied()
    pfrac = Fraction(params.p)
    base = pfrac ** k * (1 - pfrac) ** (n - k)
    if params.rational:
        b = alg.betti_rational(P, params.i - 1)
        return base * Fraction(params.q) ** b
    return base * alg.homology_order(P, params.i - 1, params.q_int)


class ExactDistribution:
    """Full normalized distribution over the state plaquettes of a box."""

    def __init__(self, box: Box, params: PrcmParams, configs, weights):
        self.box = box
        self.params = params
        self.configs = configs          # list of PercolationConfig
        self.weights = weights          # unnormalized, parallel to configs
        self.partition_value = sum(weights)
        if self.partition_value == 0:
            raise ValueError("measure has zero total mass")
        self.probs = [w / self.partition_value for w in weights]
        self._index = {c.occupied_key(): j for j, c in enumerate(self.configs)}

    def prob_of(self, P: PercolationConfig):
        return self.probs[self._index[P.occupied_key()]]

    def event_prob(self, pred):
        return sum(p for c, p in zip(self.configs, self.probs) if pred(c))

    def expectation(self, fn):
        return sum(p * fn(c) for c, p in zip(self.configs, self.probs))

    def __len__(self):
        return len(self.configs)


def enumerate_measure(box: Box, params: PrcmParams) -> ExactDistribution:
    """Exhaustive exact distribution; feasible only on tiny boxes."""
    base = PercolationConfig.empty(box, params.i, params.bc)
    state = np.flatnonzero(base.state_mask())
    if len(state) > ENUMERATION_CAP:
        raise ValueError(f"{len(state)} state cells exceed the enumeration cap")
    configs, weights = [], []
    for mask in range(1 << len(state)):
        occ = np.zeros(base.n_cells(), dtype=bool)
        for j in range(len(state)):
            if mask >> j & 1:
                occ[state[j]] = True
        P = base.with_occupied(occ)
        configs.append(P)
        weights.append(config_weight(P, params))
    return ExactDistribution(box, params, configs, weights)


# ---------------------------------------------------------------------------
# dual heat-bath sampler (codimension one)
# ---------------------------------------------------------------------------

class DualHeatBathSampler:
    """Single-bond heat bath for the dual classical RCM at p*, dualized back.

    One update resamples an edge from its conditional: occupied with
    probability p*/(p* + (1-p*) q^D) where D indicates that the edge would
    merge two components (connectivity tested without the edge, through
    the wired boundary cluster when the dual carries wired bc).
    """

    def __init__(self, params: PrcmParams, box: Box, rng,
                 start: PercolationConfig | None = None):
        if params.i != params.d - 1:
            raise ValueError("the dual heat bath needs i = d-1")
        if params.bc is Bc.FULL:
            raise ValueError("bond duality carries free/wired bc only")
        if box.d != params.d:
            raise ValueError("box dimension mismatch")
        self.params = params
        self.box = box
        self.rng = rng
        self.pstar = float(p_star(params.p, params.q))
        if start is None:
            start = PercolationConfig.empty(box, params.i, params.bc)
        Q = dualize(start)
        self.wired_dual = Q.boundary_wired
        self.occupied = Q.occupied.copy()
        geom = dual_geometry(box)
        inner_ids = np.flatnonzero(geom.inner_vert)
        local = {int(g): j for j, g in enumerate(inner_ids)}
        self.n_verts = len(inner_ids)
        se = np.flatnonzero(geom.shrunk_edge)
        self.edge_u = np.array([local[int(geom.edge_u[e])] for e in se])
        self.edge_v = np.array([local[int(geom.edge_v[e])] for e in se])
        self.incident = [[] for _ in range(self.n_verts)]
        for k in range(len(se)):
            self.incident[self.edge_u[k]].append((self.edge_v[k], k))
            self.incident[self.edge_v[k]].append((self.edge_u[k], k))
        sh = box.half_shrink()
        self.is_boundary_vert = np.array(
            [any(geom.verts[g][j] in (sh.lo[j], sh.hi[j]) for j in range(box.d))
             for g in inner_ids], dtype=bool)

    def _connected_without(self, a: int, b: int, skip: int) -> bool:
        ok = self.occupied
        wired = self.wired_dual
        bnd = self.is_boundary_vert
        if wired and bnd[a] and bnd[b]:
            return True
        seen = np.zeros(self.n_verts, dtype=bool)
        frontier = deque()

        def add(u):
            if seen[u]:
                return
            seen[u] = True
            frontier.append(u)
            if wired and bnd[u]:
                # the wired boundary cluster is merged unconditionally
                for w in np.flatnonzero(bnd & ~seen):
                    seen[w] = True
                    frontier.append(w)

        add(a)
        while frontier:
            u = frontier.popleft()
            for v, k in self.incident[u]:
                if k == skip or not ok[k] or seen[v]:
                    continue
                if v == b or (wired and bnd[v] and bnd[b]):
                    return True
                add(v)
        return False

    def edge_conditional(self, k: int) -> float:
        """P(edge k occupied | rest of the current configuration)."""
        u, v = int(self.edge_u[k]), int(self.edge_v[k])
        connected = self._connected_without(u, v, k)
        ps, q = self.pstar, self.params.q
        return ps if connected else ps / (ps + (1.0 - ps) * q)

    def step(self, k: int):
        self.occupied[k] = self.rng.random() < self.edge_conditional(k)

    def sweep(self):
        for k in range(len(self.occupied)):
            self.step(k)

    def dual_config(self) -> DualBondConfig:
        return DualBondConfig(self.box, self.occupied.copy(), self.wired_dual)

    def config(self) -> PercolationConfig:
        return undualize(self.dual_config(), self.params.bc)


# ---------------------------------------------------------------------------
# Edwards-Sokal alternation
# ---------------------------------------------------------------------------

class EdwardsSokalSampler:
    """Alternates the two coupling conditionals: Bernoulli(p) plaquettes on
    the flat set of f, then a uniform cocycle of the new complex."""

    def __init__(self, params: PrcmParams, box: Box, rng,
                 start: PercolationConfig | None = None):
        if params.rational:
            raise ValueError("the coupling needs integer q (group mode)")
        self.params = params
        self.box = box
        self.rng = rng
        self.q = params.q_int
        if start is None:
            start = PercolationConfig.empty(box, params.i, params.bc)
        self.P = start
        self.f = Cochain(box, params.i - 1, max(self.q, 1))

    def p_step(self):
        df = self.f.coboundary().values
        flat = df == 0
        state = self.P.state_mask()
        occ = np.zeros_like(state)
        draw = self.rng.random(int(state.sum())) < self.params.p
        occ[np.flatnonzero(state)] = draw
        occ &= flat
        self.P = self.P.with_occupied(occ)

    def f_step(self):
        self.f = alg.uniform_cocycle(self.P, self.q, self.rng)

    def sweep(self):
        self.p_step()
        self.f_step()

    def state(self):
        return self.f, self.P

    def config(self) -> PercolationConfig:
        return self.P


# ---------------------------------------------------------------------------
# sampling driver
# ---------------------------------------------------------------------------

def integrated_autocorrelation(series: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's windowing rule."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0 or n < 4:
        return 0.5
    tau = 0.5
    for t in range(1, n // 2):
        rho = float(x[:-t] @ x[t:]) / ((n - t) * var)
        tau += rho
        if t >= c * tau:
            break
    return max(tau, 0.5)


def sample(params: PrcmParams, box: Box, n_sweeps: int, burn_in: int,
           rng_seed, gamma=None, sampler: str = "auto"):
    """Run a chain, returning the final config and a per-sweep trace.

    Trace rows carry the sweep index, |P|, the dual component count
    (codimension one only) and the V_gamma indicator when gamma is given.
    Reproducible for a fixed seed.
    """
    from .duality import v_gamma_dual_test

    rng = rng_for(rng_seed) if not isinstance(rng_seed, (int, np.integer)) \
        else np.random.default_rng(rng_seed)
    if sampler == "auto":
        sampler = "dual" if (params.i == params.d - 1
                             and params.bc is not Bc.FULL) else "es"
    if sampler == "dual":
        chain = DualHeatBathSampler(params, box, rng)
    elif sampler == "es":
        chain = EdwardsSokalSampler(params, box, rng)
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    trace = []
    codim1 = params.i == params.d - 1
    for sweep in range(burn_in + n_sweeps):
        chain.sweep()
        if sweep < burn_in:
            continue
        P = chain.config()
        row = {"sweep": sweep - burn_in, "n_plaquettes": P.n_occupied()}
        if codim1:
            row["dual_components"] = dualize(P).n_components()
            if gamma is not None:
                row["v_gamma"] = bool(v_gamma_dual_test(P, gamma, int(params.q))) \
                    if not params.rational else None
        elif gamma is not None:
            row["v_gamma"] = bool(alg.null_homology_test(P, gamma, params.q_int))
        trace.append(row)
    sizes = np.array([r["n_plaquettes"] for r in trace], dtype=float)
    diagnostics = {"tau_int_n_plaquettes": integrated_autocorrelation(sizes)}
    return chain.config(), trace, diagnostics
