"""Sweep orchestration: V_gamma estimators, surface tension, decay fits,
tube-event rates, and suitable box families.

Monte Carlo estimates carry Wilson-score intervals; every run derives its
randomness from a master seed plus a labeled stream split so sweeps are
exactly reproducible.  The Bernoulli (q = 1) estimator avoids Markov
chains entirely and decides V_gamma through a component-quotient potential
check equivalent to the fundamental-cycle linking criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import algebra as alg
from . import prcm as prcm_mod
from .duality import c_t_event, d_t_event, dual_geometry
from .lattice import (Bc, Box, Chain, PercolationConfig, boundary_cell_mask,
                      enumerate_cells)


rng_for = prcm_mod.rng_for


def wilson_score(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson-score confidence interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


# ---------------------------------------------------------------------------
# fast V_gamma evaluation on raw plaquette bit arrays
# ---------------------------------------------------------------------------

class VGammaEvaluator:
    """Shared geometry for repeated V_gamma decisions on one (box, gamma).

    V_gamma holds iff every cycle of Q' has linking number 0 mod q with
    gamma.  Removing the occupied surface-piercing dual edges and
    contracting components, the criterion becomes the existence of a
    potential on the component quotient with the piercing signs as edge
    increments, checked per sample in near-linear time.
    """

    def __init__(self, box: Box, gamma: Chain, bc: Bc = Bc.FREE):
        from .duality import surface_box_of

        self.box, self.bc = box, bc
        self.surface = surface_box_of(gamma)
        d = box.d
        geom = dual_geometry(box)
        self.geom = geom
        n_plq = len(enumerate_cells(box, d - 1))
        bmask = boundary_cell_mask(box, d - 1)
        has_plq = geom.edge_plq >= 0
        # static activity: outer edges always in Q'; boundary plaquettes are
        # vacant under free bc and occupied under wired
        always = ~has_plq
        if bc is Bc.FREE:
            always = always | (has_plq & bmask[np.clip(geom.edge_plq, 0, None)])
        self.static_active = always
        self.varying = has_plq & ~always
        normal = self.surface.degenerate_axes()[0]
        level = self.surface.lo[normal]
        surf_cells = set(enumerate_cells(self.surface, d - 1))
        cells = enumerate_cells(box, d - 1)
        pierce = np.zeros(len(geom.edge_u), dtype=np.int64)
        for e in np.flatnonzero(has_plq & (geom.edge_axis == normal)):
            if cells[geom.edge_plq[e]] in surf_cells:
                pierce[e] = 1  # edges are oriented in +axis direction
        self.pierce = pierce
        self.crossing = pierce != 0
        self.n_verts = len(geom.verts)
        self.state_idx = np.flatnonzero(
            PercolationConfig.empty(box, d - 1, bc).state_mask())

    def _active_edges(self, complex_bits: np.ndarray) -> np.ndarray:
        active = self.static_active.copy()
        v = self.varying
        active[v] = ~complex_bits[self.geom.edge_plq[v]]
        return active

    def decide_from_complex(self, complex_bits: np.ndarray, q: int) -> bool:
        """complex_bits: occupancy over all (d-1)-cells (homology complex)."""
        if q == 1:
            return True
        active = self._active_edges(complex_bits)
        quiet = active & ~self.crossing
        rows = self.geom.edge_u[quiet]
        cols = self.geom.edge_v[quiet]
        n = self.n_verts
        graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)),
                           shape=(n, n))
        ncomp, labels = connected_components(graph, directed=False)
        pot: dict[int, int] = {}
        adj: dict[int, list] = {}
        cross = np.flatnonzero(active & self.crossing)
        for e in cross:
            cu = int(labels[self.geom.edge_u[e]])
            cv = int(labels[self.geom.edge_v[e]])
            s = int(self.pierce[e])
            adj.setdefault(cu, []).append((cv, s))
            adj.setdefault(cv, []).append((cu, -s))
        for root in adj:
            if root in pot:
                continue
            pot[root] = 0
            stack = [root]
            while stack:
                u = stack.pop()
                for v, s in adj[u]:
                    w = pot[u] + s
                    if v in pot:
                        diff = pot[v] - w
                        if (q == 0 and diff != 0) or (q > 0 and diff % q):
                            return False
                    else:
                        pot[v] = w
                        stack.append(v)
        return True

    def decide(self, P: PercolationConfig, q: int) -> bool:
        return self.decide_from_complex(P.complex_mask(), q)

    def bernoulli_sample(self, p: float, rng, q: int) -> bool:
        """One independent Bernoulli(p) plaquette draw, decided in place."""
        bits = np.zeros(len(enumerate_cells(self.box, self.box.d - 1)), dtype=bool)
        bits[self.state_idx] = rng.random(len(self.state_idx)) < p
        if self.bc is Bc.WIRED:
            bits |= boundary_cell_mask(self.box, self.box.d - 1)
        return self.decide_from_complex(bits, q)


def estimate_v_gamma(params: prcm_mod.PrcmParams, box: Box, gamma: Chain,
                     n: int, seed, group_q: int | None = None,
                     burn_in: int | None = None,
                     sampler: str = "auto") -> dict:
    """Monte Carlo frequency of V_gamma with a Wilson-score interval.

    group_q selects the homology coefficient group (default: params.q as a
    group, 0 meaning Z); at q = 1 the measure is Bernoulli and samples are
    independent, otherwise a chain is run with the given burn-in.
    """
    gq = 0 if group_q is None and params.q == 1 else \
        (int(params.q) if group_q is None else group_q)
    rng = rng_for(seed, "v_gamma", box, params.p, params.q, params.bc.value)
    evaluator = VGammaEvaluator(box, gamma, params.bc)
    hits = 0
    if params.q == 1:
        for _ in range(n):
            hits += evaluator.bernoulli_sample(params.p, rng, gq)
    else:
        if burn_in is None:
            burn_in = max(50, n // 10)
        if sampler == "auto":
            sampler = "dual"
        chain = (prcm_mod.DualHeatBathSampler(params, box, rng)
                 if sampler == "dual"
                 else prcm_mod.EdwardsSokalSampler(params, box, rng))
        for _ in range(burn_in):
            chain.sweep()
        for _ in range(n):
            chain.sweep()
            hits += evaluator.decide(chain.config(), gq)
    lo, hi = wilson_score(hits, n)
    return {"p_hat": hits / n if n else 0.0, "ci_lo": lo, "ci_hi": hi,
            "n": n, "successes": hits}


# ---------------------------------------------------------------------------
# surface tension
# ---------------------------------------------------------------------------

def _crossing_in_bonds(occupied, geom_pack, axis: int) -> bool:
    verts, edges_u, edges_v, coords = geom_pack
    top = coords[:, axis].max()
    bottom = coords[:, axis].min()
    parent = list(range(len(verts)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k in np.flatnonzero(occupied):
        ra, rb = find(int(edges_u[k])), find(int(edges_v[k]))
        if ra != rb:
            parent[ra] = rb
    tops = {find(i) for i in np.flatnonzero(coords[:, axis] == top)}
    bots = {find(i) for i in np.flatnonzero(coords[:, axis] == bottom)}
    return bool(tops & bots)


def surface_tension_estimate(pstar: float, q: float, N: int, n: int, seed,
                             d: int = 3, burn_in: int | None = None) -> dict:
    """Plug-in estimator of the surface tension of the classical RCM.

    Runs the wired random-cluster model on the box graph [-N, N]^d at
    parameter pstar and returns -log(crossing probability) / (2N)^{d-1},
    with the crossing probability and normalization reported alongside.
    An unobserved crossing switches to upper-bound mode via the Wilson CI.
    """
    if not (0 <= pstar <= 1):
        raise ValueError("pstar must lie in [0, 1]")
    rng = rng_for(seed, "tension", pstar, q, N, d)
    # the wired classical RCM on the shrunk dual box of a primal box is the
    # dual of the free PRCM at p with p*(p) = pstar
    primal_box = Box.lattice((0,) * d, (2 * N + 1,) * d)
    p_primal = float(prcm_mod.p_star(pstar, q)) if 0 < pstar < 1 else \
        (0.0 if pstar == 1 else 1.0)
    geom = dual_geometry(primal_box)
    inner_ids = np.flatnonzero(geom.inner_vert)
    local = {int(g): j for j, g in enumerate(inner_ids)}
    se = np.flatnonzero(geom.shrunk_edge)
    eu = np.array([local[int(geom.edge_u[e])] for e in se])
    ev = np.array([local[int(geom.edge_v[e])] for e in se])
    coords = np.array([geom.verts[g] for g in inner_ids])
    pack = (inner_ids, eu, ev, coords)
    norm = (2 * N) ** (d - 1)
    hits = 0
    if q == 1 or pstar in (0.0, 1.0):
        for _ in range(n):
            occ = rng.random(len(se)) < pstar
            hits += _crossing_in_bonds(occ, pack, d - 1)
    else:
        params = prcm_mod.PrcmParams(p=p_primal, q=q, i=d - 1, d=d, bc=Bc.FREE,
                                     rational=(q != int(q)))
        chain = prcm_mod.DualHeatBathSampler(params, primal_box, rng)
        if burn_in is None:
            burn_in = max(50, n // 10)
        for _ in range(burn_in):
            chain.sweep()
        for _ in range(n):
            chain.sweep()
            hits += _crossing_in_bonds(chain.occupied, pack, d - 1)
    lo, hi = wilson_score(hits, n)
    out = {"p_cross": hits / n, "ci_lo": lo, "ci_hi": hi, "n": n,
           "normalization": norm, "N": N}
    if hits == 0:
        out["tau_hat"] = math.inf
        out["tau_lower_bound"] = -math.log(hi) / norm
        out["upper_bound_mode"] = True
    else:
        out["tau_hat"] = -math.log(hits / n) / norm + 0.0
        out["tau_lower_bound"] = -math.log(hi) / norm
        out["upper_bound_mode"] = False
    return out


# ---------------------------------------------------------------------------
# decay-law fits
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    """Through-origin least squares of -log p_hat against Area and Per."""

    decay_constant: float
    law: str                      # "Area" or "Perimeter"
    stderr: float
    area_slope: float
    area_stderr: float
    area_residual: float
    per_slope: float
    per_stderr: float
    per_residual: float
    points: list = field(default_factory=list)


def _origin_fit(x: np.ndarray, y: np.ndarray):
    sxx = float(x @ x)
    slope = float(x @ y) / sxx
    resid = y - slope * x
    dof = max(len(x) - 1, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    scale = math.sqrt(float(y @ y)) or 1.0
    return slope, stderr, math.sqrt(float(resid @ resid)) / scale


def fit_decay(points) -> FitResult:
    """points: iterables (area, perimeter, p_hat); requires >= 3 sizes."""
    pts = [(float(a), float(b), float(p)) for a, b, p in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 sizes to fit")
    if any(p <= 0 for _, _, p in pts):
        raise ValueError("p_hat must be positive for a log fit")
    area = np.array([a for a, _, _ in pts])
    per = np.array([b for _, b, _ in pts])
    y = -np.log(np.array([p for _, _, p in pts]))
    a_slope, a_err, a_res = _origin_fit(area, y)
    p_slope, p_err, p_res = _origin_fit(per, y)
    if a_res <= p_res:
        law, c, err = "Area", a_slope, a_err
    else:
        law, c, err = "Perimeter", p_slope, p_err
    return FitResult(c, law, err, a_slope, a_err, a_res, p_slope, p_err, p_res,
                     points=pts)


# ---------------------------------------------------------------------------
# tube events
# ---------------------------------------------------------------------------

def tube_event_rate(params: prcm_mod.PrcmParams, s: Box, L: int, n: int, seed,
                    margin: int = 1, burn_in: int | None = None,
                    group_q: int = 0) -> dict:
    """Monte Carlo frequencies of C_t, D_t and their conjunction for the
    tube around a (d-2)-box s, with the -log rate / |s| trend value."""
    normals = s.degenerate_axes()
    if len(normals) != 2:
        raise ValueError("s must be a (d-2)-dimensional box")
    lo = [l - 2 * (L + margin) if j in normals else l - 2 * margin
          for j, (l, _) in enumerate(zip(s.lo, s.hi))]
    hi = [h + 2 * (L + margin) if j in normals else h + 2 * margin
          for j, (_, h) in enumerate(zip(s.lo, s.hi))]
    box = Box(tuple(lo), tuple(hi))
    rng = rng_for(seed, "tube", s, L, params.p, params.q)
    counts = {"c_t": 0, "d_t": 0, "cbar_t": 0}
    size = len(enumerate_cells(s, s.box_dim()))

    def tally(P):
        c = c_t_event(P, s, L, group_q)
        d = d_t_event(P, s, L)
        counts["c_t"] += c
        counts["d_t"] += d
        counts["cbar_t"] += c and d

    if params.q == 1:
        for _ in range(n):
            P = PercolationConfig.random(box, params.i, params.p, rng, params.bc)
            tally(P)
    else:
        chain = prcm_mod.DualHeatBathSampler(params, box, rng)
        if burn_in is None:
            burn_in = max(50, n // 10)
        for _ in range(burn_in):
            chain.sweep()
        for _ in range(n):
            chain.sweep()
            tally(chain.config())
    out = {}
    for key, k in counts.items():
        lo_, hi_ = wilson_score(k, n)
        rate = k / n
        out[key] = {"rate": rate, "ci_lo": lo_, "ci_hi": hi_,
                    "neg_log_rate_per_cell": (-math.log(rate) / size
                                              if rate > 0 else math.inf)}
    out["s_cells"] = size
    out["n"] = n
    return out


# ---------------------------------------------------------------------------
# suitable families
# ---------------------------------------------------------------------------

@dataclass
class SuitableFamily:
    """(d-1)-boxes whose minimum dimension outgrows log of the maximum."""

    boxes: list

    def min_dims(self):
        return [min(m for m in b.dims() if m > 0) for b in self.boxes]

    def max_dims(self):
        return [max(b.dims()) for b in self.boxes]

    def ratios(self):
        return [m / math.log(M) if M > 1 else math.inf
                for m, M in zip(self.min_dims(), self.max_dims())]

    def check_invariant(self) -> bool:
        r = [x for x in self.ratios() if x is not math.inf]
        if len(r) < 2:
            return True
        # diverging prefix: no decrease beyond noise and strict overall growth
        return r[-1] > r[0] and all(b >= a * 0.99 for a, b in zip(r, r[1:]))


def make_suitable_family(l_max: int, d: int = 3) -> SuitableFamily:
    """m(r_l) = l, M(r_l) = max(l, 2^floor(sqrt(l))): m / log M diverges."""
    if l_max < 3:
        raise ValueError("need l_max >= 3")
    boxes = []
    for l in range(3, l_max + 1):
        m = l
        M = max(l, 2 ** math.isqrt(l))
        dims = [m] * (d - 2) + [M] + [0]
        boxes.append(Box.lattice((0,) * d, tuple(dims)))
    fam = SuitableFamily(boxes)
    if not fam.check_invariant():
        raise AssertionError("generated family violates the suitability invariant")
    return fam
