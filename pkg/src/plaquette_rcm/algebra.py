"""Exact sparse integer linear algebra for cubical homology.

Everything is built on one integer Smith normal form with optional
row/column transforms.  A single SNF pass of a boundary matrix yields
homology orders over every Z_q (and over Q) at once, decides
null-homology solvability, and parametrizes uniform cocycle sampling.

The SNF runs on int64 with overflow monitoring and falls back to Python
integers (numpy object dtype) when entries grow past the guard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .lattice import (Box, Chain, Cochain, PercolationConfig, cell_index,
                      enumerate_cells, full_boundary_matrix, is_boundary_cell)

_OVERFLOW_GUARD = 1 << 59


@dataclass
class SparseIntMatrix:
    """Sparse integer matrix, a construction/interchange format."""

    rows: int
    cols: int
    entries: dict = field(default_factory=dict)

    @classmethod
    def from_dense(cls, arr) -> "SparseIntMatrix":
        arr = np.asarray(arr)
        out = cls(arr.shape[0], arr.shape[1])
        for r, c in zip(*np.nonzero(arr)):
            out.entries[(int(r), int(c))] = int(arr[r, c])
        return out

    def to_dense(self) -> np.ndarray:
        arr = np.zeros((self.rows, self.cols), dtype=np.int64)
        for (r, c), v in self.entries.items():
            arr[r, c] = v
        return arr


@dataclass
class SmithForm:
    """U @ A @ V == diag(diag), exactly over Z, with d_1 | d_2 | ..."""

    diag: tuple[int, ...]
    U: np.ndarray | None
    V: np.ndarray | None
    shape: tuple[int, int]

    @property
    def rank(self) -> int:
        return len(self.diag)

    def nontrivial_divisors(self) -> tuple[int, ...]:
        return tuple(d for d in self.diag if d > 1)


class _Overflow(Exception):
    pass


def _snf_inplace(A, U, V, guard: bool):
    """Diagonalize A by unimodular row/col ops, mirroring them into U/V.

    With guard=True (int64 fast path) operand magnitudes are checked before
    every elimination pass so products cannot wrap silently; _Overflow
    triggers a rerun with Python integers.
    """
    m, n = A.shape

    def precheck():
        if not guard:
            return
        ma = int(np.abs(A).max()) if A.size else 0
        if ma > 1 << 30:
            raise _Overflow
        for T in (U, V):
            if T is not None and T.size:
                mt = int(np.abs(T).max())
                if mt * (ma + 1) > 1 << 61:
                    raise _Overflow

    t = 0
    while t < min(m, n):
        sub = A[t:, t:]
        nz = np.nonzero(sub)
        if len(nz[0]) == 0:
            break
        vals = np.abs(sub[nz])
        # deterministic pivot: smallest magnitude, then lowest (row, col)
        best = None
        for r, c, v in zip(nz[0], nz[1], vals):
            key = (int(v), int(r), int(c))
            if best is None or key < best:
                best = key
        _, pr, pc = best
        pr, pc = pr + t, pc + t
        if pr != t:
            A[[t, pr]] = A[[pr, t]]
            if U is not None:
                U[[t, pr]] = U[[pr, t]]
        if pc != t:
            A[:, [t, pc]] = A[:, [pc, t]]
            if V is not None:
                V[:, [t, pc]] = V[:, [pc, t]]

        while True:
            # clear the pivot column
            restart = False
            col = A[t + 1:, t]
            while np.any(col != 0):
                precheck()
                piv = A[t, t]
                rows = t + 1 + np.nonzero(col)[0]
                for r in rows:
                    f = A[r, t] // piv
                    if f:
                        A[r, t:] -= f * A[t, t:]
                        if U is not None:
                            U[r] -= f * U[t]
                col = A[t + 1:, t]
                if np.any(col != 0):
                    # some remainder is smaller than the pivot: swap it up
                    r = t + 1 + int(np.nonzero(col)[0][0])
                    A[[t, r]] = A[[r, t]]
                    if U is not None:
                        U[[t, r]] = U[[r, t]]
            # clear the pivot row
            row = A[t, t + 1:]
            while np.any(row != 0):
                precheck()
                piv = A[t, t]
                cols = t + 1 + np.nonzero(row)[0]
                for c in cols:
                    f = A[t, c] // piv
                    if f:
                        A[:, c] -= f * A[:, t]
                        if V is not None:
                            V[:, c] -= f * V[:, t]
                row = A[t, t + 1:]
                if np.any(row != 0):
                    c = t + 1 + int(np.nonzero(row)[0][0])
                    A[:, [t, c]] = A[:, [c, t]]
                    if V is not None:
                        V[:, [t, c]] = V[:, [c, t]]
                    restart = True
                    break
            if restart:
                continue
            if np.any(A[t + 1:, t] != 0):
                continue
            break

        # divisibility fix-up: pivot must divide the remaining block
        piv = A[t, t]
        if piv and t + 1 < min(m, n):
            rem = A[t + 1:, t + 1:] % piv
            bad = np.nonzero(rem)
            if len(bad[0]):
                r = t + 1 + int(bad[0][0])
                A[t] += A[r]
                if U is not None:
                    U[t] += U[r]
                continue  # re-run elimination at the same t
        if A[t, t] < 0:
            A[t] = -A[t]
            if U is not None:
                U[t] = -U[t]
        t += 1


def smith_normal_form(A, need_U: bool = False, need_V: bool = False) -> SmithForm:
    """Exact integer Smith normal form with deterministic pivoting."""
    if isinstance(A, SparseIntMatrix):
        dense = A.to_dense()
    else:
        dense = np.array(A, copy=True)
    m, n = dense.shape

    def run(dtype, guard):
        if dtype is object:
            W = np.empty((m, n), dtype=object)
            for r in range(m):
                for c in range(n):
                    W[r, c] = int(dense[r, c])
        else:
            W = dense.astype(dtype, copy=True)
        U = np.eye(m, dtype=dtype) if need_U else None
        V = np.eye(n, dtype=dtype) if need_V else None
        _snf_inplace(W, U, V, guard)
        return W, U, V

    try:
        W, U, V = run(np.int64, guard=True)
    except _Overflow:
        W, U, V = run(object, guard=False)

    diag = []
    for t in range(min(m, n)):
        v = int(W[t, t])
        if v == 0:
            break
        diag.append(v)
    return SmithForm(tuple(diag), U, V, (m, n))


@dataclass
class HomologySummary:
    """Order and rank data for one homology degree from one SNF pass."""

    k: int
    q: int
    order_mod_q: int
    betti_rational: int
    torsion_elementary_divisors: tuple[int, ...]


def _order_from_snf(n_cells: int, snf_out: SmithForm, snf_in: SmithForm, q: int) -> int:
    """|H_k(Z_q)| from SNFs of the outgoing (d_k) and incoming (d_{k+1}) maps."""
    if q == 0:
        raise ValueError("use betti/torsion for Z coefficients")
    b = n_cells - snf_out.rank - snf_in.rank
    order = q ** b
    for dv in snf_out.nontrivial_divisors():
        order *= math.gcd(dv, q)
    for dv in snf_in.nontrivial_divisors():
        order *= math.gcd(dv, q)
    return order


def boundary_matrix(P: PercolationConfig, k: int, reduced: bool = True) -> SparseIntMatrix:
    """Boundary map of degree k for the complex of P (columns: its k-cells).

    For k < i the complex carries every k-cell of the box; for k = i the
    columns are the occupied cells, plus all boundary i-plaquettes under
    wired bc.  For k = 0 in reduced mode the matrix is the augmentation row.
    """
    if k < 0 or k > P.i:
        raise ValueError(f"k={k} outside the complex dimensions")
    full = full_boundary_matrix(P.box, k) if (k > 0 or not reduced) else \
        full_boundary_matrix(P.box, 0)
    if k == 0 and not reduced:
        return SparseIntMatrix(0, full.shape[1])
    if k == P.i:
        full = full[:, P.complex_mask()]
    return SparseIntMatrix.from_dense(full)


def _dense_boundary(P: PercolationConfig, k: int) -> np.ndarray:
    full = full_boundary_matrix(P.box, k)
    if k == P.i:
        return full[:, P.complex_mask()]
    return full


@lru_cache(maxsize=1 << 15)
def _snf_cached(key, matrix_bytes, shape, need_U, need_V):
    arr = np.frombuffer(matrix_bytes, dtype=np.int64).reshape(shape)
    return smith_normal_form(arr, need_U=need_U, need_V=need_V)


def _snf_of(P: PercolationConfig, k: int, need_U=False, need_V=False) -> SmithForm:
    mat = np.ascontiguousarray(_dense_boundary(P, k))
    key = (P.box, P.i, k, P.bc)
    return _snf_cached(key, mat.tobytes(), mat.shape, need_U, need_V)


def betti_rational(P: PercolationConfig, k: int) -> int:
    """b_k(P; Q), reduced."""
    if k < 0 or k > P.i:
        raise ValueError(f"k={k} outside the complex dimensions")
    n_k = _dense_boundary(P, k).shape[1]
    r_out = _snf_of(P, k).rank
    r_in = _snf_of(P, k + 1).rank if k < P.i else 0
    return n_k - r_out - r_in


def homology_order(P: PercolationConfig, k: int, q: int) -> int:
    """|H_k(P; Z_q)| (reduced); equals |H^k(P; Z_q)| for these complexes."""
    if q == 1:
        return 1
    if q == 0:
        summary = homology_summary(P, k, 2)
        if summary.betti_rational:
            raise ValueError("H_k is infinite over Z; query betti/torsion instead")
        order = 1
        for dv in summary.torsion_elementary_divisors:
            order *= dv
        return order
    snf_out = _snf_of(P, k)
    snf_in = _snf_of(P, k + 1) if k < P.i else SmithForm((), None, None, (0, 0))
    n_k = _dense_boundary(P, k).shape[1]
    return _order_from_snf(n_k, snf_out, snf_in, q)


def homology_summary(P: PercolationConfig, k: int, q: int) -> HomologySummary:
    snf_out = _snf_of(P, k)
    snf_in = _snf_of(P, k + 1) if k < P.i else SmithForm((), None, None, (0, 0))
    n_k = _dense_boundary(P, k).shape[1]
    betti = n_k - snf_out.rank - snf_in.rank
    torsion = snf_in.nontrivial_divisors()
    order = _order_from_snf(n_k, snf_out, snf_in, q) if q >= 2 else 1
    return HomologySummary(k, q, order, betti, torsion)


def _chain_vector(P: PercolationConfig, chain: Chain, k: int) -> np.ndarray:
    idx = cell_index(P.box, k)
    vec = np.zeros(len(idx), dtype=np.int64)
    for cell, coeff in chain.terms.items():
        if cell.dim != k:
            raise ValueError(f"chain has {cell.dim}-cells, expected {k}")
        if cell not in idx:
            raise ValueError(f"chain cell {cell} outside the box")
        vec[idx[cell]] = coeff
    return vec


def _solvable_from_snf(snf: SmithForm, rhs: np.ndarray, q: int) -> bool:
    """Is A x = rhs solvable mod q (q=0: over Z), given SNF with U?"""
    c = snf.U @ rhs.astype(snf.U.dtype)
    r = snf.rank
    for j in range(len(c)):
        cj = int(c[j])
        if j < r:
            dj = snf.diag[j]
            if q == 0:
                if cj % dj:
                    return False
            else:
                if cj % math.gcd(dj, q):
                    return False
        else:
            if q == 0:
                if cj:
                    return False
            else:
                if cj % q:
                    return False
    return True


def null_homology_test(P: PercolationConfig, gamma: Chain, q: int) -> bool:
    """Decide gamma in B_{i-1}(P; Z_q): the event V_gamma^fin on the box.

    q=0 decides the integer-coefficient event.  Wired bc adjoins the
    boundary plaquettes, giving the finite-volume proxy of V_gamma^inf.
    """
    if gamma.terms and not gamma.is_cycle():
        raise ValueError("gamma must be a cycle")
    if q == 1:
        return True
    vec = _chain_vector(P, gamma, P.i - 1)
    snf = _snf_of(P, P.i, need_U=True)
    return _solvable_from_snf(snf, vec, q)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for f in range(2, int(n ** 0.5) + 1):
        if n % f == 0:
            return False
    return True


def _gf_solvable(A: np.ndarray, b: np.ndarray, p: int) -> bool:
    """Solvability of A x = b over the prime field GF(p), by elimination."""
    M = np.concatenate([A % p, (b % p)[:, None]], axis=1).astype(np.int64)
    m, n = M.shape
    row = 0
    for col in range(n - 1):
        pivots = np.flatnonzero(M[row:, col]) + row
        if not len(pivots):
            continue
        piv = pivots[0]
        if piv != row:
            M[[row, piv]] = M[[piv, row]]
        inv = pow(int(M[row, col]), -1, p)
        M[row] = M[row] * inv % p
        mask = M[:, col] != 0
        mask[row] = False
        if mask.any():
            M[mask] = (M[mask] - np.outer(M[mask, col], M[row])) % p
        row += 1
        if row == m:
            break
    return not np.any(M[:, -1][np.all(M[:, :-1] == 0, axis=1)])


def relative_null_homology(P: PercolationConfig, gamma: Chain, t: Box, q: int = 0) -> bool:
    """The C_t solve: a chain tau on P's cells inside t with
    boundary(tau) = gamma + alpha, alpha supported on the boundary of t."""
    if q == 1:
        return True
    col_mask = P.complex_mask().copy()
    for j, cell in enumerate(P.cells):
        if col_mask[j] and not t.contains_box(Box(cell.anchor, cell.upper_anchor())):
            col_mask[j] = False
    rows = enumerate_cells(P.box, P.i - 1)
    row_keep = []
    idx = cell_index(P.box, P.i - 1)
    for cell in rows:
        inside = t.contains_box(Box(cell.anchor, cell.upper_anchor()))
        if inside and not is_boundary_cell(t, cell):
            row_keep.append(idx[cell])
    for cell in gamma.terms:
        if not t.contains_box(Box(cell.anchor, cell.upper_anchor())):
            raise ValueError("gamma must be supported inside t")
    row_keep = np.array(row_keep, dtype=int)
    mat = full_boundary_matrix(P.box, P.i)[np.ix_(row_keep, np.flatnonzero(col_mask))]
    rhs = _chain_vector(P, gamma, P.i - 1)[row_keep]
    if q >= 2 and _is_prime(q):
        return _gf_solvable(mat, rhs, q)
    snf = smith_normal_form(mat, need_U=True)
    return _solvable_from_snf(snf, rhs, q)


def solve_mod_q(A: np.ndarray, b: np.ndarray, q: int) -> np.ndarray | None:
    """One solution of A x = b (mod q), or None."""
    snf = smith_normal_form(A, need_U=True, need_V=True)
    c = (snf.U @ b.astype(snf.U.dtype))
    y = np.zeros(A.shape[1], dtype=object)
    r = snf.rank
    for j in range(len(c)):
        cj = int(c[j]) % q
        if j < r:
            dj = snf.diag[j]
            g = math.gcd(dj, q)
            if cj % g:
                return None
            # solve dj * y = cj (mod q)
            dd, cc, qq = dj // g, cj // g, q // g
            y[j] = (cc * pow(dd, -1, qq)) % qq if qq > 1 else 0
        else:
            if cj % q:
                return None
    x = (snf.V @ y) % q
    return np.array([int(v) % q for v in x], dtype=np.int64)


# ---------------------------------------------------------------------------
# cocycle machinery
# ---------------------------------------------------------------------------

def _constraint_matrix(P: PercolationConfig) -> np.ndarray:
    """Rows delta f(sigma) over the complex i-cells; f lives on (i-1)-cells."""
    return _dense_boundary(P, P.i).T


@lru_cache(maxsize=1 << 16)
def _diag_cached(matrix_bytes: bytes, shape) -> tuple:
    arr = np.frombuffer(matrix_bytes, dtype=np.int64).reshape(shape)
    return smith_normal_form(arr).diag


def elementary_divisors(A: np.ndarray) -> tuple:
    """Smith divisors, cached on the matrix bytes (shared across moduli)."""
    arr = np.ascontiguousarray(np.asarray(A, dtype=np.int64))
    return _diag_cached(arr.tobytes(), arr.shape)


def kernel_count_mod_q(A: np.ndarray, q: int) -> int:
    """|{x : A x = 0 mod q}| for an integer matrix acting on Z_q^n."""
    if q == 1:
        return 1
    diag = elementary_divisors(A)
    count = q ** (A.shape[1] - len(diag))
    for dv in diag:
        count *= math.gcd(dv, q)
    return count


def cocycle_count(P: PercolationConfig, q: int) -> int:
    """|Z^{i-1}(P; Z_q)|, the number of spin assignments flat on the complex."""
    return kernel_count_mod_q(_constraint_matrix(P), q)


class CocycleSampler:
    """Exact uniform sampler of ker(delta) over Z_q via SNF transforms.

    Solutions of S y = 0 (mod q) factor per diagonal entry, and x = V y is
    a bijection, so independent uniform cyclic factors give an exact
    uniform cocycle.
    """

    def __init__(self, A: np.ndarray, q: int):
        self.q = q
        snf = smith_normal_form(A, need_V=True)
        self.V = snf.V.astype(np.int64) if snf.V.dtype != object else snf.V
        self.n = A.shape[1]
        self.rank = snf.rank
        self.orders = []  # number of choices per pivot coordinate
        self.steps = []   # step size q/g per pivot coordinate
        for dv in snf.diag:
            g = math.gcd(dv, q)
            self.orders.append(g)
            self.steps.append(q // g)

    def count(self) -> int:
        total = self.q ** (self.n - self.rank)
        for g in self.orders:
            total *= g
        return total

    def sample(self, rng) -> np.ndarray:
        y = np.zeros(self.n, dtype=np.int64)
        for j in range(self.rank):
            if self.orders[j] > 1:
                y[j] = self.steps[j] * rng.integers(self.orders[j])
        if self.n > self.rank:
            y[self.rank:] = rng.integers(self.q, size=self.n - self.rank)
        return (self.V @ y) % self.q


_sampler_cache: dict = {}


def _cocycle_sampler(P: PercolationConfig, q: int) -> CocycleSampler:
    key = (P.box, P.i, P.bc, q, P.occupied_key())
    sampler = _sampler_cache.get(key)
    if sampler is None:
        sampler = CocycleSampler(_constraint_matrix(P), q)
        if len(_sampler_cache) > 1 << 16:
            _sampler_cache.clear()
        _sampler_cache[key] = sampler
    return sampler


def uniform_cocycle(P: PercolationConfig, q: int, rng) -> Cochain:
    """Uniform element of Z^{i-1}(P; Z_q)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if q == 1:
        return Cochain(P.box, P.i - 1, 1)
    sampler = _cocycle_sampler(P, q)
    return Cochain(P.box, P.i - 1, q, sampler.sample(rng))


def wilson_conditional(P: PercolationConfig, gamma: Chain, q: int) -> int:
    """E[W_gamma | P] under the uniform-cocycle conditional: 1 or 0.

    The average of the root-of-unity phases over the cocycle group is 1
    exactly when the gamma-functional vanishes on it, detected by comparing
    kernel counts with and without the gamma row.
    """
    if q == 1:
        return 1
    A = _constraint_matrix(P)
    gvec = _chain_vector(P, gamma, P.i - 1)
    stacked = np.vstack([A, gvec[None, :]])
    return 1 if kernel_count_mod_q(stacked, q) == kernel_count_mod_q(A, q) else 0


def wilson_phase_subgroup(P: PercolationConfig, gamma: Chain, q: int) -> int:
    """Order of the subgroup {f(gamma) : f cocycle of P} of Z_q."""
    A = _constraint_matrix(P)
    gvec = _chain_vector(P, gamma, P.i - 1)
    stacked = np.vstack([A, gvec[None, :]])
    return kernel_count_mod_q(A, q) // kernel_count_mod_q(stacked, q)
