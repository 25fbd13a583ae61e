"""Cubical complex of Z^d and its half-integer dual.

Cells are stored with *doubled* integer coordinates so that dual cells,
which live at half-integers, are exact: a primal cell has an all-even
anchor, a dual cell an all-odd anchor.  A k-cell is the product of k unit
intervals (the "extended" axes) and d-k points; its anchor is the minimal
corner.  Boxes are also kept in doubled coordinates, with ``Box.lattice``
as the integer-coordinate constructor.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np


class Bc(Enum):
    """Boundary handling for percolation subcomplexes of a box.

    FREE excludes the box-boundary i-plaquettes from the state space,
    WIRED excludes them too but adjoins all of them when homology is
    computed, FULL keeps every i-plaquette of the box as a state variable
    (the plain finite-complex setting).
    """

    FREE = "free"
    WIRED = "wired"
    FULL = "full"


@dataclass(frozen=True)
class CellId:
    """A k-plaquette of Z^d or of the dual lattice, canonically oriented.

    ``anchor`` is the minimal corner in doubled coordinates and
    ``directions`` the sorted tuple of extended axes (0-based).  Primal
    cells have even anchors, dual cells odd anchors; the two parities
    never mix inside one complex.
    """

    anchor: tuple[int, ...]
    directions: tuple[int, ...]

    def __post_init__(self):
        if tuple(sorted(set(self.directions))) != self.directions:
            raise ValueError(f"directions must be sorted and distinct: {self.directions}")
        if any(j < 0 or j >= len(self.anchor) for j in self.directions):
            raise ValueError(f"direction out of range for d={len(self.anchor)}")
        parities = {a & 1 for a in self.anchor}
        if len(parities) > 1:
            raise ValueError(f"mixed anchor parity: {self.anchor}")

    @property
    def dim(self) -> int:
        return len(self.directions)

    @property
    def ambient_dim(self) -> int:
        return len(self.anchor)

    @property
    def is_dual(self) -> bool:
        return bool(self.anchor) and (self.anchor[0] & 1 == 1)

    def center(self) -> tuple[int, ...]:
        """Center point in doubled coordinates."""
        return tuple(a + 1 if j in self.directions else a
                     for j, a in enumerate(self.anchor))

    def upper_anchor(self) -> tuple[int, ...]:
        return tuple(a + 2 if j in self.directions else a
                     for j, a in enumerate(self.anchor))

    def __repr__(self):
        return f"CellId({self.anchor}, dirs={self.directions})"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, corners in doubled coordinates (inclusive)."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("corner dimension mismatch")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"lo must be <= hi componentwise: {self.lo} {self.hi}")
        if any((l ^ h) & 1 for l, h in zip(self.lo, self.hi)):
            raise ValueError("corners of one box must share parity per axis")

    @classmethod
    def lattice(cls, lows, highs) -> "Box":
        """Box with integer corner points (primal coordinates)."""
        return cls(tuple(2 * int(x) for x in lows), tuple(2 * int(x) for x in highs))

    @property
    def d(self) -> int:
        return len(self.lo)

    def dims(self) -> tuple[int, ...]:
        """Per-axis extents M_j (number of unit steps)."""
        return tuple((h - l) // 2 for l, h in zip(self.lo, self.hi))

    def degenerate_axes(self) -> tuple[int, ...]:
        return tuple(j for j, (l, h) in enumerate(zip(self.lo, self.hi)) if l == h)

    def box_dim(self) -> int:
        return self.d - len(self.degenerate_axes())

    def expand(self, amount: int) -> "Box":
        """Grow by `amount` lattice units on every side (r^L); negative shrinks."""
        a = 2 * amount
        return Box(tuple(l - a for l in self.lo), tuple(h + a for h in self.hi))

    def half_expand(self) -> "Box":
        """The dual region r^{+1/2}."""
        return Box(tuple(l - 1 for l in self.lo), tuple(h + 1 for h in self.hi))

    def half_shrink(self) -> "Box":
        """The dual region r^{-1/2}."""
        return Box(tuple(l + 1 for l in self.lo), tuple(h - 1 for h in self.hi))

    def contains_cell(self, cell: CellId) -> bool:
        return all(self.lo[j] <= a and u <= self.hi[j]
                   for j, (a, u) in enumerate(zip(cell.anchor, cell.upper_anchor())))

    def contains_box(self, other: "Box") -> bool:
        return all(self.lo[j] <= other.lo[j] and other.hi[j] <= self.hi[j]
                   for j in range(self.d))

    def __repr__(self):
        span = "x".join(f"[{l / 2:g},{h / 2:g}]" for l, h in zip(self.lo, self.hi))
        return f"Box({span})"


def _axis_subsets(d: int, k: int):
    """All sorted k-tuples of axes, lexicographic."""
    import itertools

    return list(itertools.combinations(range(d), k))


@lru_cache(maxsize=None)
def enumerate_cells(box: Box, k: int, dual: bool = False) -> tuple[CellId, ...]:
    """All k-cells contained in `box`, in canonical (anchor, directions) order.

    With ``dual=True`` the cells of the half-shifted grid strictly inside
    the box are enumerated; for an integer box r these are exactly the
    cells of the dual region r^{-1/2}.
    """
    d = box.d
    if k < 0 or k > d:
        raise ValueError(f"cell dimension k={k} out of range for d={d}")
    cells = []
    for dirs in _axis_subsets(d, k):
        ranges = []
        for j in range(d):
            lo, hi = box.lo[j], box.hi[j]
            if dual:
                lo, hi = lo + 1, hi - 1
            if j in dirs:
                hi -= 2
            if lo > hi:
                ranges = None
                break
            ranges.append(range(lo, hi + 1, 2))
        if ranges is None:
            continue
        import itertools

        for anchor in itertools.product(*ranges):
            cells.append(CellId(anchor, dirs))
    cells.sort(key=lambda c: (c.anchor, c.directions))
    return tuple(cells)


@lru_cache(maxsize=None)
def cell_index(box: Box, k: int, dual: bool = False) -> dict:
    """Canonical cell -> position map for `enumerate_cells` order."""
    return {c: i for i, c in enumerate(enumerate_cells(box, k, dual))}


def is_boundary_cell(box: Box, cell: CellId) -> bool:
    """True if the cell lies flat against a face of the box."""
    up = cell.upper_anchor()
    for j in range(box.d):
        if j in cell.directions:
            continue
        if cell.anchor[j] == box.lo[j] or up[j] == box.hi[j]:
            return True
    return False


@lru_cache(maxsize=None)
def boundary_cell_mask(box: Box, k: int) -> np.ndarray:
    cells = enumerate_cells(box, k)
    return np.array([is_boundary_cell(box, c) for c in cells], dtype=bool)


class Chain:
    """Sparse Z_q-linear combination of same-dimension cells (q=0 means Z)."""

    __slots__ = ("terms", "q")

    def __init__(self, terms=None, q: int = 0):
        if q < 0:
            raise ValueError("modulus must be >= 0")
        self.q = q
        self.terms: dict[CellId, int] = {}
        if terms:
            for cell, coeff in (terms.items() if isinstance(terms, dict) else terms):
                self._add(cell, coeff)

    def _add(self, cell: CellId, coeff: int):
        if self.q:
            coeff %= self.q
        cur = self.terms.get(cell, 0) + coeff
        if self.q:
            cur %= self.q
        if cur:
            self.terms[cell] = cur
            if len(self.terms) > 1:
                dim0 = next(iter(self.terms)).dim
                if cell.dim != dim0:
                    raise ValueError("mixed cell dimensions in one chain")
        else:
            self.terms.pop(cell, None)

    @classmethod
    def from_cells(cls, cells, q: int = 0) -> "Chain":
        return cls({c: 1 for c in cells}, q=q)

    @property
    def dim(self):
        return next(iter(self.terms)).dim if self.terms else None

    def support(self):
        return set(self.terms)

    def __add__(self, other: "Chain") -> "Chain":
        if other.q != self.q:
            raise ValueError("modulus mismatch")
        out = Chain(self.terms, q=self.q)
        for c, a in other.terms.items():
            out._add(c, a)
        return out

    def __neg__(self) -> "Chain":
        return self.scale(-1)

    def __sub__(self, other: "Chain") -> "Chain":
        return self + (-other)

    def scale(self, a: int) -> "Chain":
        return Chain({c: a * v for c, v in self.terms.items()}, q=self.q)

    def reduce_mod(self, q: int) -> "Chain":
        return Chain(self.terms, q=q)

    def boundary(self) -> "Chain":
        out = Chain(q=self.q)
        for cell, coeff in self.terms.items():
            for face, sign in boundary_faces(cell):
                out._add(face, sign * coeff)
        return out

    def is_cycle(self) -> bool:
        return not self.boundary().terms

    def __eq__(self, other):
        return isinstance(other, Chain) and self.q == other.q and self.terms == other.terms

    def __repr__(self):
        return f"Chain(q={self.q}, {len(self.terms)} cells)"


@lru_cache(maxsize=None)
def boundary_faces(cell: CellId) -> tuple[tuple[CellId, int], ...]:
    """Signed codimension-1 faces of a cell.

    The l-th extended axis contributes sign (-1)^(l-1) on the upper face
    and the opposite sign on the lower face (l counted from 1).
    """
    faces = []
    for l, axis in enumerate(cell.directions):
        sign = 1 if l % 2 == 0 else -1
        rest = tuple(a for a in cell.directions if a != axis)
        upper = list(cell.anchor)
        upper[axis] += 2
        faces.append((CellId(tuple(upper), rest), sign))
        faces.append((CellId(cell.anchor, rest), -sign))
    return tuple(faces)


def boundary_of_cell(cell: CellId, q: int = 0) -> Chain:
    """The boundary chain of a single cell."""
    if cell.dim < 1:
        raise ValueError("0-cells have no boundary chain; use the augmentation")
    return Chain(dict(boundary_faces(cell)), q=q)


def boundary(chain: Chain) -> Chain:
    return chain.boundary()


def dualize_cell(cell: CellId) -> CellId:
    """The (d-k)-cell of the shifted lattice through the same center point."""
    d = cell.ambient_dim
    co_dirs = tuple(j for j in range(d) if j not in cell.directions)
    center = cell.center()
    anchor = tuple(c - 1 if j in co_dirs else c for j, c in enumerate(center))
    return CellId(anchor, co_dirs)


def loop_boundary_chain(r: Box, q: int = 0) -> Chain:
    """gamma = boundary(rho_r) for a lower-dimensional box r.

    rho_r is the sum of the positively oriented top-cells of r, so the
    orientation of gamma is the one induced by the cubical boundary
    formula applied to that sum.
    """
    if not r.degenerate_axes():
        raise ValueError("r must be a lower-dimensional box")
    i = r.box_dim()
    rho = Chain.from_cells(enumerate_cells(r, i), q=q)
    if not rho.terms:
        raise ValueError("box has no top-dimensional cells")
    return rho.boundary()


def box_chain(r: Box, q: int = 0) -> Chain:
    """rho_r: the sum of the top-dimensional cells of a box region."""
    return Chain.from_cells(enumerate_cells(r, r.box_dim()), q=q)


def area(r: Box) -> int:
    """Number of top-cells of a lower-dimensional box (paper's Area)."""
    return len(enumerate_cells(r, r.box_dim()))


def perimeter(r: Box) -> int:
    """Number of cells in the boundary chain of a lower-dimensional box."""
    return len(loop_boundary_chain(r).terms)


class Cochain:
    """Z_q-valued assignment to all k-cells of a box (a total map)."""

    __slots__ = ("box", "k", "q", "values")

    def __init__(self, box: Box, k: int, q: int, values=None):
        if q < 1:
            raise ValueError("cochains need a modulus q >= 1")
        self.box, self.k, self.q = box, k, q
        n = len(enumerate_cells(box, k))
        if values is None:
            self.values = np.zeros(n, dtype=np.int64)
        else:
            self.values = np.asarray(values, dtype=np.int64) % q
            if self.values.shape != (n,):
                raise ValueError(f"expected {n} values for the {k}-cells of {box}")

    def copy(self) -> "Cochain":
        return Cochain(self.box, self.k, self.q, self.values.copy())

    def __getitem__(self, cell: CellId) -> int:
        return int(self.values[cell_index(self.box, self.k)[cell]])

    def __setitem__(self, cell: CellId, v: int):
        self.values[cell_index(self.box, self.k)[cell]] = v % self.q

    def evaluate(self, chain: Chain) -> int:
        """Pairing <f, c> in Z_q."""
        idx = cell_index(self.box, self.k)
        total = 0
        for cell, coeff in chain.terms.items():
            total += coeff * int(self.values[idx[cell]])
        return total % self.q

    def coboundary(self) -> "Cochain":
        """delta f on the (k+1)-cells of the box: (delta f)(s) = f(boundary s)."""
        mat = coboundary_matrix(self.box, self.k)
        return Cochain(self.box, self.k + 1, self.q, (mat @ self.values) % self.q)

    def __add__(self, other: "Cochain") -> "Cochain":
        if (self.box, self.k, self.q) != (other.box, other.k, other.q):
            raise ValueError("cochain domain mismatch")
        return Cochain(self.box, self.k, self.q, (self.values + other.values) % self.q)

    def __sub__(self, other: "Cochain") -> "Cochain":
        return self + other.scale(-1)

    def scale(self, a: int) -> "Cochain":
        return Cochain(self.box, self.k, self.q, (a * self.values) % self.q)

    def __eq__(self, other):
        return (isinstance(other, Cochain)
                and (self.box, self.k, self.q) == (other.box, other.k, other.q)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"Cochain(k={self.k}, q={self.q}, box={self.box})"


def coboundary(f: Cochain) -> Cochain:
    return f.coboundary()


@lru_cache(maxsize=None)
def full_boundary_matrix(box: Box, k: int) -> np.ndarray:
    """Integer matrix of the boundary map C_k -> C_{k-1} on the full box skeleton.

    Rows follow the (k-1)-cell enumeration, columns the k-cell enumeration.
    For k=0 this is the augmentation row (every vertex maps to 1), which
    realizes reduced (co)homology.
    """
    cells = enumerate_cells(box, k)
    if k == 0:
        return np.ones((1, len(cells)), dtype=np.int64)
    rows = cell_index(box, k - 1)
    mat = np.zeros((len(rows), len(cells)), dtype=np.int64)
    for c, cell in enumerate(cells):
        for face, sign in boundary_faces(cell):
            mat[rows[face], c] = sign
    return mat


@lru_cache(maxsize=None)
def coboundary_matrix(box: Box, k: int) -> np.ndarray:
    """Matrix of delta: C^k -> C^{k+1} on the box; the transpose of the boundary."""
    return full_boundary_matrix(box, k + 1).T.copy()


class PercolationConfig:
    """Occupancy of the i-plaquettes of a box plus a boundary-condition tag.

    The complex always contains the full (i-1)-skeleton of the box.  Under
    FREE bc the boundary i-plaquettes are never occupied; under WIRED they
    are not state variables either but are adjoined to every homology
    computation; under FULL they are ordinary state variables.
    """

    __slots__ = ("box", "i", "occupied", "bc")

    def __init__(self, box: Box, i: int, occupied, bc: Bc = Bc.FREE):
        self.box, self.i, self.bc = box, i, bc
        n = len(enumerate_cells(box, i))
        self.occupied = np.asarray(occupied, dtype=bool)
        if self.occupied.shape != (n,):
            raise ValueError(f"bitset length {self.occupied.shape} != i-cell count {n}")
        if bc in (Bc.FREE, Bc.WIRED):
            bad = self.occupied & boundary_cell_mask(box, i)
            if bad.any():
                raise ValueError(f"{bc.value} bc forbids occupied boundary plaquettes")

    @classmethod
    def empty(cls, box: Box, i: int, bc: Bc = Bc.FREE) -> "PercolationConfig":
        return cls(box, i, np.zeros(len(enumerate_cells(box, i)), dtype=bool), bc)

    @classmethod
    def full(cls, box: Box, i: int, bc: Bc = Bc.FREE) -> "PercolationConfig":
        out = cls.empty(box, i, bc)
        out.occupied = out.state_mask().copy()
        return out

    @classmethod
    def random(cls, box: Box, i: int, p: float, rng, bc: Bc = Bc.FREE) -> "PercolationConfig":
        out = cls.empty(box, i, bc)
        mask = out.state_mask()
        bits = rng.random(mask.sum()) < p
        occ = np.zeros_like(mask)
        occ[np.flatnonzero(mask)] = bits
        out.occupied = occ
        return out

    @property
    def cells(self) -> tuple[CellId, ...]:
        return enumerate_cells(self.box, self.i)

    def n_cells(self) -> int:
        return len(self.cells)

    def state_mask(self) -> np.ndarray:
        """Which i-cells are state variables."""
        if self.bc is Bc.FULL:
            return np.ones(self.n_cells(), dtype=bool)
        return ~boundary_cell_mask(self.box, self.i)

    def complex_mask(self) -> np.ndarray:
        """Which i-cells belong to the complex used for homology."""
        if self.bc is Bc.WIRED:
            return self.occupied | boundary_cell_mask(self.box, self.i)
        return self.occupied.copy()

    def n_occupied(self) -> int:
        return int(self.occupied.sum())

    def n_state_cells(self) -> int:
        return int(self.state_mask().sum())

    def with_occupied(self, occupied) -> "PercolationConfig":
        return PercolationConfig(self.box, self.i, occupied, self.bc)

    def occupied_key(self) -> bytes:
        return np.packbits(self.occupied).tobytes()

    def __repr__(self):
        return (f"PercolationConfig(box={self.box}, i={self.i}, bc={self.bc.value}, "
                f"|P|={self.n_occupied()}/{self.n_cells()})")
