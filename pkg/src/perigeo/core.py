"""Periodic point sets: unit cells, motifs, neighbor enumeration and radii.

Conventions used throughout the package:

* basis vectors are the *rows* of an (n, n) matrix, so a Cartesian point is
  ``frac @ basis`` for fractional coordinates ``frac``;
* motif points carry fractional coordinates in the half-open box [0, 1)^n,
  which avoids any weighted counting of points on cell boundaries;
* all functions are pure and never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.spatial import Voronoi, cKDTree

# determinant cutoff (relative to b^n) below which a cell is rejected
TOL_DEGENERATE = 1e-12
# relative tolerance for distance comparisons and deduplication
REL_TOL = 1e-9


class DataError(ValueError):
    """Invalid periodic-set data (degenerate cell, bad fractions, ...)."""


@dataclass(frozen=True)
class UnitCell:
    """Parallelepiped spanned by n basis row-vectors, n in {1, 2, 3}."""

    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise DataError("basis must be a square matrix of row vectors")
        n = basis.shape[0]
        if n not in (1, 2, 3):
            raise DataError(f"dimension {n} not supported (only n = 1, 2, 3)")
        b = float(np.linalg.norm(basis, axis=1).max())
        det = float(np.linalg.det(basis))
        if abs(det) <= TOL_DEGENERATE * b ** n:
            raise DataError("degenerate cell: |det(basis)| is numerically zero")
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.basis)))

    @property
    def longest_edge(self) -> float:
        """Length b of the longest basis vector."""
        return float(np.linalg.norm(self.basis, axis=1).max())

    @property
    def diameter(self) -> float:
        """Length d of the longest cell diagonal sum(+-v_i), leading sign +."""
        n = self.dim
        best = 0.0
        for signs in product((1.0, -1.0), repeat=n - 1):
            diag = self.basis[0] + sum(
                s * v for s, v in zip(signs, self.basis[1:])
            )
            best = max(best, float(np.linalg.norm(diag)))
        return best

    @property
    def inv_basis(self) -> np.ndarray:
        return np.linalg.inv(self.basis)


class Neighbor(NamedTuple):
    """One point of S relative to a motif center."""

    vector: np.ndarray  # q - p, Cartesian
    index: int          # motif index of q
    shift: np.ndarray   # integer lattice coordinates of q's cell


@dataclass(frozen=True)
class PeriodicSet:
    """A periodic point set: unit cell plus motif of fractional points."""

    cell: UnitCell
    motif: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        motif = np.atleast_2d(np.asarray(self.motif, dtype=float))
        n = self.cell.dim
        if motif.shape[0] < 1:
            raise DataError("motif must contain at least one point")
        if motif.shape[1] != n:
            raise DataError(
                f"motif points have {motif.shape[1]} coordinates, cell has dimension {n}"
            )
        if np.any(motif < 0.0) or np.any(motif >= 1.0):
            raise DataError("fractional coordinates must lie in [0, 1)")
        if self.labels is not None and len(self.labels) != motif.shape[0]:
            raise DataError("labels, when given, need one entry per motif point")
        object.__setattr__(self, "motif", motif)
        self._check_coincidence(motif)

    def _check_coincidence(self, motif):
        m, n = motif.shape
        if m == 1:
            return
        tol = REL_TOL * self.cell.diameter
        cart = motif @ self.cell.basis
        shifts = np.array(list(product((-1, 0, 1), repeat=n)), dtype=float)
        translations = shifts @ self.cell.basis
        for t in translations:
            diff = cart[:, None, :] - (cart[None, :, :] + t[None, None, :])
            dist = np.linalg.norm(diff, axis=-1)
            if not np.allclose(t, 0.0):
                if dist.min() <= tol:
                    raise DataError("motif contains coincident points")
            else:
                np.fill_diagonal(dist, np.inf)
                if dist.min() <= tol:
                    raise DataError("motif contains coincident points")

    @property
    def m(self) -> int:
        return self.motif.shape[0]

    @property
    def dim(self) -> int:
        return self.cell.dim

    @property
    def cartesian_motif(self) -> np.ndarray:
        return self.motif @ self.cell.basis


@dataclass(frozen=True)
class RadiusReport:
    """The radii every other invariant builds on."""

    packing_radius: float
    covering_radius: float
    bridge_length: float
    easy_stable_radius: float
    covering_method: str = "voronoi"


def _offset_ranges(cell: UnitCell, frac_lo, frac_hi, reach: float):
    """Integer cell offsets whose cells can meet the fractional window
    [frac_lo, frac_hi] fattened by a Cartesian distance `reach`."""
    dual = np.linalg.norm(cell.inv_basis, axis=0)  # fractional reach per unit length
    lo = np.floor(np.asarray(frac_lo) - reach * dual).astype(int) - 1
    hi = np.floor(np.asarray(frac_hi) + reach * dual).astype(int) + 1
    return lo, hi


def _lattice_offsets(lo, hi) -> np.ndarray:
    ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*ranges, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def neighbor_arrays(S: PeriodicSet, p_index: int, alpha: float):
    """Array form of neighbors_within: (vectors, motif indices, shifts),
    sorted by (length, coordinates, index)."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if not 0 <= p_index < S.m:
        raise IndexError("motif index out of range")
    cell = S.cell
    p_frac = S.motif[p_index]
    p_cart = p_frac @ cell.basis
    lo, hi = _offset_ranges(cell, p_frac, p_frac, alpha)
    offsets = _lattice_offsets(lo, hi)
    cart_off = offsets @ cell.basis
    vecs = (S.cartesian_motif[None, :, :] + cart_off[:, None, :]) - p_cart
    dist = np.linalg.norm(vecs, axis=-1)
    atol = REL_TOL * (alpha + cell.diameter)
    cells, idx = np.nonzero(dist <= alpha + atol)
    vecs = vecs[cells, idx]
    shifts = offsets[cells]
    dist = dist[cells, idx]
    keys = [idx] + [vecs[:, c] for c in range(cell.dim - 1, -1, -1)] + [dist]
    order = np.lexsort(keys)
    return vecs[order], idx[order], shifts[order]


def neighbors_within(S: PeriodicSet, p_index: int, alpha: float):
    """All vectors q - p with q in S and |q - p| <= alpha, center included.

    Returns a list of Neighbor tuples sorted by (length, coordinates, index);
    the enumeration only visits shifted cells that can intersect the ball.
    """
    vecs, idx, shifts = neighbor_arrays(S, p_index, alpha)
    return [
        Neighbor(v.copy(), int(i), s.copy()) for v, i, s in zip(vecs, idx, shifts)
    ]


def neighbor_cloud(S: PeriodicSet, reach: float):
    """All points of S within Cartesian distance `reach` of the unit cell.

    Returns (points, motif_indices); used for covering-radius and sampling
    queries against arbitrary positions inside the cell.
    """
    cell = S.cell
    lo, hi = _offset_ranges(cell, np.zeros(cell.dim), np.ones(cell.dim), reach)
    offsets = _lattice_offsets(lo, hi)
    cart_off = offsets @ cell.basis
    pts = (S.cartesian_motif[None, :, :] + cart_off[:, None, :]).reshape(-1, cell.dim)
    idx = np.tile(np.arange(S.m), offsets.shape[0])
    return pts, idx


def min_interpoint_distance(S: PeriodicSet) -> float:
    """Minimum distance between distinct points of the infinite set."""
    probe = float(np.linalg.norm(S.cell.basis, axis=1).min()) * (1 + 1e-9)
    best = math.inf
    for i in range(S.m):
        vecs, _, _ = neighbor_arrays(S, i, probe)
        dist = np.linalg.norm(vecs, axis=1)
        dist = dist[dist > REL_TOL * S.cell.diameter]
        if dist.size:
            best = min(best, float(dist.min()))
    return best


def packing_covering_radii(S: PeriodicSet) -> tuple:
    """(r, R): half the minimum interpoint distance, and the deepest-hole
    distance computed from Voronoi vertices of a periodic patch (analytic
    in 1D)."""
    r = 0.5 * min_interpoint_distance(S)
    n = S.dim
    if n == 1:
        period = abs(float(S.cell.basis[0, 0]))
        xs = np.sort(S.motif[:, 0] * period)
        gaps = np.diff(np.concatenate([xs, [xs[0] + period]]))
        R = 0.5 * float(gaps.max())
        return r, R
    pts, _ = neighbor_cloud(S, 2.0 * S.cell.diameter)
    vor = Voronoi(pts)
    frac = vor.vertices @ S.cell.inv_basis
    window = np.all((frac >= -1e-9) & (frac <= 1 + 1e-9), axis=1)
    verts = vor.vertices[window]
    if verts.shape[0] == 0:
        raise RuntimeError("no Voronoi vertices found inside the cell window")
    tree = cKDTree(pts)
    dist, _ = tree.query(verts)
    R = float(dist.max())
    return r, R


def _generates_full_lattice(vectors: Sequence[Sequence[int]], n: int) -> bool:
    """True iff the integer row span of `vectors` is all of Z^n.

    Row-style Hermite reduction; the span is Z^n exactly when there are n
    pivots with |product| = 1.
    """
    mat = [[int(x) for x in v] for v in vectors if any(int(x) for x in v)]
    if n == 0:
        return True
    pivots = []
    row = 0
    for col in range(n):
        while True:
            nz = [r for r in range(row, len(mat)) if mat[r][col] != 0]
            if not nz:
                break
            r_min = min(nz, key=lambda r: abs(mat[r][col]))
            mat[row], mat[r_min] = mat[r_min], mat[row]
            done = True
            for r in range(row + 1, len(mat)):
                if mat[r][col] != 0:
                    q = mat[r][col] // mat[row][col]
                    mat[r] = [a - q * b for a, b in zip(mat[r], mat[row])]
                    if mat[r][col] != 0:
                        done = False
            if done:
                break
        if row < len(mat) and mat[row][col] != 0:
            pivots.append(mat[row][col])
            row += 1
    if len(pivots) != n:
        return False
    prod = 1
    for p in pivots:
        prod *= p
    return abs(prod) == 1


def _quotient_edges(S: PeriodicSet, max_len: float):
    """Undirected edges (i, j, shift, length) of the quotient multigraph with
    hop length <= max_len, one orientation per geometric edge."""
    edges = []
    for i in range(S.m):
        vecs, idx, shifts = neighbor_arrays(S, i, max_len)
        dist = np.linalg.norm(vecs, axis=1)
        for k in range(len(idx)):
            length = float(dist[k])
            if length <= REL_TOL * S.cell.diameter:
                continue
            j, shift = int(idx[k]), tuple(int(c) for c in shifts[k])
            if j < i:
                continue
            if j == i and shift < tuple(-c for c in shift):
                continue
            edges.append((i, j, shift, length))
    return edges


def _bridge_feasible(edges, m: int, n: int, threshold: float) -> bool:
    """Connectivity of the quotient graph plus full-lattice generation by the
    translation vectors of its closed walks (the finite form of chaining
    through the infinite set)."""
    adj = [[] for _ in range(m)]
    for i, j, shift, length in edges:
        if length <= threshold:
            adj[i].append((j, shift))
            adj[j].append((i, tuple(-c for c in shift)))
    phi = [None] * m
    phi[0] = tuple(0 for _ in range(n))
    stack = [0]
    cycles = []
    while stack:
        u = stack.pop()
        for v, shift in adj[u]:
            cand = tuple(a + b for a, b in zip(phi[u], shift))
            if phi[v] is None:
                phi[v] = cand
                stack.append(v)
            else:
                cyc = tuple(a - b for a, b in zip(cand, phi[v]))
                if any(cyc):
                    cycles.append(cyc)
    if any(p is None for p in phi):
        return False
    return _generates_full_lattice(cycles, n)


def bridge_length(S: PeriodicSet) -> float:
    """Exact bridge length: the smallest hop length whose hop graph connects
    the whole infinite set.

    Candidates are the pairwise distances up to max{b, d/2}, which is always
    feasible; the smallest feasible candidate is located by binary search.
    """
    bound = max(S.cell.longest_edge, 0.5 * S.cell.diameter)
    tol = REL_TOL * S.cell.diameter
    edges = _quotient_edges(S, bound * (1 + 1e-9) + tol)
    lengths = sorted(e[3] for e in edges)
    candidates = []
    for length in lengths:
        if not candidates or length - candidates[-1] > tol:
            candidates.append(length)
    lo, hi = 0, len(candidates) - 1
    if not _bridge_feasible(edges, S.m, S.dim, candidates[hi] + tol):
        raise RuntimeError("no feasible bridge threshold below max{b, d/2}")
    while lo < hi:
        mid = (lo + hi) // 2
        if _bridge_feasible(edges, S.m, S.dim, candidates[mid] + tol):
            hi = mid
        else:
            lo = mid + 1
    return candidates[lo]


def easy_stable_radius(S: PeriodicSet) -> float:
    """Upper bound max{2b, d} for the minimum stable radius."""
    return max(2.0 * S.cell.longest_edge, S.cell.diameter)


def radius_report(S: PeriodicSet) -> RadiusReport:
    r, R = packing_covering_radii(S)
    return RadiusReport(
        packing_radius=r,
        covering_radius=R,
        bridge_length=bridge_length(S),
        easy_stable_radius=easy_stable_radius(S),
        covering_method="analytic" if S.dim == 1 else "voronoi",
    )


# ---------------------------------------------------------------------------
# basis reduction


def _lagrange_reduce(basis: np.ndarray) -> np.ndarray:
    u, v = basis[0].astype(float), basis[1].astype(float)
    if u @ u > v @ v:
        u, v = v, u
    for _ in range(10000):
        q = round(float(u @ v) / float(u @ u))
        v = v - q * u
        if v @ v >= u @ u:
            return np.array([u, v])
        u, v = v, u
    raise RuntimeError("Lagrange reduction did not converge")


def reduce_basis(basis: np.ndarray) -> np.ndarray:
    """Shortest basis: exact Lagrange-Gauss in 2D, greedy pair reduction plus
    small integer recombinations in 3D (sufficient for n <= 3)."""
    basis = np.asarray(basis, dtype=float)
    n = basis.shape[0]
    if n == 1:
        return basis.copy()
    if n == 2:
        out = _lagrange_reduce(basis)
        return out[np.argsort(np.linalg.norm(out, axis=1))]
    rows = basis.copy()
    for _ in range(1000):
        changed = False
        for a in range(3):
            for b in range(3):
                if a == b:
                    continue
                q = round(float(rows[a] @ rows[b]) / float(rows[b] @ rows[b]))
                if q != 0:
                    cand = rows[a] - q * rows[b]
                    if cand @ cand < rows[a] @ rows[a] - 1e-15:
                        rows[a] = cand
                        changed = True
        order = np.argsort(np.linalg.norm(rows, axis=1))
        rows = rows[order]
        for c1, c2 in product((-2, -1, 0, 1, 2), repeat=2):
            cand = rows[2] + c1 * rows[0] + c2 * rows[1]
            if cand @ cand < rows[2] @ rows[2] - 1e-15:
                rows[2] = cand
                changed = True
        if not changed:
            return rows
    raise RuntimeError("basis reduction did not converge")


# ---------------------------------------------------------------------------
# transformations (used for invariance checks and re-parameterizations)


def fold_fractions(frac: np.ndarray) -> np.ndarray:
    out = frac - np.floor(frac)
    out[out >= 1.0] -= 1.0
    return out


def apply_isometry(S: PeriodicSet, ortho: np.ndarray, translation=None) -> PeriodicSet:
    """The image of S under x -> ortho @ x + translation, re-expressed with
    the transformed cell."""
    ortho = np.asarray(ortho, dtype=float)
    new_basis = S.cell.basis @ ortho.T
    cell = UnitCell(new_basis)
    frac = S.motif.copy()
    if translation is not None:
        frac = frac + np.asarray(translation, dtype=float) @ cell.inv_basis
    return PeriodicSet(cell, fold_fractions(frac), S.labels)


def change_cell(S: PeriodicSet, unimodular: np.ndarray) -> PeriodicSet:
    """Re-parameterize the same point set with basis U @ basis, |det U| = 1."""
    U = np.asarray(unimodular)
    if abs(round(float(np.linalg.det(U)))) != 1:
        raise ValueError("cell change requires a unimodular integer matrix")
    new_basis = U @ S.cell.basis
    frac = S.motif @ np.linalg.inv(U.astype(float))
    return PeriodicSet(UnitCell(new_basis), fold_fractions(frac), S.labels)


def translate(S: PeriodicSet, vector) -> PeriodicSet:
    frac = S.motif + np.asarray(vector, dtype=float) @ S.cell.inv_basis
    return PeriodicSet(S.cell, fold_fractions(frac), S.labels)
