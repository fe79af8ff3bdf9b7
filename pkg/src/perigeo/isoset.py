"""The complete invariant: alpha-clusters, cluster isometry testing,
symmetry groups, alpha-partitions, the isotree, stable radii and the
weighted isoset.

Cluster comparison is exact up to an absolute point-match tolerance
(default 1e-6 * alpha): an orthogonal map is accepted when it sends every
cluster point within tolerance of a distinct point of the other cluster.
Degenerate clusters (affine hull of rank < n) are compared in reduced
coordinates; their symmetry groups are continuous when the codimension is
at least 2 and are then recorded by (rank, reduced order) instead of an
element list.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    REL_TOL,
    PeriodicSet,
    bridge_length,
    easy_stable_radius,
    neighbor_arrays,
)

TOL_MATCH_FRAC = 1e-6  # point-match tolerance as a fraction of alpha
TOL_ORTHO = 1e-9       # matrix tolerance for deduplicating group elements
RANK_TOL = 1e-7        # singular-value cutoff (relative to cluster radius)


@dataclass(frozen=True)
class Cluster:
    """All vectors q - p with |q - p| <= alpha around motif point p."""

    center_index: int
    alpha: float
    points: np.ndarray  # (k, n), sorted by (length, coordinates)

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)


@dataclass(frozen=True)
class OrthogonalMap:
    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if not np.allclose(M.T @ M, np.eye(M.shape[0]), atol=1e-7):
            raise ValueError("matrix is not orthogonal")
        object.__setattr__(self, "matrix", M)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def __call__(self, points):
        return np.asarray(points) @ self.matrix.T


@dataclass(frozen=True)
class SymmetryGroup:
    """Self-isometries of a cluster fixing its center.

    For clusters whose affine hull has codimension >= 2 the group contains
    a continuous rotation subgroup; it is then summarized by the hull rank
    and the finite order of the in-hull pattern group.
    """

    continuous: bool
    rank: int
    reduced_order: int
    elements: Optional[tuple] = None  # full-dimensional matrices when finite
    order: Optional[int] = None


@dataclass(frozen=True)
class IsometryClass:
    representative: Cluster
    weight: Fraction
    members: tuple  # motif indices in this class


@dataclass(frozen=True)
class Isoset:
    alpha: float
    classes: tuple
    unstable: bool = False  # alpha within tolerance of a critical radius

    @property
    def weights(self):
        return [c.weight for c in self.classes]


@dataclass(frozen=True)
class Isotree:
    """Partitions of the motif by cluster isometry class at growing radii."""

    radii: tuple
    partitions: tuple  # tuple of partitions, each a tuple of index-tuples
    parents: tuple     # per level, tuple of parent block indices (level - 1)


def match_tolerance(alpha: float, tol: Optional[float]) -> float:
    if tol is not None:
        return tol
    return TOL_MATCH_FRAC * max(alpha, 1e-30)


def alpha_cluster(S: PeriodicSet, p_index: int, alpha: float) -> Cluster:
    vecs, _, _ = neighbor_arrays(S, p_index, alpha)
    return Cluster(center_index=p_index, alpha=alpha, points=vecs)


# ---------------------------------------------------------------------------
# cluster isometry search


def _rank_and_frame(points: np.ndarray, scale: float):
    """(rank, frame): orthonormal rows, the first `rank` spanning the hull."""
    n = points.shape[1]
    if points.shape[0] == 1:
        return 0, np.eye(n)
    _, sv, vt = np.linalg.svd(points, full_matrices=True)
    thresh = RANK_TOL * max(scale, 1e-30)
    rank = int(np.sum(sv > thresh))
    return rank, vt


def _embed_map(m_reduced: np.ndarray, frame_c: np.ndarray, frame_d: np.ndarray,
               n: int, det_sign: float = 1.0) -> np.ndarray:
    r = m_reduced.shape[0]
    block = np.eye(n)
    block[:r, :r] = m_reduced
    if r < n:
        block[r, r] = det_sign
    return frame_d.T @ block @ frame_c


def _verify_map(m: np.ndarray, pc: np.ndarray, tree_d: cKDTree, k: int,
                tol_abs: float) -> bool:
    dist, idx = tree_d.query(pc @ m.T)
    return float(dist.max()) <= tol_abs and len(np.unique(idx)) == k


def _signed_line_match(xc: np.ndarray, xd: np.ndarray, tol_abs: float):
    """1D isometries fixing 0 that map multiset xc onto xd: subset of {+1,-1}."""
    xc_s, xd_s = np.sort(xc), np.sort(xd)
    out = []
    if xc_s.shape == xd_s.shape:
        if np.allclose(xc_s, xd_s, rtol=0.0, atol=tol_abs):
            out.append(1.0)
        if np.allclose(np.sort(-xc), xd_s, rtol=0.0, atol=tol_abs):
            out.append(-1.0)
    return out


def _anchor_indices(points: np.ndarray, r: int):
    """Indices of r robustly independent anchor vectors, shortest first."""
    lengths = np.linalg.norm(points, axis=1)
    nz = np.nonzero(lengths > 0)[0]
    order = nz[np.argsort(lengths[nz], kind="stable")]
    anchors = [int(order[0])]
    basis = [points[order[0]] / lengths[order[0]]]
    while len(anchors) < r:
        best, best_perp = None, -1.0
        for j in order:
            v = points[j]
            res = v - sum((v @ b) * b for b in basis)
            perp = float(np.linalg.norm(res))
            if perp > best_perp:
                best, best_perp, best_res = int(j), perp, res
        anchors.append(best)
        basis.append(best_res / best_perp)
    return anchors


def _reduced_maps(pc: np.ndarray, pd: np.ndarray, tol_abs: float,
                  first_only: bool):
    """Orthogonal maps (r x r) sending point set pc onto pd within tol_abs."""
    r = pc.shape[1]
    k = pc.shape[0]
    out = []
    if r == 0:
        return [np.eye(0)]
    if r == 1:
        return [np.array([[s]]) for s in _signed_line_match(pc[:, 0], pd[:, 0], tol_abs)]
    tree_d = cKDTree(pd)
    ident = np.eye(r)
    if _verify_map(ident, pc, tree_d, k, tol_abs):
        out.append(ident)
        if first_only:
            return out
    anchors = _anchor_indices(pc, r)
    A = pc[anchors]
    lens_a = np.linalg.norm(A, axis=1)
    lens_d = np.linalg.norm(pd, axis=1)
    len_tol = 2.0 * tol_abs
    gram_a = A @ A.T
    cand = [np.nonzero(np.abs(lens_d - la) <= len_tol)[0] for la in lens_a]

    def assemble(chosen):
        B = pd[list(chosen)]
        try:
            m = np.linalg.solve(A, B).T
        except np.linalg.LinAlgError:
            return None
        u, _, vt = np.linalg.svd(m)
        return u @ vt

    def backtrack(level, chosen):
        if level == r:
            m = assemble(chosen)
            if m is None:
                return False
            if _verify_map(m, pc, tree_d, k, tol_abs):
                if not any(np.abs(m - e).max() <= TOL_ORTHO for e in out):
                    out.append(m)
                    if first_only:
                        return True
            return False
        for j in cand[level]:
            b = pd[j]
            ok = True
            for lvl_prev, j_prev in enumerate(chosen):
                gram_tol = 2.0 * tol_abs * (lens_a[level] + lens_a[lvl_prev]) + 4 * tol_abs ** 2
                if abs(b @ pd[j_prev] - gram_a[level, lvl_prev]) > gram_tol:
                    ok = False
                    break
            if ok and backtrack(level + 1, chosen + (j,)):
                return True
        return False

    backtrack(0, ())
    return out


def _isometry_maps(C: Cluster, D: Cluster, tol: Optional[float],
                   first_only: bool):
    """Full-dimensional orthogonal maps sending C onto D (center fixed)."""
    if C.dim != D.dim:
        raise ValueError("clusters live in different dimensions")
    if C.size != D.size:
        return []
    n = C.dim
    tol_abs = match_tolerance(max(C.alpha, D.alpha), tol)
    lc, ld = np.sort(C.lengths), np.sort(D.lengths)
    if not np.allclose(lc, ld, rtol=0.0, atol=2.0 * tol_abs):
        return []
    scale = max(float(lc[-1]), 1e-30)
    rank_c, frame_c = _rank_and_frame(C.points, scale)
    rank_d, frame_d = _rank_and_frame(D.points, scale)
    if rank_c != rank_d:
        return []
    if rank_c == 0:
        return [np.eye(n)]
    pc = C.points @ frame_c[:rank_c].T
    pd = D.points @ frame_d[:rank_d].T
    reduced = _reduced_maps(pc, pd, tol_abs, first_only)
    return [_embed_map(m, frame_c, frame_d, n) for m in reduced]


def clusters_isometric(C: Cluster, D: Cluster, tol: Optional[float] = None
                       ) -> Optional[OrthogonalMap]:
    """A center-fixing orthogonal map with f(C) = D within tolerance, or None."""
    maps = _isometry_maps(C, D, tol, first_only=True)
    return OrthogonalMap(maps[0]) if maps else None


def symmetry_group(S: PeriodicSet, p_index: int, alpha: float,
                   tol: Optional[float] = None) -> SymmetryGroup:
    """All self-isometries of the alpha-cluster fixing the center."""
    C = alpha_cluster(S, p_index, alpha)
    return cluster_symmetry_group(C, tol)


def cluster_symmetry_group(C: Cluster, tol: Optional[float] = None
                           ) -> SymmetryGroup:
    n = C.dim
    tol_abs = match_tolerance(C.alpha, tol)
    scale = max(float(C.lengths.max()), 1e-30)
    rank, frame = _rank_and_frame(C.points, scale)
    pc = C.points @ frame[:rank].T
    if rank == 0:
        reduced = [np.eye(0)]
    elif rank == 1:
        reduced = [np.array([[s]]) for s in _signed_line_match(pc[:, 0], pc[:, 0], tol_abs)]
    else:
        reduced = _reduced_maps(pc, pc, tol_abs, first_only=False)
    codim = n - rank
    if codim >= 2:
        return SymmetryGroup(continuous=True, rank=rank,
                             reduced_order=len(reduced))
    elements = []
    for m in reduced:
        if codim == 0:
            elements.append(_embed_map(m, frame, frame, n))
        else:
            for sign in (1.0, -1.0):
                elements.append(_embed_map(m, frame, frame, n, det_sign=sign))
    return SymmetryGroup(continuous=False, rank=rank,
                         reduced_order=len(reduced),
                         elements=tuple(elements), order=len(elements))


def groups_equal(g1: SymmetryGroup, g2: SymmetryGroup,
                 tol: float = TOL_ORTHO) -> bool:
    if g1.continuous != g2.continuous:
        return False
    if g1.continuous:
        return g1.rank == g2.rank and g1.reduced_order == g2.reduced_order
    if g1.order != g2.order:
        return False
    for e1 in g1.elements:
        if not any(np.abs(e1 - e2).max() <= 10 * tol for e2 in g2.elements):
            return False
    return True


# ---------------------------------------------------------------------------
# partitions, isotree, stable radius, isoset


def alpha_partition(S: PeriodicSet, alpha: float, tol: Optional[float] = None):
    """Motif indices split by isometry class of their alpha-clusters;
    blocks are sorted tuples, ordered by smallest member."""
    clusters = [alpha_cluster(S, i, alpha) for i in range(S.m)]
    reps, blocks = [], []
    for i in range(S.m):
        for b, rep in enumerate(reps):
            if clusters_isometric(clusters[i], rep, tol) is not None:
                blocks[b].append(i)
                break
        else:
            reps.append(clusters[i])
            blocks.append([i])
    return tuple(tuple(b) for b in blocks)


def critical_radii(S: PeriodicSet, alpha_max: float):
    """Sorted distinct pairwise distances <= alpha_max, where cluster
    membership (hence any partition) can change."""
    tol = REL_TOL * S.cell.diameter
    values = []
    for i in range(S.m):
        vecs, _, _ = neighbor_arrays(S, i, alpha_max)
        d = np.linalg.norm(vecs, axis=1)
        values.append(d[d > tol])
    values = np.sort(np.concatenate(values))
    out = []
    for v in values:
        if not out or v - out[-1] > tol:
            out.append(float(v))
    return out


def isotree(S: PeriodicSet, alpha_max: float, tol: Optional[float] = None
            ) -> Isotree:
    """Merge tree of alpha-partitions sampled at every critical radius."""
    radii = [0.0] + critical_radii(S, alpha_max)
    partitions = [alpha_partition(S, r, tol) for r in radii]
    parents = [tuple()]
    for lvl in range(1, len(radii)):
        prev, cur = partitions[lvl - 1], partitions[lvl]
        links = []
        for block in cur:
            parent = next(
                pb for pb, pblock in enumerate(prev) if block[0] in pblock
            )
            if not set(block) <= set(prev[parent]):
                raise RuntimeError("alpha-partitions failed to refine")
            links.append(parent)
        parents.append(tuple(links))
    return Isotree(tuple(radii), tuple(partitions), tuple(parents))


@dataclass(frozen=True)
class StableRadiusResult:
    alpha: float
    beta: float
    fallback: bool = False


def minimum_stable_radius(S: PeriodicSet, tol: Optional[float] = None
                          ) -> StableRadiusResult:
    """Smallest alpha >= beta with P(S; alpha) = P(S; alpha - beta) and
    stabilized symmetry groups, beta the exact bridge length.

    Partitions and groups are piecewise constant in the radius, changing
    only at pairwise distances; the scan therefore visits the critical
    radii and their beta-shifts, snapping both compared radii onto the
    critical grid.
    """
    beta = bridge_length(S)
    upper = easy_stable_radius(S)
    snap_tol = REL_TOL * S.cell.diameter
    crit = [0.0] + critical_radii(S, upper + snap_tol)

    candidates = {beta, upper}
    for c in crit:
        if beta - snap_tol <= c <= upper + snap_tol:
            candidates.add(c)
        if beta - snap_tol <= c + beta <= upper + snap_tol:
            candidates.add(c + beta)
    candidates = sorted(candidates)

    part_cache, sym_cache = {}, {}

    def snap(r: float) -> int:
        return bisect.bisect_right(crit, r + snap_tol) - 1

    def partition_at(idx: int):
        if idx not in part_cache:
            part_cache[idx] = alpha_partition(S, crit[idx], tol)
        return part_cache[idx]

    def groups_at(idx: int):
        if idx not in sym_cache:
            sym_cache[idx] = [
                symmetry_group(S, p, crit[idx], tol) for p in range(S.m)
            ]
        return sym_cache[idx]

    for alpha in candidates:
        hi, lo = snap(alpha), snap(max(alpha - beta, 0.0))
        if partition_at(hi) != partition_at(lo):
            continue
        if all(
            groups_equal(gh, gl)
            for gh, gl in zip(groups_at(hi), groups_at(lo))
        ):
            return StableRadiusResult(alpha=alpha, beta=beta)
    return StableRadiusResult(alpha=upper, beta=beta, fallback=True)


def isoset(S: PeriodicSet, alpha: float, tol: Optional[float] = None) -> Isoset:
    """Weighted isometry classes of alpha-clusters; class representative is
    the lexicographically smallest sorted cluster of the class."""
    partition = alpha_partition(S, alpha, tol)
    classes = []
    for block in partition:
        members = [alpha_cluster(S, i, alpha) for i in block]
        rep = min(members, key=lambda c: tuple(c.points.ravel()))
        classes.append(
            IsometryClass(
                representative=rep,
                weight=Fraction(len(block), S.m),
                members=tuple(block),
            )
        )
    tol_abs = match_tolerance(alpha, tol)
    crit = critical_radii(S, alpha + 2 * tol_abs + REL_TOL * S.cell.diameter)
    unstable = any(abs(alpha - c) <= tol_abs for c in crit)
    return Isoset(alpha=alpha, classes=tuple(classes), unstable=unstable)


def common_stable_alpha(S: PeriodicSet, Q: PeriodicSet) -> float:
    """A radius stable for both sets: the larger of the two easy bounds."""
    return max(easy_stable_radius(S), easy_stable_radius(Q))


def isosets_equal(S: PeriodicSet, Q: PeriodicSet, tol: Optional[float] = None,
                  alpha: Optional[float] = None) -> bool:
    """The isometry decision: weight-respecting bijection between isosets
    at a common stable radius."""
    if S.dim != Q.dim:
        return False
    if alpha is None:
        alpha = common_stable_alpha(S, Q)
    A = isoset(S, alpha, tol)
    B = isoset(Q, alpha, tol)
    if len(A.classes) != len(B.classes):
        return False
    if sorted(A.weights) != sorted(B.weights):
        return False
    # classes within one isoset are pairwise non-isometric, so each class
    # has at most one partner and greedy matching is a perfect matching
    unmatched = list(B.classes)
    for a in A.classes:
        for j, b in enumerate(unmatched):
            if a.weight == b.weight and clusters_isometric(
                a.representative, b.representative, tol
            ) is not None:
                unmatched.pop(j)
                break
        else:
            return False
    return True
