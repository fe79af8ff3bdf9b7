"""Distances between clusters, isometry classes, isosets and periodic sets.

Two d_R engines are provided.  The exact-small engine minimizes the
directed Hausdorff distance over orthogonal maps by a dense candidate
search (uniform rotation grid plus every direction-alignment candidate)
followed by local bracket refinement; in 2D the search is certified-grade
because the alignment candidates contain the balanced optima of structured
clusters and refinement shrinks brackets to ~1e-10 rad.  The approximation
engine implements the anchor construction whose value is guaranteed within
a factor 2(n-1) of the optimum (reported with a (1+delta) cushion).

The boundary-tolerant cluster distance d_C is the max of two one-sided
max-min evaluations over length-sorted cluster prefixes, and EMD on
isosets is solved exactly by successive shortest augmenting paths on
integer-scaled weights.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .isoset import Cluster, IsometryClass, Isoset

EXACT_SMALL_MAX = 60   # cluster-size cutoff for the exact-small engine
DEFAULT_DELTA = 0.1
GRID_2D = 512          # base rotation grid for the 2D exact engine
GRID_3D = 4096         # base rotation sample for the 3D exact engine
REFINE_ROUNDS = 14


def _points(obj) -> np.ndarray:
    if isinstance(obj, IsometryClass):
        obj = obj.representative
    if isinstance(obj, Cluster):
        return obj.points
    pts = np.asarray(obj, dtype=float)
    return np.atleast_2d(pts)


def directed_hausdorff(C, D) -> float:
    """max over p in C of the distance from p to the nearest point of D."""
    P, Q = _points(C), _points(D)
    if P.shape[0] == 0 or Q.shape[0] == 0:
        raise ValueError("directed Hausdorff distance needs non-empty sets")
    dist, _ = cKDTree(Q).query(P)
    return float(np.max(dist))


# ---------------------------------------------------------------------------
# rotation machinery (2D)


def _rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _ref2(phi: float) -> np.ndarray:
    c, s = math.cos(2 * phi), math.sin(2 * phi)
    return np.array([[c, s], [s, -c]])


def _alignment_angles_2d(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Angles rotating some P direction onto some +-Q direction.

    Pairs of grossly different lengths cannot witness a small d_H and are
    skipped, except pairs involving the longest P point: those make the
    candidate set a superset of the approximation engine's maps.
    """
    lp, lq = np.linalg.norm(P, axis=1), np.linalg.norm(Q, axis=1)
    pm, qm = lp > 0, lq > 0
    P, lp = P[pm], lp[pm]
    Q, lq = Q[qm], lq[qm]
    if len(P) == 0 or len(Q) == 0:
        return np.array([0.0])
    ap = np.arctan2(P[:, 1], P[:, 0])
    aq = np.arctan2(Q[:, 1], Q[:, 0])
    scale = float(max(lp.max(), lq.max()))
    keep = np.abs(lp[:, None] - lq[None, :]) <= 0.35 * scale
    keep[lp >= lp.max() - 1e-12, :] = True
    diff = (aq[None, :] - ap[:, None])[keep].ravel()
    return np.concatenate([diff, diff + math.pi])


class _RotationProfile2D:
    """Prefix Hausdorff profiles of one oriented pair (P, Q) over rotations.

    Uses |R(t)p - q|^2 = |p|^2 + |q|^2 - 2(cos t (p.q) + sin t (p x q)), so
    the pairwise products are computed once and every angle costs one fused
    pass over the k x q table.
    """

    def __init__(self, P: np.ndarray, Q: np.ndarray):
        self.k = len(P)
        self.base = (P * P).sum(1)[:, None] + (Q * Q).sum(1)[None, :]
        self.dot = P @ Q.T
        self.cross = np.outer(P[:, 0], Q[:, 1]) - np.outer(P[:, 1], Q[:, 0])
        self.chunk = max(1, int(2e6 / max(self.base.size, 1)))

    def profiles(self, thetas: np.ndarray) -> np.ndarray:
        """(T, k): entry [t, i] = d_H(R(theta_t) P[:i+1], Q)."""
        T = len(thetas)
        out = np.empty((T, self.k))
        cos, sin = np.cos(thetas), np.sin(thetas)
        for a in range(0, T, self.chunk):
            b = min(a + self.chunk, T)
            d2 = (
                self.base[None, :, :]
                - 2.0 * cos[a:b, None, None] * self.dot[None, :, :]
                - 2.0 * sin[a:b, None, None] * self.cross[None, :, :]
            )
            nearest = np.sqrt(np.maximum(d2.min(axis=2), 0.0))
            out[a:b] = np.maximum.accumulate(nearest, axis=1)
        return out

    def values(self, thetas: np.ndarray) -> np.ndarray:
        """(T,): d_H(R(theta_t) P, Q) for the full set."""
        T = len(thetas)
        out = np.empty(T)
        cos, sin = np.cos(thetas), np.sin(thetas)
        for a in range(0, T, self.chunk):
            b = min(a + self.chunk, T)
            d2 = (
                self.base[None, :, :]
                - 2.0 * cos[a:b, None, None] * self.dot[None, :, :]
                - 2.0 * sin[a:b, None, None] * self.cross[None, :, :]
            )
            out[a:b] = np.sqrt(np.maximum(d2.min(axis=2).max(axis=1), 0.0))
        return out


def _dr_prefixes_2d(P: np.ndarray, Q: np.ndarray,
                    rounds: int = REFINE_ROUNDS,
                    gains: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-prefix min over all of O(R^2) of d_H(f(P[:i+1]), Q).

    P must be sorted by length.  When `gains` is given, refinement rounds
    only split brackets of the prefixes that can still decide the max-min
    of d_M (every evaluated angle still improves all prefixes for free).
    """
    lengths = np.linalg.norm(P, axis=1)
    k = len(P)
    states = []
    for orient in range(2):
        Po = P if orient == 0 else P @ np.diag([1.0, -1.0])
        engine = _RotationProfile2D(Po, Q)
        base = np.linspace(0.0, 2 * math.pi, GRID_2D, endpoint=False)
        thetas = np.concatenate([base, _alignment_angles_2d(Po, Q)])
        prof = engine.profiles(thetas)
        states.append({
            "engine": engine,
            "best": prof.min(axis=0),
            "theta": thetas[prof.argmin(axis=0)],
        })
    width = 2 * math.pi / GRID_2D
    offsets = np.array([-1.0, -0.5, 0.5, 1.0])
    for _ in range(rounds):
        best = np.minimum(states[0]["best"], states[1]["best"])
        if gains is None:
            active = np.ones(k, dtype=bool)
        else:
            lower = np.maximum(best - lengths * width, 0.0)
            dm_floor = float(np.max(np.minimum(gains, lower)))
            active = np.minimum(gains, best) >= dm_floor - 1e-15
        for st in states:
            local = np.unique(
                st["theta"][active][:, None] + width * offsets[None, :]
            )
            prof = st["engine"].profiles(local)
            vals = prof.min(axis=0)
            improve = vals < st["best"]
            st["best"] = np.where(improve, vals, st["best"])
            st["theta"] = np.where(
                improve, local[prof.argmin(axis=0)], st["theta"]
            )
        width /= 3.0
    return np.minimum(states[0]["best"], states[1]["best"])


def _dr_full_2d(P: np.ndarray, Q: np.ndarray, rounds: int = REFINE_ROUNDS):
    """(value, map) of the 2D exact d_R for the full set P."""
    best, best_map = math.inf, np.eye(2)
    tree = cKDTree(Q)
    for orient in range(2):
        flip = np.eye(2) if orient == 0 else np.diag([1.0, -1.0])
        Po = P @ flip
        engine = _RotationProfile2D(Po, Q)
        base = np.linspace(0.0, 2 * math.pi, GRID_2D, endpoint=False)
        thetas = np.concatenate([base, _alignment_angles_2d(Po, Q)])
        vals = engine.values(thetas)
        b = int(vals.argmin())
        val, theta = float(vals[b]), float(thetas[b])
        width = 2 * math.pi / GRID_2D
        offsets = np.array([-1.0, -0.5, 0.5, 1.0])
        for _ in range(rounds):
            local = theta + width * offsets
            vals = engine.values(local)
            b = int(vals.argmin())
            if vals[b] < val:
                val, theta = float(vals[b]), float(local[b])
            width /= 3.0
        # re-evaluate directly: the inner-product form loses half the
        # mantissa near zero, the coordinate-difference form does not
        m = _rot2(theta) @ flip
        exact = float(tree.query(P @ m.T)[0].max())
        if exact < best:
            best, best_map = exact, m
    return best, best_map


def d_R_prefixes(C, D) -> np.ndarray:
    """d_R of every length-sorted prefix of C against D (exact engine).

    Only 1D and 2D; the i-th entry is min over O(R^n) of
    d_H(f({p_1..p_{i+1}}), D).
    """
    P, Q = _points(C), _points(D)
    n = P.shape[1]
    order = np.argsort(np.linalg.norm(P, axis=1), kind="stable")
    P = P[order]
    if n == 1:
        tree = cKDTree(Q)
        plus = np.maximum.accumulate(tree.query(P)[0])
        minus = np.maximum.accumulate(tree.query(-P)[0])
        return np.minimum(plus, minus)
    if n == 2:
        return _dr_prefixes_2d(P, Q)
    raise ValueError("prefix profiles implemented for n <= 2 only")


# ---------------------------------------------------------------------------
# rotation machinery (3D)


def _minimal_rotation(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotation taking unit vector u to unit vector v by the smaller angle."""
    c = float(np.clip(u @ v, -1.0, 1.0))
    axis = np.cross(u, v)
    s = float(np.linalg.norm(axis))
    if s < 1e-14:
        if c > 0:
            return np.eye(3)
        # opposite vectors: rotate by pi about any perpendicular axis
        perp = np.eye(3)[np.argmin(np.abs(u))]
        perp = perp - (perp @ u) * u
        perp /= np.linalg.norm(perp)
        return 2.0 * np.outer(perp, perp) - np.eye(3)
    axis = axis / s
    K = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


def _axis_frame(a: np.ndarray) -> np.ndarray:
    """Columns (a, e2, e3): right-handed orthonormal frame with first axis a."""
    e2 = np.eye(3)[np.argmin(np.abs(a))]
    e2 = e2 - (e2 @ a) * a
    e2 /= np.linalg.norm(e2)
    e3 = np.cross(a, e2)
    return np.column_stack([a, e2, e3])


def _axis_stabilizer_maps(a: np.ndarray, p_az: float, q_az: float):
    """The four orthogonal maps fixing axis a pointwise that move azimuth
    p_az into {q_az, q_az + pi}."""
    E = _axis_frame(a)
    out = []
    for m2 in (
        _rot2(q_az - p_az),
        _rot2(q_az + math.pi - p_az),
        _ref2(0.5 * (p_az + q_az)),
        _ref2(0.5 * (p_az + q_az + math.pi)),
    ):
        block = np.eye(3)
        block[1:, 1:] = m2
        out.append(E @ block @ E.T)
    return out


def _approx_anchor_indices(P: np.ndarray, n: int):
    """Farthest-point anchors of the approximation construction;
    lexicographic tie-break; up to n-1 indices (fewer when degenerate)."""
    lengths = np.linalg.norm(P, axis=1)
    if lengths.max() < 1e-14:
        return []
    ties = np.nonzero(lengths >= lengths.max() - 1e-12 * max(1.0, lengths.max()))[0]
    i1 = min(ties, key=lambda j: tuple(P[j]))
    anchors = [int(i1)]
    if n == 3:
        u = P[i1] / lengths[i1]
        perp = P - np.outer(P @ u, u)
        pl = np.linalg.norm(perp, axis=1)
        if pl.max() > 1e-12 * max(1.0, lengths.max()):
            ties = np.nonzero(pl >= pl.max() - 1e-12 * max(1.0, pl.max()))[0]
            anchors.append(int(min(ties, key=lambda j: tuple(P[j]))))
    return anchors


def _approx_maps(P: np.ndarray, Q: np.ndarray):
    """Candidate orthogonal maps of the factor-2(n-1) construction."""
    n = P.shape[1]
    if n == 1:
        return [np.array([[1.0]]), np.array([[-1.0]])]
    anchors = _approx_anchor_indices(P, n)
    if not anchors:
        return [np.eye(n)]
    qlen = np.linalg.norm(Q, axis=1)
    Qnz = Q[qlen > 1e-14]
    if Qnz.shape[0] == 0:
        return [np.eye(n)]
    p1 = P[anchors[0]]
    p1_ang = math.atan2(p1[1], p1[0]) if n == 2 else None
    maps = []
    if n == 2:
        for q in Qnz:
            q_ang = math.atan2(q[1], q[0])
            maps.append(_rot2(q_ang - p1_ang))
            maps.append(_rot2(q_ang + math.pi - p1_ang))
            maps.append(_ref2(0.5 * (p1_ang + q_ang)))
            maps.append(_ref2(0.5 * (p1_ang + q_ang + math.pi)))
        return maps
    # n == 3
    u1 = p1 / np.linalg.norm(p1)
    q_units = Qnz / np.linalg.norm(Qnz, axis=1)[:, None]
    level1 = []
    for qu in q_units:
        level1.append(_minimal_rotation(u1, qu))
        level1.append(_minimal_rotation(u1, -qu))
    if len(anchors) == 1:
        return level1
    p2 = P[anchors[1]]
    for M1 in level1:
        a = M1 @ u1
        E = _axis_frame(a)
        p2r = E.T @ (M1 @ p2)
        p_az = math.atan2(p2r[2], p2r[1])
        for q in Qnz:
            qr = E.T @ q
            if math.hypot(qr[1], qr[2]) < 1e-12:
                continue
            q_az = math.atan2(qr[2], qr[1])
            for M2 in _axis_stabilizer_maps(a, p_az, q_az):
                maps.append(M2 @ M1)
    return maps or level1


def _best_over_maps(P: np.ndarray, Q: np.ndarray, maps):
    tree = cKDTree(Q)
    best, best_map = math.inf, None
    for M in maps:
        val = float(tree.query(P @ M.T)[0].max())
        if val < best:
            best, best_map = val, M
    return best, best_map


def _random_rotations(count: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    quat = rng.normal(size=(count, 4))
    quat /= np.linalg.norm(quat, axis=1)[:, None]
    w, x, y, z = quat.T
    R = np.empty((count, 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - z * w)
    R[:, 0, 2] = 2 * (x * z + y * w)
    R[:, 1, 0] = 2 * (x * y + z * w)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - x * w)
    R[:, 2, 0] = 2 * (x * z - y * w)
    R[:, 2, 1] = 2 * (y * z + x * w)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _rotvec_matrix(w: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(w))
    if angle < 1e-14:
        return np.eye(3)
    axis = w / angle
    K = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)


def _dr_exact_3d(P: np.ndarray, Q: np.ndarray):
    tree = cKDTree(Q)
    mirror = np.diag([1.0, 1.0, -1.0])
    cands = [np.eye(3)]
    cands.extend(_approx_maps(P, Q))
    rots = _random_rotations(GRID_3D)
    batch = np.einsum("tij,kj->tki", rots, P)
    d = tree.query(batch.reshape(-1, 3))[0].reshape(GRID_3D, -1).max(axis=1)
    cands.append(rots[int(d.argmin())])
    batch = np.einsum("tij,kj->tki", rots, P @ mirror.T)
    d = tree.query(batch.reshape(-1, 3))[0].reshape(GRID_3D, -1).max(axis=1)
    cands.append(rots[int(d.argmin())] @ mirror)
    best, best_map = _best_over_maps(P, Q, cands)
    # local pattern-search refinement in rotation-vector coordinates
    dirs = np.concatenate([
        np.eye(3),
        -np.eye(3),
        np.array(list(product((-1.0, 1.0), repeat=3))) / math.sqrt(3),
    ])
    radius = 0.2
    for _ in range(60):
        improved = False
        for w in dirs:
            M = _rotvec_matrix(radius * w) @ best_map
            val = float(tree.query(P @ M.T)[0].max())
            if val < best - 1e-15:
                best, best_map, improved = val, M, True
        if not improved:
            radius /= 2.0
            if radius < 1e-10:
                break
    return best, best_map


def d_R_exact_small(C, D):
    """(value, map): min over all orthogonal maps of d_H(f(C), D) by dense
    candidate search with local refinement (n <= 3)."""
    P, Q = _points(C), _points(D)
    if P.shape[0] == 0 or Q.shape[0] == 0:
        raise ValueError("empty point set")
    n = P.shape[1]
    if n == 1:
        tree = cKDTree(Q)
        plus = float(tree.query(P)[0].max())
        minus = float(tree.query(-P)[0].max())
        if plus <= minus:
            return plus, np.array([[1.0]])
        return minus, np.array([[-1.0]])
    if n == 2:
        return _dr_full_2d(P, Q)
    return _dr_exact_3d(P, Q)


def d_R_approx(C, D, delta: float = DEFAULT_DELTA, thorough: bool = False):
    """Upper bound on d_R within a factor 2(n-1)(1+delta) of the optimum,
    from the farthest-point anchor construction (n >= 2; exact in 1D)."""
    P, Q = _points(C), _points(D)
    if P.shape[0] == 0 or Q.shape[0] == 0:
        raise ValueError("empty point set")
    maps = _approx_maps(P, Q)
    if thorough:
        # enumerate every tied anchor choice by small perturbations of order
        lengths = np.linalg.norm(P, axis=1)
        ties = np.nonzero(lengths >= lengths.max() - 1e-12)[0]
        for t in ties:
            Pt = np.concatenate([[P[t]], np.delete(P, t, axis=0)])
            maps.extend(_approx_maps(Pt, Q))
    val, _ = _best_over_maps(P, Q, maps)
    return val


def approx_factor_bound(n: int, delta: float = DEFAULT_DELTA) -> float:
    return 1.0 if n == 1 else 2.0 * (n - 1) * (1.0 + delta)


# ---------------------------------------------------------------------------
# boundary-tolerant distances


def _resolve_engine(engine: str, size_c: int, size_d: int) -> str:
    if engine == "auto":
        return "exact" if max(size_c, size_d) <= EXACT_SMALL_MAX else "approx"
    if engine not in ("exact", "approx"):
        raise ValueError(f"unknown d_R engine {engine!r}")
    return engine


def d_M(C, D, alpha: float, engine: str = "auto",
        delta: float = DEFAULT_DELTA) -> float:
    """One-sided boundary-tolerant distance: the max over length-sorted
    prefixes {p_1..p_i} of min(alpha - |p_i|, d_R(prefix, D))."""
    P, Q = _points(C), _points(D)
    lengths = np.linalg.norm(P, axis=1)
    order = np.argsort(lengths, kind="stable")
    P, lengths = P[order], lengths[order]
    if alpha < lengths[-1] - 1e-9 * max(1.0, alpha):
        raise ValueError("alpha is smaller than the cluster radius")
    gains = alpha - lengths
    n = P.shape[1]
    eng = _resolve_engine(engine, len(P), len(Q))
    if eng == "exact" and n <= 2:
        # trailing zero-gain points cannot raise the max-min
        keep = int(np.searchsorted(-gains, 0.0, side="left"))
        if keep == 0:
            return 0.0
        if n == 1:
            dr = d_R_prefixes(P[:keep], Q)
        else:
            dr = _dr_prefixes_2d(P[:keep], Q, gains=gains[:keep])
        return float(np.max(np.minimum(gains[:keep], dr)))
    best = 0.0
    tree = cKDTree(Q)
    for i in range(len(P)):
        if gains[i] <= best:
            break
        prefix = P[: i + 1]
        if eng == "exact":
            dr_i, _ = d_R_exact_small(prefix, Q)
        else:
            dr_i = d_R_approx(prefix, Q, delta)
        best = max(best, min(float(gains[i]), float(dr_i)))
    return best


def d_C(sigma, xi, alpha: float, engine: str = "auto",
        delta: float = DEFAULT_DELTA) -> float:
    """Boundary-tolerant cluster distance: max of the two one-sided d_M."""
    return max(
        d_M(sigma, xi, alpha, engine, delta),
        d_M(xi, sigma, alpha, engine, delta),
    )


# ---------------------------------------------------------------------------
# Earth Mover's Distance on isosets


@dataclass(frozen=True)
class TransportPlan:
    flows: np.ndarray  # fractions, shape (m_A, m_B)
    cost: float
    row_marginals: np.ndarray
    col_marginals: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.flows, dtype=float)
        if np.any(f < -1e-12) or np.any(f > 1 + 1e-12):
            raise ValueError("flows must lie in [0, 1]")
        if abs(float(f.sum()) - 1.0) > 1e-9:
            raise ValueError("total flow must be 1")
        if np.any(f.sum(axis=1) > np.asarray(self.row_marginals) + 1e-12):
            raise ValueError("row marginal violated")
        if np.any(f.sum(axis=0) > np.asarray(self.col_marginals) + 1e-12):
            raise ValueError("column marginal violated")
        object.__setattr__(self, "flows", f)


def _min_cost_transport(costs: np.ndarray, supply, demand):
    """Exact transportation optimum by successive shortest augmenting paths
    with node potentials (integer supplies/demands)."""
    na, nb = costs.shape
    supply = [int(s) for s in supply]
    demand = [int(d) for d in demand]
    flow = np.zeros((na, nb), dtype=np.int64)
    pot_a = [0.0] * na
    pot_b = [0.0] * nb
    remaining = sum(supply)
    while remaining > 0:
        # Dijkstra over bipartite residual graph from all sources with supply
        dist_a = [math.inf] * na
        dist_b = [math.inf] * nb
        prev_b = [-1] * nb   # source row used to reach column j
        prev_a = [-1] * na   # column used to reach row i (via residual arc)
        heap = []
        for i in range(na):
            if supply[i] > 0:
                dist_a[i] = 0.0
                heapq.heappush(heap, (0.0, 0, i))
        while heap:
            d, side, u = heapq.heappop(heap)
            if side == 0:
                if d > dist_a[u] + 1e-15:
                    continue
                for j in range(nb):
                    w = costs[u, j] - pot_a[u] - pot_b[j]
                    if dist_a[u] + w < dist_b[j] - 1e-15:
                        dist_b[j] = dist_a[u] + w
                        prev_b[j] = u
                        heapq.heappush(heap, (dist_b[j], 1, j))
            else:
                if d > dist_b[u] + 1e-15:
                    continue
                for i in range(na):
                    if flow[i, u] > 0:
                        w = -(costs[i, u] - pot_a[i] - pot_b[u])
                        if dist_b[u] + w < dist_a[i] - 1e-15:
                            dist_a[i] = dist_b[u] + w
                            prev_a[i] = u
                            heapq.heappush(heap, (dist_a[i], 0, i))
        target = min(
            (j for j in range(nb) if demand[j] > 0),
            key=lambda j: dist_b[j],
            default=-1,
        )
        if target < 0 or math.isinf(dist_b[target]):
            raise RuntimeError("transportation problem is infeasible")
        # trace augmenting path and find bottleneck
        path = []  # (i, j, direction): +1 pushes on (i, j), -1 reduces
        j = target
        bottleneck = demand[j]
        while True:
            i = prev_b[j]
            path.append((i, j, +1))
            if supply[i] > 0 and dist_a[i] == 0.0 and prev_a[i] == -1:
                bottleneck = min(bottleneck, supply[i])
                break
            j2 = prev_a[i]
            path.append((i, j2, -1))
            bottleneck = min(bottleneck, int(flow[i, j2]))
            j = j2
        for i, jj, sign in path:
            flow[i, jj] += sign * bottleneck
        src = path[-1][0]
        supply[src] -= bottleneck
        demand[target] -= bottleneck
        remaining -= bottleneck
        for i in range(na):
            if not math.isinf(dist_a[i]):
                pot_a[i] += dist_a[i]
        for j in range(nb):
            if not math.isinf(dist_b[j]):
                pot_b[j] += dist_b[j]
    return flow


def emd(A: Isoset, B: Isoset, engine: str = "auto",
        delta: float = DEFAULT_DELTA):
    """(cost, TransportPlan): exact Earth Mover's Distance between two
    isosets at the same radius, ground cost d_C."""
    if abs(A.alpha - B.alpha) > 1e-9 * max(1.0, A.alpha):
        raise ValueError("isosets must share the radius alpha")
    wa = [c.weight for c in A.classes]
    wb = [c.weight for c in B.classes]
    if abs(float(sum(wa)) - 1.0) > 1e-9 or abs(float(sum(wb)) - 1.0) > 1e-9:
        raise ValueError("isoset weights must sum to 1")
    costs = np.array([
        [
            d_C(ca.representative, cb.representative, A.alpha, engine, delta)
            for cb in B.classes
        ]
        for ca in A.classes
    ])
    denom = math.lcm(*(w.denominator for w in wa + wb))
    supply = [int(w * denom) for w in wa]
    demand = [int(w * denom) for w in wb]
    flow = _min_cost_transport(costs, supply, demand)
    flows = flow.astype(float) / denom
    cost = float((flows * costs).sum())
    plan = TransportPlan(
        flows=flows,
        cost=cost,
        row_marginals=np.array([float(w) for w in wa]),
        col_marginals=np.array([float(w) for w in wb]),
    )
    return cost, plan


# ---------------------------------------------------------------------------
# bottleneck distance for sets sharing a cell (test utility)


def _periodic_distance_matrix(S, Q) -> np.ndarray:
    basis = S.cell.basis
    n = S.dim
    offsets = np.array(list(product((-1, 0, 1), repeat=n)), dtype=float)
    trans = offsets @ basis
    ps, pq = S.cartesian_motif, Q.cartesian_motif
    diff = ps[:, None, None, :] - (pq[None, :, None, :] + trans[None, None, :, :])
    return np.linalg.norm(diff, axis=-1).min(axis=2)


def _has_perfect_matching(adj: np.ndarray) -> bool:
    m = adj.shape[0]
    match = [-1] * m  # match[j] = row assigned to column j

    def try_assign(i, seen):
        for j in range(m):
            if adj[i, j] and not seen[j]:
                seen[j] = True
                if match[j] < 0 or try_assign(match[j], seen):
                    match[j] = i
                    return True
        return False

    for i in range(m):
        if not try_assign(i, [False] * m):
            return False
    return True


def bottleneck_distance_common_cell(S, Q) -> float:
    """Bottleneck matching distance between motifs of two sets sharing a
    unit cell (the small-perturbation regime), periodic wrap included."""
    if S.dim != Q.dim or not np.allclose(S.cell.basis, Q.cell.basis):
        raise ValueError("sets must share a unit cell")
    if S.m != Q.m:
        raise ValueError("sets must have motifs of equal size")
    dmat = _periodic_distance_matrix(S, Q)
    values = np.unique(dmat)
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(dmat <= values[mid] + 1e-12):
            hi = mid
        else:
            lo = mid + 1
    return float(values[lo])
