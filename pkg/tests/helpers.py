"""Shared test utilities: independent oracles and random-instance builders.

Everything here is deliberately written from the definitions (dense grids,
exhaustive enumeration) so package results are checked against code that
shares no implementation path with them.
"""

import itertools

import numpy as np

import perigeo as pg


def rot2(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_orthogonal(rng, n: int) -> np.ndarray:
    M = np.linalg.qr(rng.normal(size=(n, n)))[0]
    if rng.random() < 0.5:
        M[0] = -M[0]
    return M


def random_periodic_set(rng, n: int, m: int, min_sep: float = 0.2,
                        skew: float = 0.15) -> pg.PeriodicSet:
    """Random cell close to the identity with m well-separated motif points."""
    cell = pg.UnitCell(np.eye(n) + skew * rng.normal(size=(n, n)))
    for _ in range(1000):
        motif = rng.random((m, n))
        try:
            S = pg.PeriodicSet(cell, motif)
        except pg.DataError:
            continue
        sep = pg.core.min_interpoint_distance(S)
        if sep >= min_sep * cell.volume ** (1 / n) / max(m, 1) ** (1 / n):
            return S
    raise RuntimeError("could not draw a well-separated motif")


def jitter_set(rng, S: pg.PeriodicSet, eps: float):
    """Copy of S with every motif point moved by < eps (Cartesian).

    Returns (jittered set, largest actual displacement)."""
    n, m = S.dim, S.m
    dirs = rng.normal(size=(m, n))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    radii = eps * (0.2 + 0.79 * rng.random(m))
    moves = dirs * radii[:, None]
    frac = pg.core.fold_fractions(S.motif + moves @ S.cell.inv_basis)
    return pg.PeriodicSet(S.cell, frac), float(radii.max())


UNIMODULAR = {
    1: [np.array([[1]]), np.array([[-1]])],
    2: [
        np.array([[1, 0], [0, 1]]),
        np.array([[1, 1], [0, 1]]),
        np.array([[0, 1], [1, 0]]),
        np.array([[1, 0], [1, 1]]),
        np.array([[2, 1], [1, 1]]),
    ],
    3: [
        np.eye(3, dtype=int),
        np.array([[1, 1, 0], [0, 1, 0], [0, 0, 1]]),
        np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]]),
        np.array([[1, 0, 1], [0, 1, 0], [0, 0, 1]]),
    ],
}


def coverage_multiplicity_1d(points, t: float, samples: int = 10 ** 6):
    """Multiplicity of radius-t interval coverage at midpoint samples of the
    unit period (brute-force density oracle)."""
    xs = (np.arange(samples) + 0.5) / samples
    mult = np.zeros(samples, dtype=int)
    for p in points:
        d = np.abs(xs - p)
        d = np.minimum(d, 1.0 - d)
        mult += d <= t
    return mult


def psi_bruteforce_1d(points, k: int, t: float, samples: int = 10 ** 6) -> float:
    mult = coverage_multiplicity_1d(points, t, samples)
    return float(np.mean(mult == k))


def dr_scan_2d(C, D, n_angles: int = 20000) -> float:
    """Independent dense rotation+reflection scan of d_R (2D oracle)."""
    C = np.atleast_2d(np.asarray(C, float))
    D = np.atleast_2d(np.asarray(D, float))
    best = np.inf
    for reflect in (False, True):
        base = C @ np.diag([1.0, -1.0]) if reflect else C
        for th in np.linspace(0, 2 * np.pi, n_angles, endpoint=False):
            P = base @ rot2(th).T
            d = np.sqrt(((P[:, None, :] - D[None, :, :]) ** 2).sum(-1))
            best = min(best, d.min(axis=1).max())
    return float(best)


def transport_bruteforce(costs, supply, demand):
    """Exact transportation optimum by enumerating spanning-tree vertices of
    the transportation polytope (independent EMD oracle, small instances)."""
    costs = np.asarray(costs, float)
    na, nb = costs.shape
    nodes = na + nb
    edges = [(i, j) for i in range(na) for j in range(nb)]
    best = np.inf
    for tree in itertools.combinations(edges, nodes - 1):
        parent = list(range(nodes))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for i, j in tree:
            a, b = find(i), find(na + j)
            if a == b:
                acyclic = False
                break
            parent[a] = b
        if not acyclic or len({find(x) for x in range(nodes)}) != 1:
            continue
        # leaf elimination solves the unique flow on the tree
        flows = {}
        need = list(supply) + [-d for d in demand]
        adj = {x: [] for x in range(nodes)}
        for i, j in tree:
            adj[i].append((na + j, (i, j)))
            adj[na + j].append((i, (i, j)))
        remaining = {x: set(adj[x]) for x in range(nodes)}
        order = [x for x in range(nodes) if len(remaining[x]) == 1]
        removed = set()
        while order:
            x = order.pop()
            live = [e for e in remaining[x] if e[1] not in removed]
            if not live:
                continue
            y, e = live[0]
            flow = need[x] if x < na else -need[x]
            flows[e] = flow
            need[x] = 0
            if y < na:
                need[y] -= flow
            else:
                need[y] += flow
            removed.add(e)
            remaining[y] = {v for v in remaining[y] if v[1] not in removed}
            if len(remaining[y]) == 1:
                order.append(y)
        if any(f < -1e-12 for f in flows.values()):
            continue
        cost = sum(f * costs[e] for e, f in flows.items())
        best = min(best, cost)
    return best
