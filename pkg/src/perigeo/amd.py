"""Average Minimum Distances of a periodic point set.

AMD_j is the motif average of the distance from each motif point to its
j-th nearest neighbor in the infinite set.  Neighbor search expands cell
shells in Chebyshev order and stops once every point's k-th distance is
certified against the closest possible point of the next shell.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.spatial import cKDTree

from .core import PeriodicSet


@dataclass(frozen=True)
class AmdVector:
    k: int
    values: np.ndarray            # (k,), non-decreasing
    per_point_matrix: np.ndarray  # (m, k) distances d_ij, rows non-decreasing

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(
            self, "per_point_matrix", np.asarray(self.per_point_matrix, dtype=float)
        )


def _shell_offsets(n: int, s: int) -> np.ndarray:
    """Integer offsets with Chebyshev norm exactly s."""
    if s == 0:
        return np.zeros((1, n), dtype=int)
    offs = [c for c in product(range(-s, s + 1), repeat=n) if max(map(abs, c)) == s]
    return np.array(offs, dtype=int)


def nearest_neighbor_distances(S: PeriodicSet, k: int) -> np.ndarray:
    """(m, k) matrix of certified distances to the k nearest neighbors of
    each motif point (the point itself excluded)."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    cell = S.cell
    n = cell.dim
    motif_cart = S.cartesian_motif
    # distance between opposite cell faces along each axis: a cell whose
    # Chebyshev shell index is s sits at least (s - 1) * h_min away
    h_min = float(1.0 / np.linalg.norm(cell.inv_basis, axis=0).max())

    cloud_parts = []
    s = 0
    while True:
        offsets = _shell_offsets(n, s)
        cloud_parts.append(offsets @ cell.basis)
        cloud = np.concatenate(cloud_parts)
        points = (motif_cart[None, :, :] + cloud[:, None, :]).reshape(-1, n)
        if points.shape[0] > k:
            tree = cKDTree(points)
            dist, _ = tree.query(motif_cart, k=k + 1)
            dist = np.atleast_2d(dist)[:, 1:]
            if float(dist[:, -1].max()) < s * h_min:
                return dist
        s += 1


def amd(S: PeriodicSet, k: int) -> AmdVector:
    """AMD^(k): motif averages of the k nearest-neighbor distances."""
    per_point = nearest_neighbor_distances(S, k)
    return AmdVector(k=k, values=per_point.mean(axis=0), per_point_matrix=per_point)
