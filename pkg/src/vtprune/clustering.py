"""Density peaks clustering with k-nearest-neighbour density estimates (DPC-KNN).

Centers are points that are simultaneously dense (small mean squared
distance to their k nearest neighbours) and well separated (far from any
denser point).  The density exponent is normalised by the mean over all
points, which makes center selection invariant under uniform rescaling of
the inputs; distances themselves are raw Euclidean distances in the given
feature space.  All ties — in density, in the rho*delta ranking, and in
nearest-center assignment — break toward the lower point index, so results
are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class ClusterResult:
    """Labels, rank-ordered center indices, and the per-point rho/delta values."""

    labels: np.ndarray     # (P,) int, cluster index in [0, n_clusters)
    centers: np.ndarray    # (n_clusters,) int point indices, ordered by descending rho*delta
    densities: np.ndarray  # (P,) float64 rho
    deltas: np.ndarray     # (P,) float64 delta

    @property
    def n_clusters(self) -> int:
        return len(self.centers)


def dpc_knn(points: np.ndarray, k_knn: int, n_clusters: int) -> ClusterResult:
    """Cluster P points (P x C) into n_clusters groups around density peaks.

    k_knn is clamped to P-1.  Every point is assigned to its nearest
    center; each center keeps its own cluster, so all n_clusters clusters
    are nonempty.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n == 0:
        raise ValueError("cannot cluster an empty point set")
    if not 1 <= n_clusters <= n:
        raise ValueError(f"n_clusters must be in [1, {n}], got {n_clusters}")
    k = min(max(k_knn, 1), n - 1)

    sq = cdist(pts, pts, "sqeuclidean")
    dist = np.sqrt(sq)

    # rho: exp of the negative mean squared kNN distance, normalised by the
    # mean over points so the exponent is dimensionless.
    if k == 0:
        rho = np.ones(n)
    else:
        sq_sorted = np.sort(sq, axis=1)
        mean_knn = sq_sorted[:, 1:k + 1].mean(axis=1)
        scale = mean_knn.mean()
        rho = np.ones(n) if scale == 0.0 else np.exp(-mean_knn / scale)

    # delta: distance to the nearest point that precedes i in the strict
    # density order (higher rho, ties toward lower index).  The first point
    # in that order gets the maximum pairwise distance.
    order = np.lexsort((np.arange(n), -rho))  # density rank, best first
    delta = np.empty(n)
    delta[order[0]] = dist.max()
    for pos in range(1, n):
        i = order[pos]
        delta[i] = dist[i, order[:pos]].min()

    score = rho * delta
    ranked = np.lexsort((np.arange(n), -score))
    centers = ranked[:n_clusters].copy()

    # Nearest-center assignment; distance ties go to the center with the
    # lower point index, and every center keeps itself.
    to_centers = dist[:, centers]
    center_order = np.argsort(centers, kind="stable")
    best = np.full(n, -1, dtype=np.int64)
    best_d = np.full(n, np.inf)
    for rank_pos in center_order:  # visit centers by ascending point index
        d = to_centers[:, rank_pos]
        take = d < best_d
        best[take] = rank_pos
        best_d[take] = d[take]
    labels = best
    labels[centers] = np.arange(n_clusters)

    return ClusterResult(
        labels=labels.astype(np.int64),
        centers=centers.astype(np.int64),
        densities=rho,
        deltas=delta,
    )


def cluster_means(points: np.ndarray, labels: np.ndarray, n_clusters: int) -> np.ndarray:
    """Arithmetic mean of each cluster's members, accumulated in float64."""
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty((n_clusters, pts.shape[1]), dtype=np.float64)
    for c in range(n_clusters):
        members = pts[labels == c]
        out[c] = members.sum(axis=0) / len(members)
    return out
