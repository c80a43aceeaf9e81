"""Reference neighbourhood strategies: K-means clusters and geodesic k-NN."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .affinity import DEFAULT_S, knn_table, sq_distances
from .agnn import NeighborSet
from .core import DegenerateClusterError, LocalBasis, _as_points, compute_pca


class ConnectivityError(ValueError):
    pass


@dataclass(frozen=True)
class KmeansModel:
    centroids: np.ndarray
    assignments: np.ndarray
    bases: list = field(default_factory=list)
    distortion_history: tuple = ()

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)


def _kmeanspp(X: np.ndarray, C: int, rng: np.random.Generator) -> np.ndarray:
    m = len(X)
    centers = [int(rng.integers(m))]
    d2 = sq_distances(X, X[centers])[:, 0]
    for _ in range(1, C):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a center
            nxt = int(rng.integers(m))
        else:
            nxt = int(rng.choice(m, p=d2 / total))
        centers.append(nxt)
        d2 = np.minimum(d2, sq_distances(X, X[[nxt]])[:, 0])
    return X[centers].copy()


def _assign(X: np.ndarray, centroids: np.ndarray):
    d = sq_distances(X, centroids)
    lab = np.argmin(d, axis=1)  # first index wins ties
    return lab, d[np.arange(len(X)), lab]


def _cluster_basis(X: np.ndarray, members: np.ndarray, centroid: np.ndarray) -> LocalBasis:
    try:
        return compute_pca(X[members])
    except DegenerateClusterError:
        n = X.shape[1]
        return LocalBasis(centroid.copy(), np.zeros((n, 0)), np.zeros(0))


def kmeans_fit(train, C: int, seed: int = 0, max_iter: int = 100, with_bases: bool = True) -> KmeansModel:
    """Lloyd's algorithm from k-means++ seeding.

    Runs until assignments stop changing or ``max_iter`` sweeps. An empty
    cluster is re-seeded at the point farthest from its nearest centroid.
    """
    X = _as_points(train)
    m = len(X)
    if not 1 <= C <= m:
        raise ValueError(f"need 1 <= C <= m (got C={C}, m={m})")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(X, C, rng)
    labels, dmin = _assign(X, centroids)
    history = [float(dmin.sum())]
    for _ in range(max_iter):
        for k in range(C):
            members = labels == k
            if members.any():
                centroids[k] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(dmin))
                centroids[k] = X[far]
                dmin[far] = 0.0
        new_labels, dmin = _assign(X, centroids)
        history.append(float(dmin.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    labels, _ = _assign(X, centroids)
    bases = []
    if with_bases:
        bases = [_cluster_basis(X, np.flatnonzero(labels == k), centroids[k]) for k in range(C)]
    return KmeansModel(centroids, labels, bases, tuple(history))


def kmeans_select(y, model: KmeansModel) -> int:
    """Index of the nearest centroid (lowest index on ties)."""
    y = np.asarray(y, dtype=float)
    return int(np.argmin(np.sum((model.centroids - y) ** 2, axis=1)))


def kmeans_select_batch(Y, model: KmeansModel) -> np.ndarray:
    return np.argmin(sq_distances(np.atleast_2d(np.asarray(Y, float)), model.centroids), axis=1)


def distance_graph(train, s: int = DEFAULT_S) -> sp.csr_matrix:
    """Symmetric s-NN graph with Euclidean edge lengths."""
    X = _as_points(train)
    m = len(X)
    s = min(s, m - 1)
    nbrs = knn_table(X, s)
    r = np.repeat(np.arange(m), s)
    c = nbrs.ravel()
    w = np.sqrt(np.sum((X[r] - X[c]) ** 2, axis=1))
    G = sp.coo_matrix((w, (r, c)), shape=(m, m)).tocsr()
    G = G.maximum(G.T)
    # zero-length edges would vanish from the sparse structure
    G.data[G.data == 0] = 1e-300
    return G.tocsr()


def geodesic_neighbors(graph: sp.csr_matrix, train, y, k: int, s: int = DEFAULT_S) -> NeighborSet:
    """k training points closest to ``y`` in shortest-path distance.

    ``y`` is attached to its s Euclidean-nearest training points, then
    Dijkstra runs from the attached node. Affinities in the result hold
    the geodesic distances.
    """
    X = _as_points(train)
    m = len(X)
    y = np.asarray(y, dtype=float)
    d = np.sqrt(np.sum((X - y) ** 2, axis=1))
    s = min(s, m)
    attach = np.argsort(d, kind="stable")[:s]
    G = sp.lil_matrix((m + 1, m + 1))
    G[:m, :m] = graph
    w = np.maximum(d[attach], 1e-300)
    G[m, attach] = w
    G[attach, m] = w
    dist = dijkstra(G.tocsr(), directed=False, indices=m)[:m]
    reachable = np.isfinite(dist)
    if reachable.sum() < k:
        raise ConnectivityError("insufficient connectivity")
    order = np.argsort(dist, kind="stable")[:k]
    return NeighborSet(order, dist[order])


class GeodesicSearcher:
    """Batch GeoD queries using all-pairs training geodesics.

    Since the query node only touches its attachment edges, its distance
    to node v is min_j (|y - d_j| + G[j, v]) over attachments j, which is
    what a per-query Dijkstra returns.
    """

    def __init__(self, train, s: int = DEFAULT_S, k: int | None = None):
        self.train = _as_points(train)
        self.s = min(s, len(self.train) - 1)
        self.k = self.train.shape[1] + 1 if k is None else int(k)
        self.graph = distance_graph(self.train, self.s)
        self.geo = dijkstra(self.graph, directed=False)

    def distances(self, y) -> np.ndarray:
        d = np.sqrt(np.sum((self.train - np.asarray(y, float)) ** 2, axis=1))
        attach = np.argsort(d, kind="stable")[: self.s]
        return np.min(d[attach, None] + self.geo[attach], axis=0)

    def query(self, y) -> NeighborSet:
        dist = self.distances(y)
        if np.isfinite(dist).sum() < self.k:
            raise ConnectivityError("insufficient connectivity")
        order = np.argsort(dist, kind="stable")[: self.k]
        return NeighborSet(order, dist[order])

    def query_masks(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = np.zeros((len(Y), len(self.train)), dtype=bool)
        for i, y in enumerate(Y):
            out[i, self.query(y).indices] = True
        return out
