"""Geometry-driven overlapping clusters (GOC).

Each cluster grows from a K-means-seeded center by repeatedly adding the
K nearest neighbours of every current member. K and the number of growth
steps L are picked per cluster to minimize a normalized decay index, the
share of principal directions needed to hold a fixed fraction of the
cluster's energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import knn_table, sq_distances
from .baselines import kmeans_fit
from .core import LocalBasis, _as_points, compute_pca

DEFAULT_C = 64
DEFAULT_C3 = 0.5
DEFAULT_GAMMA = 150.0
DEFAULT_R = 8
ZERO_DIST = 1e-9


class ClusterTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class Cluster:
    center_index: int
    members: np.ndarray  # sorted training indices
    L: int
    K: int

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class GocParams:
    C: int = DEFAULT_C
    c3: float = DEFAULT_C3
    L0: int = 1
    Kmax: int = 40
    Lmax: int = 5
    gamma: float = DEFAULT_GAMMA
    r: int = DEFAULT_R
    fixed_LK: tuple[int, int] | None = None  # skip the search when given

    def __post_init__(self):
        if not 0 < self.c3 < 1:
            raise ValueError("c3 must lie in (0, 1)")
        if self.C < 1:
            raise ValueError("C must be >= 1")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.L0 < 0 or self.Kmax < 1 or self.Lmax < 1:
            raise ValueError("search bounds must be positive")


@dataclass(frozen=True)
class ClusterModel:
    clusters: list
    bases: list

    def __post_init__(self):
        if len(self.clusters) != len(self.bases):
            raise ValueError("one basis per cluster required")

    def __len__(self) -> int:
        return len(self.clusters)


def seed_centers(train, C: int, seed: int = 0) -> np.ndarray:
    """K-means, then snap every cluster mean to its nearest training point."""
    X = _as_points(train)
    if C > len(X):
        raise ValueError(f"C={C} exceeds the number of training samples {len(X)}")
    model = kmeans_fit(X, C, seed=seed, with_bases=False)
    return np.argmin(sq_distances(model.centroids, X), axis=1)


class _Expander:
    """Cluster growth over a cached K-NN table (columns sorted by distance)."""

    def __init__(self, X: np.ndarray, Kmax: int):
        self.m = len(X)
        self.kmax = min(Kmax, self.m - 1)
        self.table = knn_table(X, self.kmax)

    def grow(self, center: int, K: int, L: int) -> np.ndarray:
        if not 1 <= K < self.m:
            raise ValueError(f"K must satisfy 1 <= K < m (got K={K}, m={self.m})")
        if L < 0:
            raise ValueError("L must be >= 0")
        if K > self.kmax:
            raise ValueError("K exceeds the cached neighbour table")
        nbrs = self.table[:, :K]
        inside = np.zeros(self.m, dtype=bool)
        inside[center] = True
        inside[nbrs[center]] = True
        frontier = np.flatnonzero(inside)
        for _ in range(L):
            cand = np.unique(nbrs[frontier])
            new = cand[~inside[cand]]
            if new.size == 0:
                break
            inside[new] = True
            # only new members can contribute unseen neighbours
            frontier = new
        return np.flatnonzero(inside)


def expand_cluster(train, center: int, K: int, L: int) -> Cluster:
    X = _as_points(train)
    members = _Expander(X, K).grow(int(center), K, L)
    return Cluster(int(center), members, int(L), int(K))


def _decay(X: np.ndarray, c3: float) -> tuple[int, bool]:
    if len(X) < 2:
        raise ClusterTooSmallError("cluster too small")
    Xc = X - X.mean(axis=0)
    if len(X) > X.shape[1]:
        ev = np.linalg.eigvalsh(Xc.T @ Xc)
    else:
        ev = np.linalg.eigvalsh(Xc @ Xc.T)
    ev = np.clip(ev[::-1], 0.0, None)
    total = ev.sum()
    if not total > 0:
        return 1, True
    cum = np.cumsum(ev) / total
    # guard against the last prefix sum landing just under c3 by rounding
    I = int(np.searchsorted(cum, c3 * (1 - 1e-12), side="left")) + 1
    return min(I, min(len(X) - 1, X.shape[1])), False


def decay_index(cluster_samples, c3: float = DEFAULT_C3) -> int:
    """Fewest leading principal components holding at least ``c3`` of the energy.

    An all-identical cluster has no energy; it gets I = 1.
    """
    if not 0 < c3 < 1:
        raise ValueError("c3 must lie in (0, 1)")
    return _decay(_as_points(cluster_samples), c3)[0]


def _normalized(X: np.ndarray, members: np.ndarray, c3: float) -> float:
    if len(members) < 2:
        raise ClusterTooSmallError("cluster too small")
    I, _ = _decay(X[members], c3)
    return I / min(len(members) - 1, X.shape[1])


def normalized_decay(train, center: int, L: int, K: int, c3: float = DEFAULT_C3) -> float:
    X = _as_points(train)
    return _normalized(X, _Expander(X, K).grow(int(center), K, L), c3)


def _search(X: np.ndarray, exp: _Expander, center: int, p: GocParams) -> tuple[int, int]:
    K_best, best = 1, np.inf
    for K in range(1, exp.kmax + 1):
        v = _normalized(X, exp.grow(center, K, p.L0), p.c3)
        if v < best:
            K_best, best = K, v
    L_best, best = 1, np.inf
    for L in range(1, p.Lmax + 1):
        v = _normalized(X, exp.grow(center, K_best, L), p.c3)
        if v < best:
            L_best, best = L, v
    return L_best, K_best


def optimize_params(train, center: int, p: GocParams | None = None) -> tuple[int, int]:
    """Coordinate search for (L, K): scan K at L = L0, then L at the chosen K.

    Ties go to the smallest value.
    """
    p = p or GocParams()
    X = _as_points(train)
    return _search(X, _Expander(X, p.Kmax), int(center), p)


def build_model(train, p: GocParams | None = None, seed: int = 0) -> ClusterModel:
    p = p or GocParams()
    X = _as_points(train)
    centers = seed_centers(X, p.C, seed)
    kmax = p.Kmax if p.fixed_LK is None else max(p.Kmax, p.fixed_LK[1])
    exp = _Expander(X, kmax)
    clusters, bases = [], []
    for c in centers:
        c = int(c)
        L, K = p.fixed_LK if p.fixed_LK is not None else _search(X, exp, c, p)
        members = exp.grow(c, K, L)
        clusters.append(Cluster(c, members, int(L), int(K)))
        bases.append(compute_pca(X[members]))
    return ClusterModel(clusters, bases)


def selection_objective(Y, bases: list, gamma: float = DEFAULT_GAMMA, r: int = DEFAULT_R) -> np.ndarray:
    """(q, C) matrix of ||y - mu|| - gamma * ||Phi_r' (y - mu)|| / ||y - mu||."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    out = np.empty((len(Y), len(bases)))
    for k, b in enumerate(bases):
        D = Y - b.centroid
        dist = np.sqrt(np.sum(D * D, axis=1))
        proj = np.sqrt(np.sum((D @ b.leading(r)) ** 2, axis=1))
        safe = np.where(dist < ZERO_DIST, 1.0, dist)
        out[:, k] = np.where(dist < ZERO_DIST, -gamma, dist - gamma * proj / safe)
    return out


def select_basis(y, model, gamma: float = DEFAULT_GAMMA, r: int = DEFAULT_R) -> int:
    """Cluster whose subspace best fits ``y`` relative to its centroid (lowest index on ties)."""
    bases = model.bases if hasattr(model, "bases") else model
    if len(bases) == 0:
        raise ValueError("empty model")
    return int(np.argmin(selection_objective(y, bases, gamma, r)[0]))


def select_basis_batch(Y, model, gamma: float = DEFAULT_GAMMA, r: int = DEFAULT_R) -> np.ndarray:
    bases = model.bases if hasattr(model, "bases") else model
    if len(bases) == 0:
        raise ValueError("empty model")
    return np.argmin(selection_objective(Y, bases, gamma, r), axis=1)
