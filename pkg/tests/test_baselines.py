import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy.sparse.csgraph import dijkstra

from manifold_restore.baselines import (
    ConnectivityError,
    GeodesicSearcher,
    distance_graph,
    geodesic_neighbors,
    kmeans_fit,
    kmeans_select,
)
from manifold_restore.synthetic import two_arcs


def test_kmeans_single_cluster(rng):
    X = rng.normal(size=(20, 3))
    m = kmeans_fit(X, 1)
    np.testing.assert_allclose(m.centroids[0], X.mean(0))


def test_kmeans_point_masses():
    X = np.array([[0.0, 0.0]] * 5 + [[4.0, 4.0]] * 5)
    m = kmeans_fit(X, 2)
    assert sorted(map(tuple, m.centroids)) == [(0.0, 0.0), (4.0, 4.0)]
    assert m.distortion_history[-1] == 0.0


def test_kmeans_exhaustive_bipartition(rng):
    X = rng.normal(size=(12, 2))
    X[6:] += 6
    best = np.inf
    for bits in itertools.product([0, 1], repeat=11):
        lab = np.array((0,) + bits)
        if lab.all() or not lab.any():
            continue
        best = min(best, sum(np.sum((X[lab == k] - X[lab == k].mean(0)) ** 2) for k in (0, 1)))
    m = kmeans_fit(X, 2)
    assert m.distortion_history[-1] <= best * (1 + 1e-9)


@given(seed=st.integers(0, 10_000), C=st.integers(1, 6))
def test_kmeans_invariants(seed, C):
    X = np.random.default_rng(seed).normal(size=(30, 3))
    m = kmeans_fit(X, C, seed=seed)
    h = np.array(m.distortion_history)
    assert np.all(np.diff(h) <= 1e-9 * max(h[0], 1))
    d = np.sum((X[:, None] - m.centroids[None]) ** 2, axis=2)
    np.testing.assert_array_equal(m.assignments, np.argmin(d, axis=1))
    assert np.all(np.isfinite(m.centroids)) and len(m.bases) == C


def test_kmeans_select_ties_and_oracle(rng):
    X = rng.normal(size=(40, 2))
    m = kmeans_fit(X, 4)
    for k in range(4):
        assert kmeans_select(m.centroids[k], m) == k
    from manifold_restore.baselines import KmeansModel

    tie = KmeansModel(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.zeros(0, int))
    assert kmeans_select([0.0, 0.0], tie) == 0
    for y in rng.normal(size=(10, 2)):
        assert kmeans_select(y, m) == min(range(4), key=lambda k: (np.sum((y - m.centroids[k]) ** 2), k))


def test_kmeans_rejects_bad_C():
    with pytest.raises(ValueError):
        kmeans_fit(np.zeros((3, 2)), 4)


def test_geodesic_fully_connected_equals_euclidean(rng):
    X = rng.normal(size=(15, 3))
    y = rng.normal(size=3)
    g = distance_graph(X, s=14)
    ns = geodesic_neighbors(g, X, y, k=5, s=15)
    eu = np.argsort(np.sum((X - y) ** 2, 1), kind="stable")[:5]
    assert set(ns.indices) == set(eu)


def test_geodesic_chain():
    X = np.array([[0.0], [1.0], [2.0]])
    chain = sp.csr_matrix(np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], float))
    ns = geodesic_neighbors(chain, X, [-0.5], k=2, s=1)
    assert ns.indices.tolist() == [0, 1]
    np.testing.assert_allclose(ns.affinities, [0.5, 1.5])


def test_geodesic_insufficient_connectivity():
    X = np.array([[0.0], [1.0], [10.0]])
    g = sp.csr_matrix(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], float))
    with pytest.raises(ConnectivityError):
        geodesic_neighbors(g, X, [0.0], k=3, s=1)


def test_geodesic_stays_on_arc():
    X, lab = two_arcs()
    g = distance_graph(X, s=3)
    for i in range(0, 200, 7):
        ns = geodesic_neighbors(g, X, X[i] + 1e-3, k=5, s=2)
        assert np.all(lab[ns.indices] == lab[i])


@given(seed=st.integers(0, 10_000))
def test_batch_searcher_matches_dijkstra(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(25, 2))
    y = r.normal(size=2)
    gs = GeodesicSearcher(X, s=4, k=6)
    a = gs.query(y)
    b = geodesic_neighbors(gs.graph, X, y, k=6, s=4)
    np.testing.assert_allclose(np.sort(a.affinities), np.sort(b.affinities), rtol=1e-12)
    # first Euclidean neighbour always present at its Euclidean distance
    e = int(np.argmin(np.sum((X - y) ** 2, 1)))
    assert e in b.indices
    # triangle check on relaxed edges
    d = gs.distances(y)
    G = gs.graph.tocoo()
    assert np.all(d[G.col] <= d[G.row] + G.data + 1e-12)
