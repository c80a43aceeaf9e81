"""Gaussian s-NN affinity graphs and their replicator-dynamics diffusion.

The training graph keeps, for every node, kernel affinities to its s
Euclidean nearest neighbours (support symmetrized by union, self-loops of
weight 1). Diffusion rewrites every row by running replicator dynamics on
the subgraph induced by that row's support, which drives the row toward a
fixed point of ``v ~ A v`` without ever creating new edges. Only a few
steps are taken by default; see ``DIFFUSE_MAX_ITER``. Test samples
are attached out of sample through ``(A*)^kappa a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import _as_points

DEFAULT_C1 = 10.0
DEFAULT_S = 35
DEFAULT_KAPPA = 2
DIFFUSE_TOL = 1e-6
# With unit self-loops every simplex vertex maximizes v'Av, so running the
# dynamics to convergence collapses each row onto one node (A* -> identity).
# A short run keeps the diffusion effect.
DIFFUSE_MAX_ITER = 1


class IsolatedNodeError(ValueError):
    pass


@dataclass(frozen=True)
class AffinityGraph:
    """Symmetric sparse kernel affinities on the s-NN support (diagonal = 1)."""

    matrix: sp.csr_matrix
    c1: float
    s: int

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class DiffusedGraph:
    matrix: sp.csr_matrix
    iterations_used: int
    residual: float

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


def _check_c1(c1: float) -> None:
    if not c1 > 0:
        raise ValueError("kernel scale c1 must be positive")


def gaussian_affinity(u, v, c1: float = DEFAULT_C1, n: int | None = None) -> float:
    """exp(-||u - v||^2 / (n c1^2)); n defaults to len(u)."""
    _check_c1(c1)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if n is None:
        n = u.size
    return float(np.exp(-np.sum((u - v) ** 2) / (n * c1 * c1)))


def sq_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at 0."""
    d = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    return np.maximum(d, 0.0)


def knn_table(X: np.ndarray, k: int) -> np.ndarray:
    """(m, k) indices of each point's k nearest other points.

    Exact; ties broken by lower index.
    """
    m = len(X)
    D = sq_distances(X, X)
    np.fill_diagonal(D, np.inf)
    # stable sort on distance keeps lower indices first among ties
    return np.argsort(D, axis=1, kind="stable")[:, :k]


def build_graph(train, s: int = DEFAULT_S, c1: float = DEFAULT_C1) -> AffinityGraph:
    X = _as_points(train)
    m, n = X.shape
    _check_c1(c1)
    if m < 2:
        raise ValueError("graph needs at least 2 nodes")
    if not 1 <= s < m:
        raise ValueError(f"s must satisfy 1 <= s < m (got s={s}, m={m})")
    nbrs = knn_table(X, s)
    rows = np.repeat(np.arange(m), s)
    cols = nbrs.ravel()
    pattern = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(m, m)).tocsr()
    pattern = ((pattern + pattern.T + sp.identity(m, format="csr")) > 0).tocoo()
    r, c = pattern.row, pattern.col
    d2 = np.sum((X[r] - X[c]) ** 2, axis=1)
    w = np.exp(-d2 / (n * c1 * c1))
    w[r == c] = 1.0
    A = sp.csr_matrix((w, (r, c)), shape=(m, m))
    A.sort_indices()
    return AffinityGraph(A, float(c1), int(s))


def _replicator_rows(A: sp.csr_matrix, rows: np.ndarray, max_iter: int, tol: float):
    """Run support-restricted replicator dynamics for a batch of rows.

    Rows are padded to a common support size; padded slots carry zero
    weight and stay zero under the multiplicative update.
    """
    indptr, indices, data = A.indptr, A.indices, A.data
    sizes = indptr[rows + 1] - indptr[rows]
    k = int(sizes.max())
    b = len(rows)
    supp = np.zeros((b, k), dtype=np.int64)
    valid = np.zeros((b, k), dtype=bool)
    v = np.zeros((b, k))
    for j, i in enumerate(rows):
        lo, hi = indptr[i], indptr[i + 1]
        supp[j, : hi - lo] = indices[lo:hi]
        valid[j, : hi - lo] = True
        v[j, : hi - lo] = data[lo:hi]

    totals = v.sum(axis=1)
    if np.any(totals <= 0):
        bad = rows[np.argmax(totals <= 0)]
        raise IsolatedNodeError(f"isolated node {bad}")
    v /= totals[:, None]

    # Induced sub-matrices A[S_i, S_i], zero-padded to k x k.
    sub = np.zeros((b, k, k))
    for j in range(b):
        idx = supp[j, : sizes[j]]
        sub[j, : sizes[j], : sizes[j]] = A[idx][:, idx].toarray()
    it, change = 0, 0.0
    for it in range(1, max_iter + 1):
        Av = np.einsum("bij,bj->bi", sub, v)
        denom = np.einsum("bi,bi->b", v, Av)
        if np.any(denom <= 0):
            raise IsolatedNodeError(f"isolated node {rows[np.argmax(denom <= 0)]}")
        new = v * Av / denom[:, None]
        change = float(np.max(np.abs(new - v)))
        v = new
        if change < tol:
            break
    v /= v.max(axis=1, keepdims=True)
    return supp, valid, v, it, change


def diffuse_graph(
    graph: AffinityGraph,
    max_iter: int = DIFFUSE_MAX_ITER,
    tol: float = DIFFUSE_TOL,
    batch_rows: int = 256,
) -> DiffusedGraph:
    """Diffuse every row of the affinity graph with replicator dynamics.

    Each row i starts at its normalized affinities on its support S_i and
    is iterated as ``v <- v * (A_S v) / (v' A_S v)`` (A_S the support's
    induced sub-matrix) until the max-norm change drops below ``tol`` or
    ``max_iter`` is reached. Rows are rescaled to a unit max entry.
    """
    A = graph.matrix.tocsr()
    m = A.shape[0]
    rows_out, cols_out, vals_out = [], [], []
    iters, resid = 0, 0.0
    for start in range(0, m, batch_rows):
        rows = np.arange(start, min(start + batch_rows, m))
        supp, valid, v, it, change = _replicator_rows(A, rows, max_iter, tol)
        iters = max(iters, it)
        resid = max(resid, change)
        r = np.broadcast_to(rows[:, None], supp.shape)[valid]
        rows_out.append(r)
        cols_out.append(supp[valid])
        vals_out.append(v[valid])
    r = np.concatenate(rows_out)
    c = np.concatenate(cols_out)
    w = np.concatenate(vals_out)
    keep = w > 0
    Astar = sp.csr_matrix((w[keep], (r[keep], c[keep])), shape=(m, m))
    Astar.sort_indices()
    return DiffusedGraph(Astar, iters, resid)


def init_test_affinity(y, train, c1: float = DEFAULT_C1) -> np.ndarray:
    """Kernel affinities between one test vector (or a batch of rows) and every training point."""
    _check_c1(c1)
    X = _as_points(train)
    Y = np.asarray(y, dtype=float)
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    n = X.shape[1]
    a = np.exp(-sq_distances(Y, X) / (n * c1 * c1))
    return a[0] if single else a


def diffuse_test_affinity(astar_graph, a, kappa: int = DEFAULT_KAPPA) -> np.ndarray:
    """(A*)^kappa a via kappa sparse products.

    ``a`` may be a single m-vector or an (q, m) batch of affinity rows.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    M = astar_graph.matrix if hasattr(astar_graph, "matrix") else sp.csr_matrix(astar_graph)
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("affinities must be nonnegative")
    if a.shape[-1] != M.shape[0]:
        raise ValueError("affinity vector length does not match graph size")
    out = a.T if a.ndim == 2 else a
    for _ in range(kappa):
        out = M @ out
    return out.T if a.ndim == 2 else out
