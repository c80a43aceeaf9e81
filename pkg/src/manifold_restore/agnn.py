"""Adaptive geometry-driven nearest-neighbour search (AGNN).

A test sample's kernel affinities to the training set are diffused over
the training graph and thresholded relative to their maximum; the
surviving training samples are the sample's neighbourhood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import (
    DEFAULT_C1,
    DEFAULT_KAPPA,
    DEFAULT_S,
    DiffusedGraph,
    build_graph,
    diffuse_graph,
    diffuse_test_affinity,
    init_test_affinity,
)
from .core import _as_points

DEFAULT_C2 = 0.9


class NoAffinitySignalError(ValueError):
    pass


@dataclass(frozen=True)
class NeighborSet:
    indices: np.ndarray
    affinities: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class AgnnParams:
    c1: float = DEFAULT_C1
    c2: float = DEFAULT_C2
    kappa: int = DEFAULT_KAPPA
    s: int = DEFAULT_S
    min_size: int | None = None  # None -> patch dimension + 1

    def __post_init__(self):
        if not 0 < self.c2 < 1:
            raise ValueError("c2 must lie in (0, 1)")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.c1 <= 0:
            raise ValueError("c1 must be positive")

    def resolved_min_size(self, n: int) -> int:
        return n + 1 if self.min_size is None else int(self.min_size)


def select_neighbors(astar, c2: float, min_size: int = 1) -> NeighborSet:
    """Indices whose diffused affinity reaches ``c2 * max``.

    Sets smaller than ``min_size`` are padded with the highest-affinity
    remaining indices (ties by lower index). Indices are returned sorted by
    decreasing affinity.
    """
    a = np.asarray(astar, dtype=float)
    top = a.max() if a.size else 0.0
    if not top > 0:
        raise NoAffinitySignalError("no affinity signal")
    order = np.argsort(-a, kind="stable")
    n_thr = int(np.count_nonzero(a >= c2 * top))
    keep = order[: max(n_thr, min(int(min_size), a.size))]
    return NeighborSet(keep, a[keep])


def select_neighbors_batch(astar: np.ndarray, c2: float, min_size: int) -> np.ndarray:
    """Boolean (q, m) membership mask, row-wise equivalent to select_neighbors."""
    A = np.asarray(astar, dtype=float)
    top = A.max(axis=1)
    if np.any(~(top > 0)):
        raise NoAffinitySignalError("no affinity signal")
    mask = A >= c2 * top[:, None]
    short = np.flatnonzero(mask.sum(axis=1) < min_size)
    if short.size:
        k = min(int(min_size), A.shape[1])
        order = np.argsort(-A[short], axis=1, kind="stable")[:, :k]
        pad = np.zeros((short.size, A.shape[1]), dtype=bool)
        np.put_along_axis(pad, order, True, axis=1)
        mask[short] |= pad
    return mask


class AgnnSearcher:
    """Training-side state for repeated AGNN queries.

    Builds and diffuses the training graph once; ``query`` and
    ``query_masks`` are then pure functions of the test samples.
    """

    def __init__(self, train, params: AgnnParams | None = None, astar: DiffusedGraph | None = None):
        self.params = params or AgnnParams()
        self.train = _as_points(train)
        if astar is None:
            s = min(self.params.s, len(self.train) - 1)
            astar = diffuse_graph(build_graph(self.train, s, self.params.c1))
        self.astar = astar

    @property
    def min_size(self) -> int:
        return self.params.resolved_min_size(self.train.shape[1])

    def diffused(self, Y) -> np.ndarray:
        a = init_test_affinity(Y, self.train, self.params.c1)
        return diffuse_test_affinity(self.astar, a, self.params.kappa)

    def query(self, y) -> NeighborSet:
        return select_neighbors(self.diffused(y), self.params.c2, self.min_size)

    def query_masks(self, Y, chunk: int = 2048) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = np.zeros((len(Y), len(self.train)), dtype=bool)
        for lo in range(0, len(Y), chunk):
            out[lo : lo + chunk] = select_neighbors_batch(
                self.diffused(Y[lo : lo + chunk]), self.params.c2, self.min_size
            )
        return out


def agnn_query(train, astar: DiffusedGraph, y, params: AgnnParams | None = None) -> NeighborSet:
    """Affinity init -> diffusion -> threshold selection for one test vector."""
    return AgnnSearcher(train, params, astar).query(y)
