"""Neighbourhood-quality experiments on synthetic manifolds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from .affinity import sq_distances
from .agnn import AgnnParams, AgnnSearcher
from .baselines import kmeans_fit
from .core import compute_pca
from .synthetic import correct_cluster_rate, reference_patches, rotated_patch_dataset, swiss_roll, two_arcs

# Desk-scale AGNN settings per experiment (see README for how they were chosen).
ROTSIM_PARAMS = AgnnParams(c1=10.0, c2=0.9, kappa=2, s=5, min_size=10)
ARCS_PARAMS = AgnnParams(c1=0.1, c2=0.9, kappa=3, s=6, min_size=8)
SWISS_PARAMS = AgnnParams(c1=0.5, c2=0.9, kappa=2, s=10, min_size=80)


def euclidean_sets(X: np.ndarray, Q: np.ndarray, sizes) -> list:
    D = sq_distances(Q, X)
    return [np.argsort(D[i], kind="stable")[: int(k)] for i, k in enumerate(sizes)]


@dataclass(frozen=True)
class RotsimResult:
    n_classes: int
    agnn: float
    euclid: float
    kmeans: float
    agnn_sets: list
    euclid_sets: list
    kmeans_labels: np.ndarray
    labels: np.ndarray


def rotsim(n_classes: int, step_deg: float = 5.0, params: AgnnParams = ROTSIM_PARAMS, seed: int = 0, refs=None) -> RotsimResult:
    """Correct-cluster rates of AGNN, same-size Euclidean k-NN and K-means.

    Every rotated patch is a query against the full rotated set.
    """
    if refs is None:
        refs = reference_patches(10, 10, seed=seed)
    ps, labels = rotated_patch_dataset(refs[:n_classes], step_deg)
    X = ps.vectors
    masks = AgnnSearcher(X, params).query_masks(X)
    agnn_sets = [np.flatnonzero(m) for m in masks]
    eu_sets = euclidean_sets(X, X, [len(s) for s in agnn_sets])
    km = kmeans_fit(X, n_classes, seed=seed, with_bases=False).assignments
    return RotsimResult(
        n_classes,
        correct_cluster_rate(agnn_sets, labels),
        correct_cluster_rate(eu_sets, labels),
        correct_cluster_rate(km, labels),
        agnn_sets,
        eu_sets,
        km,
        labels,
    )


def arcs_experiment(params: AgnnParams = ARCS_PARAMS, near_gap: int = 100):
    """Cross-arc contamination of AGNN vs same-size Euclidean neighbour sets.

    Returns:
        (fraction of clean AGNN sets over all queries,
         fraction of contaminated Euclidean sets over the ``near_gap``
         queries whose nearest other-arc point is closest).
    """
    X, lab = two_arcs()
    masks = AgnnSearcher(X, params).query_masks(X)
    agnn_clean = np.mean([np.all(lab[m] == lab[i]) for i, m in enumerate(masks)])
    eu_sets = euclidean_sets(X, X, masks.sum(axis=1))
    D = np.sqrt(sq_distances(X, X))
    gap = np.array([D[i, lab != lab[i]].min() for i in range(len(X))])
    near = np.argsort(gap, kind="stable")[:near_gap]
    eu_dirty = np.mean([np.any(lab[eu_sets[i]] != lab[i]) for i in near])
    return float(agnn_clean), float(eu_dirty)


def swiss_experiment(params: AgnnParams = SWISS_PARAMS, n_queries: int = 200, seed: int = 0):
    """Mean largest principal angle (radians) to the true tangent plane.

    Returns:
        (AGNN mean angle, same-size Euclidean mean angle).
    """
    X, T = swiss_roll(2000, 0.01, seed=seed)
    q = np.random.default_rng(seed + 1).choice(len(X), n_queries, replace=False)
    masks = AgnnSearcher(X, params).query_masks(X[q])
    eu_sets = euclidean_sets(X, X[q], masks.sum(axis=1))
    ang_a, ang_e = [], []
    for j, i in enumerate(q):
        ang_a.append(subspace_angles(compute_pca(X[masks[j]]).leading(2), T[i]).max())
        ang_e.append(subspace_angles(compute_pca(X[eu_sets[j]]).leading(2), T[i]).max())
    return float(np.mean(ang_a)), float(np.mean(ang_e))
