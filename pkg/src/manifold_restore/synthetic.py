"""Deterministic synthetic data: test manifolds, textured images, rotated patches."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .core import PatchSet


def two_arcs(n_per_arc: int = 100, radius: float = 3.0, gap: float = 0.3, spacing: float = 0.1):
    """Two concentric circular arcs ``gap`` apart with ``spacing`` arc-length steps.

    Returns:
        points: (2 n_per_arc, 2) array.
        labels: arc id per point (0 inner, 1 outer).
    """
    pts, labels = [], []
    for lab, R in enumerate((radius, radius + gap)):
        t = spacing / R * np.arange(n_per_arc)
        pts.append(np.stack([R * np.cos(t), R * np.sin(t)], axis=1))
        labels.append(np.full(n_per_arc, lab))
    return np.concatenate(pts), np.concatenate(labels)


def swiss_roll(m: int = 2000, noise: float = 0.01, seed: int = 0):
    """Swiss roll in R^3 with its analytic tangent planes.

    Returns:
        points: (m, 3) noisy samples.
        tangents: (m, 3, 2) tangent basis (not normalized) at each clean sample.
    """
    rng = np.random.default_rng(seed)
    t = 1.5 * np.pi * (1 + 2 * rng.random(m))
    h = 21.0 * rng.random(m)
    X = np.stack([t * np.cos(t), h, t * np.sin(t)], axis=1)
    X += noise * rng.standard_normal(X.shape)
    dt = np.stack([np.cos(t) - t * np.sin(t), np.zeros(m), np.sin(t) + t * np.cos(t)], axis=1)
    dh = np.tile([0.0, 1.0, 0.0], (m, 1))
    return X, np.stack([dt, dh], axis=2)


def textured_image(size: int = 96, seed: int = 0) -> np.ndarray:
    """Wing-like test image: striped and dotted lobes with sharp outlines on a smooth background."""
    rng = np.random.default_rng(seed)
    r, c = np.mgrid[0:size, 0:size].astype(float) / size
    img = 90 + 40 * c + 20 * np.sin(3 * r)
    lobes = [(0.3, 0.28, 0.22, 0.17, 0.6), (0.3, 0.72, 0.22, 0.17, -0.6), (0.72, 0.33, 0.17, 0.13, 0.3), (0.72, 0.67, 0.17, 0.13, -0.3)]
    for k, (cr, cc, a, b, ang) in enumerate(lobes):
        dr, dc = r - cr, c - cc
        u = dr * np.cos(ang) + dc * np.sin(ang)
        v = -dr * np.sin(ang) + dc * np.cos(ang)
        inside = (u / a) ** 2 + (v / b) ** 2 <= 1
        freq = 6 + 2 * k
        stripes = 60 * np.sign(np.sin(2 * np.pi * freq * (u * np.cos(0.4 * k) + v * np.sin(0.4 * k))))
        spots = np.zeros_like(img)
        for _ in range(5):
            sr, sc = rng.uniform(-0.6, 0.6, 2)
            spots += 80 * (((u / a - sr) ** 2 + (v / b - sc) ** 2) < 0.03)
        wing = 150 + stripes * (np.hypot(u / a, v / b) > 0.35) - spots
        img = np.where(inside, wing, img)
        rim = np.abs((u / a) ** 2 + (v / b) ** 2 - 1) < 0.12
        img = np.where(rim, 25.0, img)
    body = (np.abs(c - 0.5) < 0.035) & (r > 0.15) & (r < 0.9)
    img = np.where(body, 30.0, img)
    # mild optical softening keeps edges sharp but not aliased
    return np.clip(gaussian_filter(img, 0.8, mode="reflect"), 0, 255)


def reference_patches(count: int = 10, size: int = 10, seed: int = 0, smooth: float = 1.5) -> np.ndarray:
    """Smooth random patches with mean 128 and std 40, shape (count, size, size)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        p = gaussian_filter(rng.standard_normal((size, size)), smooth)
        out.append(128 + 40 * (p - p.mean()) / p.std())
    return np.stack(out)


def rotate_patch(patch: np.ndarray, angle_deg: float) -> np.ndarray:
    """Bilinear counter-clockwise rotation about the patch center, edge values repeated outside."""
    patch = np.asarray(patch, dtype=float)
    h, w = patch.shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    th = np.deg2rad(angle_deg)
    co, si = np.cos(th), np.sin(th)
    # snap so that multiples of 90 degrees are exact permutations
    co, si = np.round(co, 15), np.round(si, 15)
    r, c = np.mgrid[0:h, 0:w].astype(float)
    dr, dc = r - cy, c - cx
    # inverse map of a counter-clockwise rotation (as displayed, row axis down)
    src_r = cy + co * dr + si * dc
    src_c = cx - si * dr + co * dc
    return map_coordinates(patch, [src_r, src_c], order=1, mode="nearest")


def rotated_patch_dataset(refs, step_deg: float = 5.0, seed: int = 0):
    """Rotate every reference at 0, step, ..., < 360 degrees.

    Returns:
        (PatchSet of flattened rotations, integer reference label per row).
    """
    refs = np.asarray(refs, dtype=float)
    if step_deg <= 0:
        raise ValueError("step must be positive")
    n_rot = int(np.ceil(360.0 / step_deg - 1e-9))
    angles = step_deg * np.arange(n_rot)
    h, w = refs.shape[1:]
    vecs, labels = [], []
    for i, p in enumerate(refs):
        for a in angles:
            vecs.append(rotate_patch(p, a).ravel())
            labels.append(i)
    vecs = np.array(vecs)
    return PatchSet(vecs, np.zeros((len(vecs), 2), dtype=np.int64), (h, w)), np.array(labels)


def correct_cluster_rate(assigned, labels, query_labels=None) -> float:
    """Percentage of same-label memberships, averaged over queries.

    Args:
        assigned: either a sequence of neighbour index arrays (one per query)
            or a partition, i.e. one integer cluster id per sample. A
            partition is scored by treating each sample's whole cluster
            (itself included, as with neighbour sets drawn from a set that
            contains the query) as its neighbours.
        labels: class label of every indexable sample.
        query_labels: class label of each query; defaults to ``labels``.
    """
    labels = np.asarray(labels)
    if isinstance(assigned, np.ndarray) and assigned.ndim == 1 and assigned.dtype.kind in "iu":
        assigned = [np.flatnonzero(assigned == k) for k in assigned]
    ql = labels if query_labels is None else np.asarray(query_labels)
    rates = [np.mean(labels[np.asarray(s, dtype=int)] == ql[i]) for i, s in enumerate(assigned)]
    return 100.0 * float(np.mean(rates))
