"""Patch extraction/aggregation and local PCA bases.

Images are plain 2-D float arrays (rows x cols) of luminance values in
[0, 255]. Patches are flattened row-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: relative cutoff below which PCA eigenvalues are dropped
EIG_RTOL = 1e-12


class DegenerateClusterError(ValueError):
    pass


@dataclass(frozen=True)
class PatchSet:
    """A stack of vectorized patches and where they came from.

    Attributes:
        vectors: (m, n) array, one flattened patch per row.
        positions: (m, 2) integer array of (row, col) top-left origins.
        patch_shape: (patch_h, patch_w); n == patch_h * patch_w.
    """

    vectors: np.ndarray
    positions: np.ndarray
    patch_shape: tuple[int, int]

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float, copy=True)
        if v.ndim != 2:
            raise ValueError("patch vectors must be a 2-D array")
        pos = np.array(self.positions, dtype=np.int64, copy=True).reshape(-1, 2)
        if pos.shape[0] != v.shape[0]:
            raise ValueError("one position per patch required")
        ph, pw = self.patch_shape
        if ph * pw != v.shape[1]:
            raise ValueError("patch_shape does not match vector length")
        v.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "patch_shape", (int(ph), int(pw)))

    @classmethod
    def from_vectors(cls, vectors) -> "PatchSet":
        """Wrap bare points (no image origin) as a 1 x n patch set."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(v, np.zeros((v.shape[0], 2), dtype=np.int64), (1, v.shape[1]))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.count

    def subset(self, indices) -> "PatchSet":
        idx = np.asarray(indices, dtype=np.int64)
        return PatchSet(self.vectors[idx], self.positions[idx], self.patch_shape)


@dataclass(frozen=True)
class LocalBasis:
    """Centroid plus orthonormal principal directions.

    ``vectors`` is (n, p) with columns sorted by nonincreasing eigenvalue.
    """

    centroid: np.ndarray
    vectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_components(self) -> int:
        return self.vectors.shape[1]

    def leading(self, r: int) -> np.ndarray:
        return self.vectors[:, : min(r, self.n_components)]


def _as_points(samples) -> np.ndarray:
    if isinstance(samples, PatchSet):
        return samples.vectors
    return np.atleast_2d(np.asarray(samples, dtype=float))


def patch_grid(height: int, width: int, patch_h: int, patch_w: int, stride: int):
    """Row-major top-left origins of a strided patch grid."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if patch_h > height or patch_w > width:
        raise ValueError("image too small")
    rows = np.arange(0, height - patch_h + 1, stride)
    cols = np.arange(0, width - patch_w + 1, stride)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1)


def covering_grid(height: int, width: int, patch_h: int, patch_w: int, stride: int):
    """Strided grid that always includes the last row/column so every pixel is covered."""
    if not 1 <= stride <= min(patch_h, patch_w):
        raise ValueError("stride must lie in [1, patch size] to cover every pixel")
    if patch_h > height or patch_w > width:
        raise ValueError("image too small")
    rows = list(range(0, height - patch_h + 1, stride))
    cols = list(range(0, width - patch_w + 1, stride))
    if rows[-1] != height - patch_h:
        rows.append(height - patch_h)
    if cols[-1] != width - patch_w:
        cols.append(width - patch_w)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1)


def patches_at(img: np.ndarray, positions, patch_h: int, patch_w: int) -> PatchSet:
    img = np.asarray(img, dtype=float)
    pos = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
    windows = np.lib.stride_tricks.sliding_window_view(img, (patch_h, patch_w))
    vecs = windows[pos[:, 0], pos[:, 1]].reshape(len(pos), patch_h * patch_w)
    return PatchSet(vecs, pos, (patch_h, patch_w))


def extract_patches(img: np.ndarray, patch_h: int, patch_w: int, stride: int = 1) -> PatchSet:
    """All patch_h x patch_w patches on a stride grid, origins in row-major order."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("expected a 2-D grayscale image")
    pos = patch_grid(img.shape[0], img.shape[1], patch_h, patch_w, stride)
    return patches_at(img, pos, patch_h, patch_w)


def aggregate_patches(patches: PatchSet, out_h: int, out_w: int, weights=None) -> np.ndarray:
    """Overlap-average patches back into an image.

    Each pixel is the weighted mean of every patch value covering it
    (uniform weights by default).
    """
    ph, pw = patches.patch_shape
    pos = patches.positions
    if np.any(pos < 0) or np.any(pos[:, 0] + ph > out_h) or np.any(pos[:, 1] + pw > out_w):
        raise ValueError("patch position out of bounds")
    w = np.ones(patches.count) if weights is None else np.asarray(weights, dtype=float)
    acc = np.zeros((out_h, out_w))
    norm = np.zeros((out_h, out_w))
    blocks = patches.vectors.reshape(-1, ph, pw) * w[:, None, None]
    # Loop over intra-patch offsets (ph*pw of them), scatter-add all patches at once.
    for dr in range(ph):
        for dc in range(pw):
            r = pos[:, 0] + dr
            c = pos[:, 1] + dc
            np.add.at(acc, (r, c), blocks[:, dr, dc])
            np.add.at(norm, (r, c), w)
    if np.any(norm == 0):
        raise ValueError("uncovered pixel")
    return acc / norm


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def compute_pca(samples, max_components: int | None = None) -> LocalBasis:
    """Principal directions of a sample set (covariance divisor |S|).

    Uses the n x n scatter matrix when there are more samples than
    dimensions and the |S| x |S| Gram matrix otherwise. The number of
    components is min(max_components, |S| - 1, n), further reduced by
    dropping eigenvalues below 1e-12 x trace. Each direction's sign is
    chosen so its largest-magnitude entry is positive.
    """
    X = _as_points(samples)
    m, n = X.shape
    if m < 2:
        raise DegenerateClusterError("degenerate cluster")
    mu = X.mean(axis=0)
    Xc = X - mu
    limit = min(m - 1, n)
    if max_components is not None:
        limit = min(limit, int(max_components))

    if m > n:
        evals, evecs = np.linalg.eigh(Xc.T @ Xc / m)
    else:
        gvals, gvecs = np.linalg.eigh(Xc @ Xc.T / m)
        keep = gvals > 0
        gvals, gvecs = gvals[keep], gvecs[:, keep]
        evecs = Xc.T @ gvecs / np.sqrt(gvals * m)
        evals = gvals
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]

    trace = evals.sum()
    if trace > 0:
        ok = evals > EIG_RTOL * trace
        limit = min(limit, int(ok.sum()))
    else:
        limit = 0
    evals, evecs = evals[:limit], evecs[:, :limit]
    if m <= n and limit:
        # Gram-route vectors lose a little orthogonality; re-orthonormalize.
        q, _ = np.linalg.qr(evecs)
        evecs = q * np.sign(np.sum(q * evecs, axis=0))
    return LocalBasis(mu, _fix_signs(evecs), evals)


def compute_pca_masked(points: np.ndarray, masks: np.ndarray, max_components: int | None = None):
    """Batch PCA: one basis per boolean row of ``masks`` over ``points``.

    Equivalent to ``compute_pca(points[mask])`` for each mask but shares
    the second-moment computation across the batch. Returns a list of
    LocalBasis.
    """
    X = np.asarray(points, dtype=float)
    shift = X.mean(axis=0)
    X = X - shift  # limits cancellation in second-moment minus mean^2
    M = np.asarray(masks, dtype=float)
    counts = M.sum(axis=1)
    if np.any(counts < 2):
        raise DegenerateClusterError("degenerate cluster")
    n = X.shape[1]
    means = (M @ X) / counts[:, None]
    outer = (X[:, :, None] * X[:, None, :]).reshape(len(X), n * n)
    second = (M @ outer).reshape(-1, n, n) / counts[:, None, None]
    cov = second - means[:, :, None] * means[:, None, :]
    cov = 0.5 * (cov + cov.transpose(0, 2, 1))
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals[:, ::-1], 0.0, None)
    evecs = evecs[:, :, ::-1]

    out = []
    for i in range(len(M)):
        ev = evals[i]
        limit = min(int(counts[i]) - 1, n)
        if max_components is not None:
            limit = min(limit, int(max_components))
        tr = ev.sum()
        limit = min(limit, int((ev > EIG_RTOL * tr).sum())) if tr > 0 else 0
        out.append(LocalBasis(means[i] + shift, _fix_signs(evecs[i][:, :limit]), ev[:limit]))
    return out
