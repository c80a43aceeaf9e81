"""Degradation operators and the local-PCA shrinkage restoration loop.

Observation model: y = D H x + noise, with H a normalized blur applied
with symmetric boundary extension and D keeping every q-th pixel starting
at (0, 0). Restoration alternates local sparse coding of the estimate's
patches (over bases learned from the observed image's patches) with
gradient steps on the data-fidelity term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d, correlate2d

from .agnn import AgnnParams, AgnnSearcher
from .baselines import GeodesicSearcher, kmeans_fit, kmeans_select_batch
from .core import PatchSet, LocalBasis, aggregate_patches, compute_pca_masked, covering_grid, extract_patches, patches_at
from .goc import GocParams, build_model, select_basis_batch

STRATEGIES = ("agnn", "goc", "kmeans", "geod")
TASKS = {
    # name: (kind, kernel (kind, size, sigma), q, default noise sigma)
    "sr3": ("superres", ("gaussian", 7, 1.6), 3, 0.0),
    "deblur-uniform9": ("deblur", ("uniform", 9, None), 1, np.sqrt(2.0)),
    "deblur-gauss": ("deblur", ("gaussian", 25, 1.6), 1, np.sqrt(2.0)),
    "denoise": ("denoise", None, 1, 10.0),
}
DENOISE_SIGMAS = (5, 10, 15, 20, 50, 100)


class NumericFailure(RuntimeError):
    pass


def make_kernel(kind: str, size: int, sigma: float | None = None) -> np.ndarray:
    """Normalized square blur kernel; gaussian is sampled at integer offsets."""
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be odd and >= 1")
    if kind == "uniform":
        return np.full((size, size), 1.0 / (size * size))
    if kind == "gaussian":
        if sigma is None or sigma <= 0:
            raise ValueError("gaussian kernel needs sigma > 0")
        r = np.arange(size) - size // 2
        g = np.exp(-(r**2) / (2.0 * sigma * sigma))
        k = np.outer(g, g)
        return k / k.sum()
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class DegradationOp:
    kind: str = "denoise"
    blur: np.ndarray | None = None
    q: int = 1
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("superres", "deblur", "denoise"):
            raise ValueError(f"unknown degradation kind {self.kind!r}")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.blur is not None:
            k = np.array(self.blur, dtype=float)
            if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
                raise ValueError("blur kernel must be 2-D with odd sides")
            if np.any(k < 0) or abs(k.sum() - 1.0) > 1e-12:
                raise ValueError("blur kernel must be nonnegative and sum to 1")
            k.setflags(write=False)
            object.__setattr__(self, "blur", k)

    @classmethod
    def for_task(cls, task: str, noise_sigma: float | None = None) -> "DegradationOp":
        if task not in TASKS:
            raise ValueError(f"unknown task {task!r}; choose from {sorted(TASKS)}")
        kind, kparams, q, sigma = TASKS[task]
        blur = None if kparams is None else make_kernel(*kparams)
        return cls(kind, blur, q, sigma if noise_sigma is None else float(noise_sigma))

    def source_shape(self, obs_shape) -> tuple[int, int]:
        return obs_shape[0] * self.q, obs_shape[1] * self.q

    def crop(self, x: np.ndarray) -> np.ndarray:
        h, w = x.shape
        return x[: h - h % self.q, : w - w % self.q]


def _sym_index(n: int, pad: int) -> np.ndarray:
    return np.pad(np.arange(n), pad, mode="symmetric")


def blur(x: np.ndarray, k: np.ndarray | None) -> np.ndarray:
    """Correlate with ``k`` after symmetric (edge-repeating) extension."""
    if k is None:
        return np.array(x, dtype=float)
    ph, pw = k.shape[0] // 2, k.shape[1] // 2
    ri, ci = _sym_index(x.shape[0], ph), _sym_index(x.shape[1], pw)
    return correlate2d(x[np.ix_(ri, ci)], k, mode="valid")


def blur_adjoint(v: np.ndarray, k: np.ndarray | None) -> np.ndarray:
    if k is None:
        return np.array(v, dtype=float)
    ph, pw = k.shape[0] // 2, k.shape[1] // 2
    h, w = v.shape
    padded = convolve2d(v, k, mode="full")
    ri, ci = _sym_index(h, ph), _sym_index(w, pw)
    # fold the padding back onto the pixels it was copied from
    rows = np.zeros((h, padded.shape[1]))
    np.add.at(rows, ri, padded)
    out = np.zeros((h, w))
    np.add.at(out.T, ci, rows.T)
    return out


def degrade_clean(x, op: DegradationOp) -> np.ndarray:
    """Noiseless part D H x."""
    z = blur(np.asarray(x, dtype=float), op.blur)
    return z[:: op.q, :: op.q]


def adjoint_degrade(v, op: DegradationOp) -> np.ndarray:
    """H^T D^T v: zero-insertion upsampling followed by the adjoint blur."""
    v = np.asarray(v, dtype=float)
    up = np.zeros(op.source_shape(v.shape))
    up[:: op.q, :: op.q] = v
    return blur_adjoint(up, op.blur)


def degrade(x, op: DegradationOp, seed: int = 0) -> np.ndarray:
    """Blur, subsample, add seeded white Gaussian noise.

    Super-resolution inputs are cropped to a multiple of q first.
    """
    x = op.crop(np.asarray(x, dtype=float))
    y = degrade_clean(x, op)
    if op.noise_sigma > 0:
        y = y + np.random.default_rng(seed).normal(0.0, op.noise_sigma, y.shape)
    return y


def op_norm_sq(op: DegradationOp, obs_shape, iters: int = 100, seed: int = 0) -> float:
    """||Theta||^2 by power iteration on Theta^T Theta."""
    if op.blur is None and op.q == 1:
        return 1.0
    x = np.random.default_rng(seed).standard_normal(op.source_shape(obs_shape))
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        z = adjoint_degrade(degrade_clean(x, op), op)
        new = float(np.linalg.norm(z))
        if new == 0:
            raise NumericFailure("degradation operator is zero")
        x = z / new
        if abs(new - lam) <= 1e-10 * new:
            lam = new
            break
        lam = new
    return lam


def _keys(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    t = np.abs(t)
    out = np.zeros_like(t)
    m1 = t <= 1
    m2 = (t > 1) & (t < 2)
    out[m1] = (a + 2) * t[m1] ** 3 - (a + 3) * t[m1] ** 2 + 1
    out[m2] = a * t[m2] ** 3 - 5 * a * t[m2] ** 2 + 8 * a * t[m2] - 4 * a
    return out


def _cubic_matrix(n_lo: int, q: int) -> np.ndarray:
    """(n_lo*q, n_lo) cubic-convolution weights; output pixel r sits at r/q."""
    pos = np.arange(n_lo * q) / q
    base = np.floor(pos).astype(int)
    W = np.zeros((n_lo * q, n_lo))
    for off in (-1, 0, 1, 2):
        j = base + off
        w = _keys(pos - j)
        # mirror out-of-range taps (half-sample symmetric)
        j = np.where(j < 0, -j - 1, j)
        j = np.where(j >= n_lo, 2 * n_lo - j - 1, j)
        np.add.at(W, (np.arange(n_lo * q), j), w)
    return W


def bicubic_upsample(y, q: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if q == 1:
        return y.copy()
    Wr = _cubic_matrix(y.shape[0], q)
    Wc = _cubic_matrix(y.shape[1], q)
    return Wr @ y @ Wc.T


def estimate_noise(y) -> float:
    """Median-absolute-deviation noise estimate from the finest diagonal Haar band."""
    y = np.asarray(y, dtype=float)
    h, w = y.shape[0] // 2 * 2, y.shape[1] // 2 * 2
    b = y[:h, :w]
    d = (b[0::2, 0::2] - b[0::2, 1::2] - b[1::2, 0::2] + b[1::2, 1::2]) / 2.0
    return float(np.median(np.abs(d)) / 0.6745)


def soft_threshold(v, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("threshold must be >= 0")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass(frozen=True)
class SparseCode:
    coefficients: np.ndarray
    basis_ref: int = -1


def code_objective(y_patch, basis: LocalBasis, alpha, lam: float) -> float:
    r = np.asarray(y_patch, float) - basis.centroid - basis.vectors @ alpha
    return 0.5 * float(r @ r) + lam * float(np.abs(alpha).sum())


def code_patch(y_patch, basis: LocalBasis, lam: float, steps: int = 10, basis_ref: int = -1, trace=None) -> SparseCode:
    """IST with unit step on 0.5 ||y - mu - Phi a||^2 + lam ||a||_1.

    ``trace``, when a list, receives the objective after each step.
    """
    if basis.n_components == 0:
        return SparseCode(np.zeros(0), basis_ref)
    yc = np.asarray(y_patch, dtype=float) - basis.centroid
    Phi = basis.vectors
    a = np.zeros(Phi.shape[1])
    for _ in range(steps):
        a = soft_threshold(a + Phi.T @ (yc - Phi @ a), lam)
        if trace is not None:
            trace.append(code_objective(y_patch, basis, a, lam))
    return SparseCode(a, basis_ref)


def reconstruct_patch(code: SparseCode, basis: LocalBasis) -> np.ndarray:
    if code.coefficients.size == 0:
        return basis.centroid.copy()
    return basis.centroid + basis.vectors @ code.coefficients


def _stack_bases(bases: list):
    n = len(bases[0].centroid)
    p = max(1, max(b.n_components for b in bases))
    mus = np.stack([b.centroid for b in bases])
    Phis = np.zeros((len(bases), n, p))
    for i, b in enumerate(bases):
        Phis[i, :, : b.n_components] = b.vectors
    return mus, Phis


def code_and_reconstruct(Y: np.ndarray, mus: np.ndarray, Phis: np.ndarray, lam: float, steps: int) -> np.ndarray:
    """Batched code_patch + reconstruct_patch, one (padded) basis per row of Y."""
    Yc = Y - mus
    a = np.zeros((len(Y), Phis.shape[2]))
    for _ in range(steps):
        r = Yc - np.einsum("bnp,bp->bn", Phis, a)
        a = soft_threshold(a + np.einsum("bnp,bn->bp", Phis, r), lam)
    return mus + np.einsum("bnp,bp->bn", Phis, a)


@dataclass(frozen=True)
class RestoreConfig:
    strategy: str = "agnn"
    lam: float | None = None  # None -> 0.05 * estimated noise std
    outer_iters: int = 4
    inner_iters: int = 10
    ist_steps: int = 10
    patch: tuple[int, int, int] = (6, 6, 2)  # h, w, stride on the estimate
    train_stride: int = 1
    remove_dc: bool = True  # model patches with their own mean removed
    agnn: AgnnParams = field(default_factory=AgnnParams)
    goc: GocParams = field(default_factory=GocParams)
    kmeans_C: int = 64
    geod_s: int = 35
    geod_k: int | None = None  # None -> patch dimension + 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if min(self.outer_iters, self.inner_iters, self.ist_steps) < 1:
            raise ValueError("iteration counts must be >= 1")
        if min(self.patch) < 1:
            raise ValueError("patch size and stride must be >= 1")


class _Model:
    """Strategy-specific map from estimate patches to local bases."""

    def __init__(self, train: PatchSet, cfg: RestoreConfig, seed: int):
        self.cfg = cfg
        self.train = train.vectors
        s = cfg.strategy
        if s == "agnn":
            self.searcher = AgnnSearcher(self.train, cfg.agnn)
        elif s == "geod":
            self.searcher = GeodesicSearcher(self.train, cfg.geod_s, cfg.geod_k)
        elif s == "kmeans":
            # a partition cell needs about n + 1 members for a full-rank basis
            m, n = self.train.shape
            C = max(1, min(cfg.kmeans_C, m // (n + 1)))
            self.km = kmeans_fit(self.train, C, seed=seed)
            self.stack = _stack_bases(self.km.bases)
        else:
            g = cfg.goc
            if g.C > len(self.train):
                g = GocParams(len(self.train), g.c3, g.L0, g.Kmax, g.Lmax, g.gamma, g.r, g.fixed_LK)
            self.goc = build_model(self.train, g, seed=seed)
            self.stack = _stack_bases(self.goc.bases)

    def bases_for(self, Y: np.ndarray):
        s = self.cfg.strategy
        if s in ("agnn", "geod"):
            return _stack_bases(compute_pca_masked(self.train, self.searcher.query_masks(Y)))
        if s == "kmeans":
            idx = kmeans_select_batch(Y, self.km)
        else:
            idx = select_basis_batch(Y, self.goc, self.cfg.goc.gamma, self.cfg.goc.r)
        mus, Phis = self.stack
        return mus[idx], Phis[idx]


def _dc_free(P: np.ndarray, on: bool = True):
    dc = P.mean(axis=1, keepdims=True) if on else np.zeros((len(P), 1))
    return P - dc, dc


def restore(y, op: DegradationOp, cfg: RestoreConfig | None = None, seed: int = 0, trace=None) -> np.ndarray:
    """Restore ``y`` with local PCA models picked by ``cfg.strategy``.

    Each outer iteration re-selects a basis for every estimate patch; the
    inner iterations code, reconstruct and aggregate the patches, then take
    one gradient step on ||D H x - y||^2. ``trace``, when a list, receives
    (fidelity_before, fidelity_after) for each gradient step.
    """
    cfg = cfg or RestoreConfig()
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NumericFailure("non-finite observation")
    ph, pw, stride = cfg.patch
    lam = 0.05 * estimate_noise(y) if cfg.lam is None else cfg.lam
    x = bicubic_upsample(y, op.q) if op.kind == "superres" else y.copy()
    H, W = x.shape
    train = extract_patches(y, ph, pw, cfg.train_stride)
    if cfg.remove_dc:
        train = PatchSet(_dc_free(train.vectors)[0], train.positions, train.patch_shape)
    model = _Model(train, cfg, seed)
    tau = 1.0 / op_norm_sq(op, y.shape, seed=seed)
    grid = covering_grid(H, W, ph, pw, stride)
    for _ in range(cfg.outer_iters):
        P, _ = _dc_free(patches_at(x, grid, ph, pw).vectors, cfg.remove_dc)
        mus, Phis = model.bases_for(P)
        for _ in range(cfg.inner_iters):
            P, dc = _dc_free(patches_at(x, grid, ph, pw).vectors, cfg.remove_dc)
            rec = code_and_reconstruct(P, mus, Phis, lam, cfg.ist_steps) + dc
            x = aggregate_patches(PatchSet(rec, grid, (ph, pw)), H, W)
            resid = degrade_clean(x, op) - y
            before = float(np.sum(resid**2))
            x = x - tau * adjoint_degrade(resid, op)
            if trace is not None:
                trace.append((before, float(np.sum((degrade_clean(x, op) - y) ** 2))))
        if not np.all(np.isfinite(x)):
            raise NumericFailure("estimate diverged")
    return x
