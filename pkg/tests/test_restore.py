import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from manifold_restore.core import compute_pca
from manifold_restore.goc import GocParams
from manifold_restore.restore import (
    DegradationOp,
    RestoreConfig,
    adjoint_degrade,
    bicubic_upsample,
    code_objective,
    code_patch,
    degrade,
    degrade_clean,
    estimate_noise,
    make_kernel,
    op_norm_sq,
    reconstruct_patch,
    restore,
    soft_threshold,
    SparseCode,
)

# normalized sampled 7x7 gaussian, sigma 1.6, center entry (40-digit mpmath evaluation)
GAUSS7_CENTER = 0.06555563052616416772118873


def test_kernel_examples():
    np.testing.assert_array_equal(make_kernel("uniform", 9), np.full((9, 9), 1 / 81))
    np.testing.assert_array_equal(make_kernel("gaussian", 1, 1.6), [[1.0]])
    assert make_kernel("gaussian", 7, 1.6)[3, 3] == pytest.approx(GAUSS7_CENTER, rel=1e-15)
    with pytest.raises(ValueError):
        make_kernel("uniform", 4)


def test_kernel_center_mpmath_oracle():
    mp.mp.dps = 40
    g = [mp.e ** (-(mp.mpf(i) ** 2) / (2 * mp.mpf("1.6") ** 2)) for i in range(-3, 4)]
    assert float((g[3] / sum(g)) ** 2) == pytest.approx(make_kernel("gaussian", 7, 1.6)[3, 3], rel=1e-15)


@given(size=st.sampled_from([1, 3, 5, 7, 9, 25]), sigma=st.floats(0.3, 5.0))
def test_kernel_normalization(size, sigma):
    for k in (make_kernel("gaussian", size, sigma), make_kernel("uniform", size)):
        assert abs(k.sum() - 1) <= 1e-12 and np.all(k >= 0)


def test_identity_and_constant(rng):
    x = rng.uniform(0, 255, (9, 9))
    np.testing.assert_array_equal(degrade(x, DegradationOp()), x)
    c = np.full((12, 12), 77.0)
    op = DegradationOp("deblur", make_kernel("gaussian", 7, 1.6))
    np.testing.assert_allclose(degrade(c, op), c, atol=1e-12)


def _nested_loop_degrade(x, k, q):
    h, w = x.shape
    r = k.shape[0] // 2

    def sym(i, n):
        if i < 0:
            return -i - 1
        if i >= n:
            return 2 * n - i - 1
        return i

    out = np.zeros((h // q, w // q))
    for i in range(0, h, q):
        for j in range(0, w, q):
            s = 0.0
            for a in range(-r, r + 1):
                for b in range(-r, r + 1):
                    s += k[a + r, b + r] * x[sym(i + a, h), sym(j + b, w)]
            out[i // q, j // q] = s
    return out


def test_degrade_ramp_oracle():
    x = np.add.outer(np.arange(12.0), 2 * np.arange(12.0))
    k = make_kernel("uniform", 3)
    op = DegradationOp("superres", k, 3)
    np.testing.assert_allclose(degrade(x, op), _nested_loop_degrade(x, k, 3), atol=1e-12)
    k7 = make_kernel("gaussian", 7, 1.6)
    z = np.random.default_rng(0).uniform(0, 255, (12, 15))
    np.testing.assert_allclose(degrade_clean(z, DegradationOp("superres", k7, 3)), _nested_loop_degrade(z, k7, 3), atol=1e-10)


def test_degrade_crops_and_is_seeded(rng):
    x = rng.uniform(0, 255, (13, 14))
    op = DegradationOp.for_task("sr3")
    assert degrade(x, op).shape == (4, 4)
    noisy = DegradationOp.for_task("denoise", 10.0)
    np.testing.assert_array_equal(degrade(x, noisy, 5), degrade(x, noisy, 5))
    assert not np.array_equal(degrade(x, noisy, 5), degrade(x, noisy, 6))


def test_adjoint_examples(rng):
    v = rng.normal(size=(4, 5))
    np.testing.assert_array_equal(adjoint_degrade(v, DegradationOp()), v)
    up = adjoint_degrade(v, DegradationOp("superres", None, 2))
    assert up.shape == (8, 10)
    np.testing.assert_array_equal(up[::2, ::2], v)
    assert np.count_nonzero(up) == np.count_nonzero(v)


def _random_op(r):
    size = int(r.choice([1, 3, 5, 7]))
    kind = r.choice(["gaussian", "uniform"])
    k = make_kernel(kind, size, float(r.uniform(0.5, 2.0)))
    q = int(r.choice([1, 2]))
    return DegradationOp("superres" if q > 1 else "deblur", k, q)


def test_adjoint_identity_100_trials():
    r = np.random.default_rng(99)
    for _ in range(100):
        op = _random_op(r)
        x = r.normal(size=(10, 10))
        v = r.normal(size=(10 // op.q, 10 // op.q))
        lhs = np.sum(degrade_clean(x, op) * v)
        rhs = np.sum(x * adjoint_degrade(v, op))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_op_norm_dense_oracle():
    op = DegradationOp.for_task("sr3")
    shape = (5, 5)
    n = 15 * 15
    T = np.stack([degrade_clean(e.reshape(15, 15), op).ravel() for e in np.eye(n)], axis=1)
    assert op_norm_sq(op, shape) == pytest.approx(np.linalg.norm(T, 2) ** 2, rel=1e-6)


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold([1.5, -2.0], 0.0), [1.5, -2.0])
    np.testing.assert_array_equal(soft_threshold([0.5], 1.0), [0.0])
    np.testing.assert_array_equal(soft_threshold([3.0, -2.0], 1.0), [2.0, -1.0])
    with pytest.raises(ValueError):
        soft_threshold([1.0], -1.0)


def test_soft_threshold_is_prox_grid_search():
    grid = np.linspace(-5, 5, 10001)
    for v, t in [(2.3, 1.0), (-0.4, 0.5), (4.1, 0.0), (-3.7, 2.2)]:
        obj = 0.5 * (grid - v) ** 2 + t * np.abs(grid)
        assert soft_threshold([v], t)[0] == pytest.approx(grid[np.argmin(obj)], abs=1e-3)


def _basis(r, n=6, p=3):
    return compute_pca(r.normal(size=(20, n)) * np.linspace(3, 0.5, n))


def test_code_patch_examples(rng):
    b = _basis(rng)
    y = rng.normal(size=6)
    np.testing.assert_allclose(code_patch(y, b, 0.0, 1).coefficients, b.vectors.T @ (y - b.centroid), atol=1e-12)
    np.testing.assert_array_equal(code_patch(b.centroid, b, 0.3).coefficients, 0.0)


def test_code_patch_matches_long_run(rng):
    b = _basis(rng)
    y = rng.normal(size=6) * 2
    ref = code_patch(y, b, 0.1, steps=10_000)
    got = code_patch(y, b, 0.1, steps=10)
    assert code_objective(y, b, got.coefficients, 0.1) <= code_objective(y, b, ref.coefficients, 0.1) + 1e-8


@given(seed=st.integers(0, 10_000), lam=st.floats(0, 2))
def test_code_objective_monotone(seed, lam):
    r = np.random.default_rng(seed)
    b = _basis(r)
    trace = []
    code_patch(r.normal(size=6) * 3, b, lam, steps=20, trace=trace)
    assert np.all(np.diff(trace) <= 1e-12)


def test_reconstruct_patch(rng):
    b = _basis(rng)
    np.testing.assert_array_equal(reconstruct_patch(SparseCode(np.zeros(b.n_components)), b), b.centroid)
    a = rng.normal(size=b.n_components)
    y = b.centroid + b.vectors @ a
    np.testing.assert_allclose(reconstruct_patch(code_patch(y, b, 0.0), b), y, atol=1e-10)
    np.testing.assert_allclose(reconstruct_patch(SparseCode(a), b), b.centroid + b.vectors @ a)


def test_bicubic_interpolates_samples(rng):
    y = rng.uniform(0, 255, (6, 7))
    up = bicubic_upsample(y, 3)
    assert up.shape == (18, 21)
    np.testing.assert_allclose(up[::3, ::3], y, atol=1e-10)
    ramp = np.add.outer(np.arange(6.0), np.arange(7.0))
    # cubic convolution reproduces linear functions away from the border
    np.testing.assert_allclose(bicubic_upsample(ramp, 3)[3:12, 3:15], np.add.outer(np.arange(3, 12) / 3, np.arange(3, 15) / 3), atol=1e-10)


def test_noise_estimate(rng):
    assert estimate_noise(rng.normal(0, 10, (200, 200))) == pytest.approx(10, rel=0.05)


def test_restore_identity_op(rng):
    y = rng.uniform(0, 255, (16, 16))
    cfg = RestoreConfig(strategy="kmeans", lam=0.0, outer_iters=1, inner_iters=1, kmeans_C=2)
    np.testing.assert_allclose(restore(y, DegradationOp(), cfg), y, atol=1e-8)


@pytest.mark.parametrize("strategy", ["agnn", "goc", "kmeans", "geod"])
def test_restore_small_runs(strategy):
    from manifold_restore.metrics import psnr
    from manifold_restore.synthetic import textured_image

    x = textured_image(48, seed=1)
    op = DegradationOp.for_task("sr3")
    y = degrade(x, op)
    cfg = RestoreConfig(strategy=strategy, outer_iters=1, inner_iters=3, goc=GocParams(C=8, Kmax=10))
    trace = []
    a = restore(y, op, cfg, seed=2, trace=trace)
    np.testing.assert_array_equal(a, restore(y, op, cfg, seed=2))
    assert a.shape == x.shape
    assert psnr(x, a) > psnr(x, bicubic_upsample(y, 3))
    for before, after in trace:
        assert after <= before + 1e-9


def test_restore_denoise_clean_input():
    from manifold_restore.metrics import psnr
    from manifold_restore.synthetic import textured_image

    x = textured_image(32, seed=0)
    op = DegradationOp.for_task("denoise", 0.0)
    xh = restore(degrade(x, op), op, RestoreConfig(strategy="kmeans", outer_iters=1, inner_iters=2))
    assert psnr(x, xh) >= psnr(x, degrade(x, op))


def test_restore_config_validation():
    with pytest.raises(ValueError):
        RestoreConfig(strategy="spectral")
    with pytest.raises(ValueError):
        RestoreConfig(lam=-1.0)
    with pytest.raises(ValueError):
        RestoreConfig(outer_iters=0)
