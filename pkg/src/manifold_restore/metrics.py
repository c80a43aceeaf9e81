"""Image quality metrics on 8-bit luminance."""

from __future__ import annotations

import numpy as np
from scipy.signal import correlate2d

PSNR_CAP = 99.0
PEAK = 255.0


def psnr(x, xhat) -> float:
    """10 log10(255^2 / MSE), capped at 99 dB for identical images."""
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    if x.shape != xhat.shape:
        raise ValueError("image shapes differ")
    mse = np.mean((x - xhat) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(PEAK**2 / mse)))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(x, xhat, K1: float = 0.01, K2: float = 0.03, L: float = PEAK, window=None) -> np.ndarray:
    """Local SSIM over every full window position (no padding)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(xhat, dtype=float)
    if x.shape != y.shape:
        raise ValueError("image shapes differ")
    w = gaussian_window() if window is None else window
    if x.shape[0] < w.shape[0] or x.shape[1] < w.shape[1]:
        raise ValueError("image smaller than the SSIM window")

    def f(a):
        return correlate2d(a, w, mode="valid")

    C1, C2 = (K1 * L) ** 2, (K2 * L) ** 2
    mx, my = f(x), f(y)
    sxx = f(x * x) - mx * mx
    syy = f(y * y) - my * my
    sxy = f(x * y) - mx * my
    return ((2 * mx * my + C1) * (2 * sxy + C2)) / ((mx * mx + my * my + C1) * (sxx + syy + C2))


def ssim(x, xhat) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 255."""
    return float(np.mean(ssim_map(x, xhat)))
