"""Image quality metrics: SSIM, PSNR and mean absolute error."""

from __future__ import annotations

import numpy as np

from texfield.errors import DimensionError

SSIM_WINDOW = 8
C1 = 0.01**2
C2 = 0.03**2
PSNR_CAP = 100.0


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _box_mean(x: np.ndarray, w: int) -> np.ndarray:
    """Mean over every w x w window fully inside ``x`` (valid positions only)."""
    c = np.zeros((x.shape[0] + 1, x.shape[1] + 1) + x.shape[2:])
    c[1:, 1:] = x.cumsum(axis=0).cumsum(axis=1)
    s = c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w]
    return s / (w * w)


def ssim(a, b, window: int = SSIM_WINDOW) -> float:
    """Mean structural similarity over all ``window``² uniform windows, averaged over channels.

    Images are (H, W) or (H, W, C) with values in [0, 1]; statistics use
    population (1/n) moments and the constants ``C1 = 0.01²``, ``C2 = 0.03²``.
    """
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if a.shape[0] < window or a.shape[1] < window:
        raise DimensionError(f"images of shape {a.shape[:2]} are smaller than the {window}x{window} window")
    mx, my = _box_mean(a, window), _box_mean(b, window)
    sxx = _box_mean(a * a, window) - mx * mx
    syy = _box_mean(b * b, window) - my * my
    sxy = _box_mean(a * b, window) - mx * my
    num = (2 * mx * my + C1) * (2 * sxy + C2)
    den = (mx * mx + my * my + C1) * (sxx + syy + C2)
    return float(np.mean(np.mean(num / den, axis=(0, 1))))


def psnr(a, b, mask=None) -> float:
    """Peak signal-to-noise ratio for unit dynamic range, capped at ``PSNR_CAP`` dB."""
    a, b = _check_pair(a, b)
    d = (a - b) ** 2
    if mask is not None:
        d = d[np.asarray(mask, dtype=bool)]
    mse = float(d.mean()) if d.size else 0.0
    if mse <= 10 ** (-PSNR_CAP / 10):
        return PSNR_CAP
    return float(10.0 * np.log10(1.0 / mse))


def mean_l1(a, b, mask=None) -> float:
    """Mean absolute difference per channel value, optionally over mask pixels only."""
    a, b = _check_pair(a, b)
    d = np.abs(a - b)
    if mask is not None:
        d = d[np.asarray(mask, dtype=bool)]
    return float(d.mean()) if d.size else 0.0
