"""Image-quality metrics and the Poisson noise model."""

from __future__ import annotations

import math

import numpy as np

from tomocouple.core import ShapeError


def _pair(f, r, mask):
    f = np.asarray(f, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if f.shape != r.shape:
        raise ShapeError(f"shape mismatch: {f.shape} vs {r.shape}")
    if mask is None:
        return f, r
    mask = np.asarray(mask)
    if mask.shape != f.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match {f.shape}")
    sel = mask != 0
    return f[sel], r[sel]


def mse(f, r, mask=None) -> float:
    """Mean squared error, averaged over ``mask`` support when given."""
    f, r = _pair(f, r, mask)
    d = f - r
    return float(np.mean(d * d))


def psnr(f, r, mask=None) -> float:
    """Peak signal-to-noise ratio in dB, with the reference maximum as peak.

    Returns ``inf`` when the images agree exactly.
    """
    fs, rs = _pair(f, r, mask)
    peak = float(np.max(rs))
    if not np.any(rs):
        raise ValueError("reference is identically zero")
    err = mse(fs, rs)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def add_poisson_noise(sino, sigma_fraction: float, rng: np.random.Generator, reference_mean=None) -> np.ndarray:
    """Rescaled Poisson corruption with standard deviation ``sigma_fraction * m``
    at the value ``m``.

    ``m`` is the sinogram's own mean unless ``reference_mean`` is given (e.g.
    the mean of a fully sampled sinogram of the same object). Negative samples
    are clamped to zero before conversion to counts.
    """
    if sigma_fraction <= 0:
        raise ValueError("sigma_fraction must be positive")
    s = np.maximum(np.asarray(sino, dtype=np.float64), 0.0)
    m = float(s.mean()) if reference_mean is None else float(reference_mean)
    if m == 0.0:
        return s.copy()
    counts_per_unit = 1.0 / (sigma_fraction * sigma_fraction * m)
    return rng.poisson(counts_per_unit * s) / counts_per_unit
