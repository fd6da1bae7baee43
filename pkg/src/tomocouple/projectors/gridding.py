"""Fourier-slice projectors by kernel gridding.

Forward: deapodise, zero-pad to a ``K x K`` grid (``K = alpha*N`` rounded up
to even), 2-D FFT, interpolate the Cartesian spectrum onto polar samples with
a separable ``J``-tap kernel, then 1-D inverse FFT of every polar slice.
The adjoint applies the conjugate transpose of each of those steps in
reverse order, so forward and adjoint are transposes up to FFT roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.special import i0

from tomocouple.core import Geometry

DEAPODIZER_FLOOR = 1e-8


@dataclass(frozen=True)
class GriddingParams:
    """Oversampling ``alpha``, tap count ``width`` and kernel shape parameter."""

    kernel: str  # "kaiser_bessel" or "pswf"
    alpha: float
    width: int = 7
    shape: float | None = None

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ValueError("oversampling must exceed 1")
        if self.width < 3:
            raise ValueError("kernel needs at least 3 taps")
        if self.kernel not in ("kaiser_bessel", "pswf"):
            raise ValueError(f"unknown gridding kernel {self.kernel!r}")

    @property
    def beta(self) -> float:
        if self.shape is not None:
            return self.shape
        if self.kernel == "kaiser_bessel":
            return kaiser_bessel_beta(self.width, self.alpha)
        return 6.0 * math.pi

    def grid_size(self, n: int) -> int:
        k = int(math.ceil(self.alpha * n))
        return k + (k % 2)


# WF: prolate spheroidal kernel, alpha = 2. KB: Kaiser-Bessel, alpha = 1.5.
WF_PARAMS = GriddingParams("pswf", 2.0)
KB_PARAMS = GriddingParams("kaiser_bessel", 1.5)


def kaiser_bessel_beta(width: int, alpha: float) -> float:
    """Shape parameter minimising aliasing for a given width and oversampling
    (Beatty, Nishimura & Pauly, 2005)."""
    return math.pi * math.sqrt((width / alpha) ** 2 * (alpha - 0.5) ** 2 - 0.8)


@lru_cache(maxsize=8)
def prolate_coefficients(c: float, n_terms: int = 80) -> np.ndarray:
    """Legendre coefficients of the zeroth prolate spheroidal wave function.

    The prolate operator ``-(d/dx)(1-x^2)(d/dx) + c^2 x^2`` is three-term
    banded in the Legendre basis; the eigenvector of its smallest eigenvalue
    gives psi_0. Normalised so that psi_0(0) = 1.
    """
    ks = np.arange(0, 2 * n_terms, 2, dtype=np.float64)
    n = ks.size
    T = np.zeros((n, n))
    c2 = c * c
    for idx, k in enumerate(ks):
        # x^2 P_k = up*P_{k+2} + mid*P_k + down*P_{k-2}
        mid = (2 * k * k + 2 * k - 1) / ((2 * k - 1) * (2 * k + 3))
        T[idx, idx] = k * (k + 1) + c2 * mid
        if idx + 1 < n:
            T[idx + 1, idx] = c2 * (k + 1) * (k + 2) / ((2 * k + 1) * (2 * k + 3))
        if idx > 0:
            T[idx - 1, idx] = c2 * k * (k - 1) / ((2 * k + 1) * (2 * k - 1))
    vals, vecs = np.linalg.eig(T)
    d = np.real(vecs[:, np.argmin(np.real(vals))])
    coef = np.zeros(2 * n)
    coef[::2] = d
    return coef / legendre.legval(0.0, coef)


def kernel_values(params: GriddingParams, v: np.ndarray) -> np.ndarray:
    """Kernel evaluated at offsets ``v`` (oversampled-grid units)."""
    x = 2.0 * np.asarray(v, dtype=np.float64) / params.width
    inside = np.abs(x) <= 1.0
    xc = np.where(inside, x, 0.0)
    if params.kernel == "kaiser_bessel":
        vals = i0(params.beta * np.sqrt(1.0 - xc * xc)) / i0(params.beta)
    else:
        vals = legendre.legval(xc, prolate_coefficients(params.beta))
    return np.where(inside, vals, 0.0)


def kernel_transform(params: GriddingParams, x: np.ndarray, grid_size: int) -> np.ndarray:
    """Inverse Fourier transform of the kernel at image-domain offsets ``x``."""
    nodes, weights = legendre.leggauss(256)
    half = params.width / 2.0
    v = half * nodes
    phase = np.cos(2.0 * np.pi * np.outer(np.asarray(x, dtype=np.float64), v) / grid_size)
    return half * phase @ (weights * kernel_values(params, v))


@dataclass(frozen=True)
class GriddingPlan:
    """Geometry-dependent tables shared by forward and adjoint."""

    grid_size: int
    deapodizer: np.ndarray  # (P, P)
    by: np.ndarray  # (M, K) first row tap
    bx: np.ndarray  # (M, K) first column tap
    wy: np.ndarray  # (M, K, J)
    wx: np.ndarray  # (M, K, J)
    phase: np.ndarray  # (M, K) detector-origin shift
    offset: int  # array index of pixel 0 (mod K)


def _taps(coord, width):
    base = np.floor(coord - width / 2.0).astype(np.int64) + 1
    offs = coord[..., None] - (base[..., None] + np.arange(width))
    return base, offs


@lru_cache(maxsize=16)
def make_plan(params: GriddingParams, geometry: Geometry) -> GriddingPlan:
    N = geometry.num_cells
    P = N
    K = params.grid_size(N)
    if K < P:
        raise ValueError("gridding grid smaller than the image")
    m = np.fft.fftfreq(K, d=1.0 / K)  # signed radial index in FFT order
    theta = geometry.angles[:, None]
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    kc = m[None, :] * cos_t
    kr = -m[None, :] * sin_t
    bx, ox = _taps(kc, params.width)
    by, oy = _taps(kr, params.width)
    wx = kernel_values(params, ox)
    wy = kernel_values(params, oy)

    # pixel j sits at signed array index j - P//2, i.e. physical x1 = index + delta
    offset = P // 2
    delta = offset - (P - 1) / 2.0
    shift = -(N - 1) / 2.0 - delta * (cos_t - sin_t)
    phase = np.exp(2j * np.pi * m[None, :] * shift / K)

    idx = np.arange(P) - offset
    ker = kernel_transform(params, idx, K)
    ker = np.maximum(ker, DEAPODIZER_FLOOR * ker.max())
    deap = 1.0 / np.outer(ker, ker)
    return GriddingPlan(K, deap, by, bx, wy, wx, phase, offset)


def _embed(img, plan):
    P = img.shape[0]
    K = plan.grid_size
    a = np.zeros((K, K), dtype=np.complex128)
    idx = (np.arange(P) - plan.offset) % K
    a[np.ix_(idx, idx)] = img * plan.deapodizer
    return a


def _extract(a, plan, P):
    K = plan.grid_size
    idx = (np.arange(P) - plan.offset) % K
    return a[np.ix_(idx, idx)].real * plan.deapodizer


def forward(img, plan: GriddingPlan, n_cells: int, kernels) -> np.ndarray:
    K = plan.grid_size
    H = np.fft.fft2(_embed(img, plan))
    G = np.empty(plan.phase.shape, dtype=np.complex128)
    kernels.grid_gather(H, plan.by, plan.bx, plan.wy, plan.wx, G)
    q = np.fft.ifft(G * plan.phase, axis=1)
    return np.ascontiguousarray(q[:, :n_cells].real)


def adjoint(sino, plan: GriddingPlan, P: int, kernels) -> np.ndarray:
    K = plan.grid_size
    M, N = sino.shape
    q = np.zeros((M, K), dtype=np.complex128)
    q[:, :N] = sino
    # adjoint of the normalised inverse FFT is fft / K
    G = np.fft.fft(q, axis=1) / K * np.conj(plan.phase)
    H = np.zeros((K, K), dtype=np.complex128)
    kernels.grid_scatter(G, plan.by, plan.bx, plan.wy, plan.wx, H)
    # adjoint of the unnormalised forward FFT is K^2 * ifft2
    return _extract(np.fft.ifft2(H) * (K * K), plan, P)
