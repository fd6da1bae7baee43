"""Filtered backprojection with windowed ramp filters."""

from __future__ import annotations

import enum
import math

import numpy as np

from tomocouple.core import Geometry, check_sinogram, reconstruction_circle_mask
from tomocouple.projectors import get_projector


class FilterKind(str, enum.Enum):
    RAMP = "ramp"
    SHLO = "shlo"
    HANN = "hann"
    PARZ = "parz"

    @classmethod
    def parse(cls, token) -> "FilterKind":
        if isinstance(token, cls):
            return token
        try:
            return cls(str(token).strip().lower())
        except ValueError:
            valid = "|".join(k.value for k in cls)
            raise ValueError(f"unknown filter {token!r}; expected one of {valid}") from None

    def __str__(self):
        return self.value


ALL_FILTERS = tuple(FilterKind)


def padded_length(n: int) -> int:
    """Smallest power of two that is at least ``2 * n``."""
    return 1 << int(math.ceil(math.log2(2 * n)))


def ramlak_kernel(length: int) -> np.ndarray:
    """Band-limited ramp kernel at unit spacing, in FFT (wrap-around) order.

    ``h[0] = 1/4``, ``h[n] = 0`` for even ``n`` and ``-1/(pi n)^2`` for odd
    ``n``. Its transform approximates ``|w|`` (cycles per sample) up to
    Nyquist without the DC offset of a sampled ``|w|``.
    """
    n = np.fft.fftfreq(length, d=1.0 / length)
    h = np.zeros(length)
    h[0] = 0.25
    odd = n.astype(np.int64) % 2 == 1
    h[odd] = -1.0 / (math.pi * n[odd]) ** 2
    return h


def window(kind, freqs) -> np.ndarray:
    """Apodisation window at frequencies in cycles per sample (Nyquist 0.5)."""
    kind = FilterKind.parse(kind)
    x = np.abs(np.asarray(freqs, dtype=np.float64)) / 0.5
    if kind is FilterKind.RAMP:
        return np.ones_like(x)
    if kind is FilterKind.SHLO:
        return np.sinc(x / 2.0)
    if kind is FilterKind.HANN:
        return 0.5 * (1.0 + np.cos(math.pi * x))
    # de la Vallee Poussin (Parzen) window
    x = np.minimum(x, 1.0)
    inner = 1.0 - 6.0 * x**2 + 6.0 * x**3
    outer = 2.0 * (1.0 - x) ** 3
    return np.where(x <= 0.5, inner, outer)


def frequency_response(kind, length: int) -> np.ndarray:
    """Windowed ramp response on the ``length``-point FFT grid."""
    ramp = np.fft.fft(ramlak_kernel(length)).real
    return ramp * window(kind, np.fft.fftfreq(length))


def filter_sinogram(sino, kind=FilterKind.RAMP) -> np.ndarray:
    """Filter every row with the windowed ramp.

    Rows are zero-padded to :func:`padded_length`, filtered in the Fourier
    domain and truncated back to their original length.
    """
    s = np.asarray(sino, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("sinogram must be 2-D")
    n = s.shape[1]
    L = padded_length(n)
    H = frequency_response(kind, L)
    spec = np.fft.rfft(s, n=L, axis=1) * H[: L // 2 + 1]
    return np.fft.irfft(spec, n=L, axis=1)[:, :n]


def fbp_reconstruct(sino, adj_kind, kind=FilterKind.RAMP, geometry=None) -> np.ndarray:
    """Filtered backprojection with the backprojector of ``adj_kind``.

    Parameters
    ----------
    sino : ndarray, shape (M, N)
        Parallel-beam sinogram over ``[0, pi)``.
    adj_kind : ProjectorKind or str
        Which discretisation backprojects.
    kind : FilterKind or str
        Ramp window.
    geometry : Geometry, optional
        Defaults to one built from the sinogram shape.

    Returns
    -------
    ndarray, shape (N, N)
        Density estimate, zero outside the reconstruction circle.
    """
    s = np.asarray(sino, dtype=np.float64)
    if geometry is None:
        geometry = Geometry(*s.shape)
    s = check_sinogram(s, geometry)
    M, N = geometry.shape
    q = filter_sinogram(s, kind)
    img = get_projector(adj_kind, geometry).adjoint(q) * (math.pi / M)
    return img * reconstruction_circle_mask(N)
