"""Shepp-Logan phantom: rasterisation and exact line integrals.

Ellipses live in normalised coordinates where the unit square ``[-1, 1]^2``
covers the image. Intensities are differential and overlapping ellipses add.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tomocouple.core import Geometry, pixel_centers


@dataclass(frozen=True)
class Ellipse:
    x0: float
    y0: float
    a: float  # semi-axis along the rotated x axis
    b: float  # semi-axis along the rotated y axis
    phi: float  # counter-clockwise rotation, radians
    rho: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("ellipse semi-axes must be positive")

    def contains(self, x, y):
        dx = np.asarray(x) - self.x0
        dy = np.asarray(y) - self.y0
        c, s = math.cos(self.phi), math.sin(self.phi)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.a) ** 2 + (v / self.b) ** 2 <= 1.0


@dataclass(frozen=True)
class Phantom:
    ellipses: tuple[Ellipse, ...]

    def __post_init__(self):
        if not self.ellipses:
            raise ValueError("phantom needs at least one ellipse")

    def value(self, x, y):
        """Phantom density at normalised coordinates (broadcasts)."""
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        for e in self.ellipses:
            out = out + e.rho * e.contains(x, y)
        return out


def _deg(d):
    return math.radians(d)


# Original Shepp & Logan (1974) contrast, 10 ellipses.
SHEPP_LOGAN = Phantom(
    (
        Ellipse(0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
        Ellipse(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
        Ellipse(0.22, 0.0, 0.31, 0.11, _deg(72.0), -0.02),
        Ellipse(-0.22, 0.0, 0.41, 0.16, _deg(108.0), -0.02),
        Ellipse(0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
        Ellipse(0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
        Ellipse(0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
        Ellipse(-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
        Ellipse(0.0, -0.605, 0.023, 0.023, 0.0, 0.01),
        Ellipse(0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
    )
)

UNIT_DISK = Phantom((Ellipse(0.0, 0.0, 1.0, 1.0, 0.0, 1.0),))


def rasterize(phantom: Phantom, size: int) -> np.ndarray:
    """Point-sample ``phantom`` at the pixel centers of a ``size x size`` grid.

    The normalised interval [-1, 1] spans the outermost pixel centers, so a
    centered unit disk rasterises to exactly the reconstruction circle.
    """
    if size < 8:
        raise ValueError("phantom rasterisation needs size >= 8")
    x1, x2 = pixel_centers(size)
    half = (size - 1) / 2.0
    return phantom.value(x1 / half, x2 / half)


def line_integrals(phantom: Phantom, theta, t, scale: float) -> np.ndarray:
    """Closed-form integrals along the lines ``x1 cos(theta) + x2 sin(theta) = t``.

    ``theta`` and ``t`` broadcast; ``t`` and the result are in detector
    units, with ``scale`` detector units per normalised phantom unit.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    theta = np.asarray(theta, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64) / scale
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    out = np.zeros(np.broadcast(theta, t).shape)
    for e in phantom.ellipses:
        tp = t - e.x0 * cos_t - e.y0 * sin_t
        th = theta - e.phi
        a2 = (e.a * np.cos(th)) ** 2 + (e.b * np.sin(th)) ** 2
        disc = np.maximum(a2 - tp * tp, 0.0)
        out += scale * 2.0 * e.rho * e.a * e.b * np.sqrt(disc) / a2
    return out


def analytic_sinogram(phantom: Phantom, geometry: Geometry, scale: float | None = None) -> np.ndarray:
    """Exact line integrals of ``phantom`` on the ``geometry`` lattice.

    ``scale`` converts normalised phantom lengths to detector units and
    defaults to ``N/2`` so the phantom's unit circle inscribes the detector.
    """
    if scale is None:
        scale = geometry.num_cells / 2.0
    return line_integrals(phantom, geometry.angles[:, None], geometry.detector_positions[None, :], scale)


def line_integral_quadrature(phantom: Phantom, theta: float, t: float, scale: float, step: float = 1e-3) -> float:
    """Midpoint-rule integral of ``phantom`` along one ray, ``step`` in detector units.

    Slow reference used to check :func:`analytic_sinogram`.
    """
    n = int(math.ceil(2.0 * scale / step))
    s = -scale + step * (np.arange(n) + 0.5)
    # points on the line x*cos + y*sin = t, parametrised by arclength s
    x = (t * math.cos(theta) - s * math.sin(theta)) / scale
    y = (t * math.sin(theta) + s * math.cos(theta)) / scale
    return float(step * phantom.value(x, y).sum())
