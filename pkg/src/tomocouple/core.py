"""Geometry conventions shared by every operator in the package.

Images are ``(P, P)`` float64 arrays on unit pixel spacing. Pixel ``(i, j)``
has its center at ``x1 = j - (P-1)/2`` and ``x2 = (P-1)/2 - i``, so row 0 is
the top of the image and the origin sits at the lattice center.

Sinograms are ``(M, N)`` float64 arrays, one row per view. View ``k`` is at
``theta_k = k*pi/M`` and detector cell ``n`` is centered on
``t_n = n - (N-1)/2``. A ray is the line ``x1*cos(theta) + x2*sin(theta) = t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class ShapeError(ValueError):
    """Raised when an array does not match the geometry it is used with."""


@dataclass(frozen=True)
class Geometry:
    """Parallel-beam acquisition: ``num_angles`` views over [0, pi)."""

    num_angles: int
    num_cells: int

    def __post_init__(self):
        if self.num_angles < 1 or self.num_cells < 1:
            raise ValueError(
                f"geometry needs at least one view and one cell, got "
                f"{self.num_angles}x{self.num_cells}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_angles, self.num_cells)

    @property
    def image_size(self) -> int:
        return self.num_cells

    @cached_property
    def angles(self) -> np.ndarray:
        return np.arange(self.num_angles) * (math.pi / self.num_angles)

    @cached_property
    def detector_positions(self) -> np.ndarray:
        return np.arange(self.num_cells) - (self.num_cells - 1) / 2.0


def pixel_centers(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x1, x2)`` center coordinates, each shaped ``(size, size)``."""
    h = (size - 1) / 2.0
    idx = np.arange(size, dtype=np.float64)
    x1 = np.broadcast_to(idx - h, (size, size))
    x2 = np.broadcast_to((h - idx)[:, None], (size, size))
    return x1, x2


def nearest_pixel(x1, x2, size: int):
    """Inverse of :func:`pixel_centers`: continuous coordinates to ``(i, j)``."""
    h = (size - 1) / 2.0
    j = np.rint(np.asarray(x1) + h).astype(np.int64)
    i = np.rint(h - np.asarray(x2)).astype(np.int64)
    return i, j


def reconstruction_circle_mask(size: int) -> np.ndarray:
    """Binary mask of pixels whose center lies within ``(size-1)/2`` of the center."""
    if size < 1:
        raise ValueError("mask size must be positive")
    x1, x2 = pixel_centers(size)
    radius = (size - 1) / 2.0
    return (x1 * x1 + x2 * x2 <= radius * radius).astype(np.float64)


def is_undersampled(num_angles: int, num_cells: int) -> bool:
    """Angular undersampling test for parallel-beam data.

    True when the view count falls short of ``N*pi/2`` whole views, i.e.
    ``M < floor(N*pi/2)``; 402 views of 256 cells count as well sampled.
    """
    if num_angles < 1 or num_cells < 1:
        raise ValueError("counts must be positive")
    return num_angles < math.floor(num_cells * math.pi / 2.0)


def make_rng(seed: int, *streams: int) -> np.random.Generator:
    """Deterministic generator for ``seed``, optionally split into sub-streams.

    PCG64 output is platform independent, so a given ``(seed, *streams)``
    always yields the same sequence.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *streams])))


def check_image(img, size: int) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (size, size):
        raise ShapeError(f"expected image of shape {(size, size)}, got {img.shape}")
    return img


def check_sinogram(sino, geometry: Geometry) -> np.ndarray:
    sino = np.asarray(sino, dtype=np.float64)
    if sino.shape != geometry.shape:
        raise ShapeError(f"expected sinogram of shape {geometry.shape}, got {sino.shape}")
    return sino
