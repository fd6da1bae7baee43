import math

import numpy as np
import pytest

from tomocouple.core import Geometry, reconstruction_circle_mask
from tomocouple.phantom import (
    SHEPP_LOGAN,
    UNIT_DISK,
    Ellipse,
    Phantom,
    analytic_sinogram,
    line_integral_quadrature,
    line_integrals,
    rasterize,
)


def test_center_value_is_sum_of_containing_ellipses():
    img = rasterize(SHEPP_LOGAN, 257)
    expected = sum(e.rho for e in SHEPP_LOGAN.ellipses if e.contains(0.0, 0.0))
    assert img[128, 128] == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("size", [8, 64, 255, 256])
def test_unit_disk_rasterises_to_circle_mask(size):
    assert np.array_equal(rasterize(UNIT_DISK, size), reconstruction_circle_mask(size))


def test_rasterize_needs_minimum_size():
    with pytest.raises(ValueError):
        rasterize(SHEPP_LOGAN, 4)


def test_ellipse_validation():
    with pytest.raises(ValueError):
        Ellipse(0, 0, 0.0, 1.0, 0, 1)
    with pytest.raises(ValueError):
        Phantom(())


def test_disk_sinogram_closed_form():
    g = Geometry(7, 64)
    s = analytic_sinogram(UNIT_DISK, g)
    t = g.detector_positions
    chord = 2.0 * np.sqrt(np.maximum(32.0**2 - t**2, 0.0))
    for row in s:
        np.testing.assert_allclose(row, chord, rtol=1e-13)


def test_line_integrals_match_quadrature_oracle(rng):
    scale = 128.0
    theta = rng.uniform(0, math.pi, 20)
    t = rng.uniform(-100, 100, 20)
    closed = line_integrals(SHEPP_LOGAN, theta, t, scale)
    for th, tt, val in zip(theta, t, closed):
        quad = line_integral_quadrature(SHEPP_LOGAN, th, tt, scale)
        assert abs(val - quad) <= 1e-3 * abs(quad), (th, tt)


def test_sinogram_lattice_matches_quadrature(rng):
    g = Geometry(402, 256)
    s = analytic_sinogram(SHEPP_LOGAN, g)
    for _ in range(5):
        k = int(rng.integers(0, 402))
        n = int(rng.integers(40, 216))
        quad = line_integral_quadrature(SHEPP_LOGAN, g.angles[k], g.detector_positions[n], 128.0)
        assert s[k, n] == pytest.approx(quad, rel=1e-3)


def test_disk_sinogram_is_even_in_t():
    g = Geometry(8, 32)
    s = analytic_sinogram(UNIT_DISK, g)
    np.testing.assert_allclose(s, s[:, ::-1], rtol=1e-13)


def test_scale_must_be_positive():
    with pytest.raises(ValueError):
        analytic_sinogram(UNIT_DISK, Geometry(2, 8), scale=0.0)
