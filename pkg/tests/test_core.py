import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tomocouple.core import (
    Geometry,
    ShapeError,
    check_image,
    check_sinogram,
    is_undersampled,
    make_rng,
    nearest_pixel,
    pixel_centers,
    reconstruction_circle_mask,
)


def test_geometry_lattice():
    g = Geometry(4, 5)
    np.testing.assert_allclose(g.angles, [0, math.pi / 4, math.pi / 2, 3 * math.pi / 4])
    np.testing.assert_allclose(g.detector_positions, [-2, -1, 0, 1, 2])
    assert g.shape == (4, 5)
    assert g.image_size == 5


@pytest.mark.parametrize("m, n", [(0, 4), (4, 0), (-1, 3)])
def test_geometry_rejects_empty(m, n):
    with pytest.raises(ValueError):
        Geometry(m, n)


def test_pixel_centers_orientation():
    x1, x2 = pixel_centers(4)
    assert x1[0, 0] == -1.5 and x2[0, 0] == 1.5
    assert x1[3, 3] == 1.5 and x2[3, 3] == -1.5


@given(st.integers(min_value=1, max_value=40))
def test_coordinate_round_trip(size):
    x1, x2 = pixel_centers(size)
    i, j = nearest_pixel(x1, x2, size)
    ii, jj = np.indices((size, size))
    assert np.array_equal(i, ii) and np.array_equal(j, jj)


@pytest.mark.parametrize("size", [1, 2, 7, 16, 33, 256])
def test_mask_matches_brute_force_count(size):
    mask = reconstruction_circle_mask(size)
    r = (size - 1) / 2.0
    count = sum(
        1
        for i in range(size)
        for j in range(size)
        if (j - r) ** 2 + (r - i) ** 2 <= r * r
    )
    assert int(mask.sum()) == count


@given(st.integers(min_value=1, max_value=64))
def test_mask_symmetry(size):
    m = reconstruction_circle_mask(size)
    assert np.array_equal(m, m[::-1]) and np.array_equal(m, m[:, ::-1]) and np.array_equal(m, m.T)


@pytest.mark.parametrize(
    "m, n, expected",
    [(402, 256, False), (50, 256, True), (403, 256, False), (75, 256, True), (201, 128, False), (100, 256, True)],
)
def test_is_undersampled(m, n, expected):
    assert is_undersampled(m, n) is expected


def test_rng_streams_are_deterministic_and_distinct():
    a = make_rng(7, 1, 2).random(5)
    b = make_rng(7, 1, 2).random(5)
    c = make_rng(7, 2, 1).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_rng_rejects_bad_seed(seed):
    with pytest.raises(ValueError):
        make_rng(seed)


def test_shape_checks():
    g = Geometry(3, 4)
    with pytest.raises(ShapeError):
        check_image(np.zeros((4, 5)), 4)
    with pytest.raises(ShapeError):
        check_sinogram(np.zeros((4, 3)), g)
    assert check_sinogram(np.zeros((3, 4), dtype=np.float32), g).dtype == np.float64
