import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from loewner.disk import (
    DiskAutomorphism,
    DiskPoint,
    apply,
    cayley_from_halfplane,
    cayley_to_halfplane,
    hyperbolic_distance,
    inverse_apply,
    pseudo_hyperbolic,
)

disk_points = st.builds(
    lambda r, th: r * cmath.exp(1j * th),
    st.floats(0, 0.95),
    st.floats(0, 2 * math.pi),
)
unimodular = st.floats(0, 2 * math.pi).map(lambda th: cmath.exp(1j * th))


@pytest.mark.parametrize(
    "a, b, z, expected",
    [
        (0, 1, 0.3 + 0.1j, 0.3 + 0.1j),
        (0.5, 1, 0, 0.5),
        (0.5, 1, -0.5, 0),
    ],
)
def test_apply_examples(a, b, z, expected):
    assert abs(apply(DiskAutomorphism(a, b), z) - expected) < 1e-15


@pytest.mark.parametrize(
    "a, b, z, expected",
    [
        (0.5, 1, 0.5, 0),
        # the formula gives (0 - 0.5) / (1 - 0) = -0.5; confirmed by the round trip below
        (0.5, 1, 0, -0.5),
    ],
)
def test_inverse_apply_examples(a, b, z, expected):
    h = DiskAutomorphism(a, b)
    w = inverse_apply(h, z)
    assert abs(w - expected) < 1e-15
    assert abs(apply(h, w) - z) < 1e-15


def test_round_trip_rotation():
    h = DiskAutomorphism(0.3j, 1j)
    assert abs(inverse_apply(h, apply(h, 0.2)) - 0.2) < 1e-14


def test_rotation_factor_is_normalized():
    h = DiskAutomorphism(0.2, 3 + 4j)
    assert abs(abs(h.b) - 1) <= 1e-14


@pytest.mark.parametrize("value", [1.0, 1j, 0.9999999999999999, 2 + 0j])
def test_disk_point_rejects_boundary(value):
    with pytest.raises(ValueError):
        DiskPoint(value)


def test_automorphism_rejects_bad_center():
    with pytest.raises(ValueError):
        DiskAutomorphism(1.0, 1)


@pytest.mark.parametrize(
    "z, w, expected",
    [
        (0, 0.4 - 0.3j, 0.5),
        (0.5, 0.5, 0.0),
        (0.5, -0.5, 0.8),
    ],
)
def test_pseudo_hyperbolic_examples(z, w, expected):
    assert pseudo_hyperbolic(z, w) == pytest.approx(expected, abs=1e-15)


def test_hyperbolic_distance_unit_radius():
    r = (math.e - 1) / (math.e + 1)
    assert hyperbolic_distance(0, 0) == 0
    assert hyperbolic_distance(0, r) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("z, expected", [(0, 1j), (-1, 0), (0.5, 3j)])
def test_cayley_examples(z, expected):
    assert abs(cayley_to_halfplane(z) - expected) < 1e-15


@given(disk_points, disk_points, unimodular)
def test_apply_inverse_identity(a, z, b):
    h = DiskAutomorphism(a, b)
    assert abs(inverse_apply(h, apply(h, z)) - z) <= 1e-12 / (1 - abs(a))


@given(disk_points, disk_points, disk_points, unimodular)
def test_mobius_invariance(a, z, w, b):
    h = DiskAutomorphism(a, b)
    lhs = pseudo_hyperbolic(apply(h, z), apply(h, w))
    assert lhs == pytest.approx(pseudo_hyperbolic(z, w), abs=1e-9)


@given(disk_points, unimodular)
def test_derivative_matches_difference(a, b):
    h = DiskAutomorphism(a, b)
    z, eps = 0.1 + 0.05j, 1e-6
    fd = (apply(h, z + eps) - apply(h, z - eps)) / (2 * eps)
    assert abs(fd - h.derivative(z)) <= 1e-6 * max(1, abs(fd))


@given(st.floats(-5, 5), st.floats(0.1, 5))
def test_cayley_round_trip(x, y):
    w = complex(x, y)
    z = cayley_from_halfplane(w)
    assert abs(z) < 1
    assert abs(cayley_to_halfplane(z) - w) <= 1e-12 * max(1, abs(w)) ** 2


def test_cayley_inverse_rejects_lower_halfplane():
    with pytest.raises(ValueError):
        cayley_from_halfplane(1 - 1j)


def test_vectorized_pseudo_hyperbolic():
    z = np.array([0, 0.5, 0.5j])
    d = pseudo_hyperbolic(z, 0)
    assert np.allclose(d, [0, 0.5, 0.5])
