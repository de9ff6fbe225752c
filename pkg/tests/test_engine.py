import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loewner import drivers as D
from loewner.disk import pseudo_hyperbolic
from loewner.engine import (
    BoundaryEscape,
    EvolutionConfig,
    evolve_array,
    evolve_grid,
    evolve_path,
    evolve_point,
    evolve_with_derivative,
    trajectory,
)

CATALOG = D.oracle_catalog()
disk_z = st.builds(lambda r, th: r * cmath.exp(1j * th), st.floats(0, 0.7), st.floats(0, 2 * math.pi))


def lft(z, t):
    return 1 - (1 - z) / (1 + t * (1 - z))


def test_elliptic_flow_example():
    assert abs(evolve_point(D.constant(1, 0), 0.5, 0, 1).w - 0.5 * math.exp(-1)) < 1e-9


def test_identity_when_s_equals_t():
    r = evolve_with_derivative(D.radial("t"), 0.2j, 0.7, 0.7)
    assert r.w == 0.2j and r.v == 1


def test_radial_implicit_relation():
    w = evolve_point(D.radial(0.0), 0.3, 0, 0.5).w
    assert abs(w / (1 + w) ** 2 - math.exp(-0.5) * 0.3 / 1.3**2) <= 1e-7
    # frozen from an mpmath root solve of the same relation
    assert abs(w - 0.13990132431935788) < 1e-11


@pytest.mark.parametrize(
    "driver, z, t, expected",
    [
        # frozen from mpmath odefun at 30 digits
        (D.radial("t"), 0.5, 1.0, 0.10179033830122330 + 0.020599656459423022j),
        (D.bp("1+exp(-t)*z^2"), 0.3 + 0.2j, 1.5, 0.067393343854244705 + 0.041299169114083179j),
    ],
)
def test_nonautonomous_flows_against_reference(driver, z, t, expected):
    assert abs(evolve_point(driver, z, 0, t).w - expected) < 1e-10


def test_derivative_of_linear_flow():
    r = evolve_with_derivative(D.constant(1, 0), 0.3 - 0.4j, 0, 1)
    assert abs(r.v - math.exp(-1)) < 1e-9


def test_lft_derivative_at_origin():
    r = evolve_with_derivative(D.constant(1, 1), 0, 0, 2)
    assert abs(r.w - 2 / 3) < 1e-9
    assert abs(r.v - 1 / 9) < 1e-9


def test_grid_scaling_and_empty_grid():
    pts = [0.1, 0.2j, -0.3]
    out = evolve_grid(D.constant(1, 0), pts, 0, 1)
    assert all(abs(r.w - z * math.exp(-1)) < 1e-9 for z, r in zip(pts, out))
    assert evolve_grid(D.constant(1, 0), [], 0, 1) == []
    assert evolve_array(D.constant(1, 0), np.array([], dtype=complex), 0, 1).size == 0


@pytest.mark.parametrize("driver", [D.constant(1, 0), D.radial("t"), D.bp("2+z")])
def test_origin_fixed_when_tau_is_zero(driver):
    assert evolve_point(driver, 0, 0, 1.5).w == 0


def test_trajectory_moduli():
    traj = trajectory(D.constant(1, 0), 0.5, 0, 1, 3)
    assert [t for t, _ in traj] == [0, 0.5, 1]
    assert np.allclose([abs(w) for _, w in traj], [0.5, 0.5 * math.exp(-0.5), 0.5 * math.exp(-1)], atol=1e-9)
    assert len(trajectory(D.constant(1, 0), 0.5, 0, 1, 2)) == 2


def test_trajectory_modulus_decreases_for_radial_drivers():
    traj = trajectory(D.radial("t"), 0.6 + 0.2j, 0, 2, 40)
    mods = [abs(w) for _, w in traj]
    assert all(b < a for a, b in zip(mods, mods[1:]))


def test_evolve_path_matches_point_evaluations():
    d = D.radial("t")
    res = evolve_path(d, 0.4j, 0, [0.5, 1.0, 2.0])
    for t, r in zip([0.5, 1.0, 2.0], res):
        assert abs(r.w - evolve_point(d, 0.4j, 0, t).w) < 1e-9


def test_boundary_escape_is_reported():
    # the dilation flow pushes every point to 1; with a coarse guard it escapes quickly
    cfg = EvolutionConfig(boundary_guard=1e-4)
    with pytest.raises(BoundaryEscape):
        evolve_point(CATALOG["dilation"], 0.5, 0, 40, cfg)


def test_start_outside_disk_rejected():
    with pytest.raises(ValueError):
        evolve_point(D.constant(1, 0), 1.0, 0, 1)


def test_reversed_times_rejected():
    with pytest.raises(ValueError):
        evolve_point(D.constant(1, 0), 0.1, 1, 0.5)


@pytest.mark.parametrize("name, exact", [
    ("elliptic", lambda z, t: z * math.exp(-t)),
    ("rotation", lambda z, t: z * cmath.exp(-1j * t)),
    ("parabolic", lft),
    ("dilation", lambda z, t: np.tanh(np.arctanh(z) + t / 2)),
])
def test_closed_form_families(name, exact, grid):
    d = CATALOG[name]
    for t in (0.5, 2.0):
        w = evolve_array(d, grid, 0, t)
        assert np.max(np.abs(w - exact(grid, t))) < 1e-10


@settings(max_examples=25)
@given(st.sampled_from(sorted(CATALOG)), disk_z, st.lists(st.floats(0, 2), min_size=3, max_size=3))
def test_ef2_composition(name, z, ts):
    s, u, t = sorted(ts)
    d = CATALOG[name]
    direct = evolve_point(d, z, s, t).w
    composed = evolve_point(d, evolve_point(d, z, s, u).w, u, t).w
    assert abs(direct - composed) <= 1e-8


@settings(max_examples=25)
@given(st.sampled_from(sorted(CATALOG)), disk_z, disk_z, st.floats(0.1, 2))
def test_schwarz_pick_contraction(name, z, w, t):
    d = CATALOG[name]
    before = pseudo_hyperbolic(z, w)
    after = pseudo_hyperbolic(evolve_point(d, z, 0, t).w, evolve_point(d, w, 0, t).w)
    assert after <= before + 1e-9


@settings(max_examples=25)
@given(st.sampled_from(sorted(CATALOG)), disk_z, st.floats(0.1, 2))
def test_variational_derivative_matches_difference(name, z, t):
    d = CATALOG[name]
    h = 1e-5
    fd = (evolve_point(d, z + h, 0, t).w - evolve_point(d, z - h, 0, t).w) / (2 * h)
    v = evolve_with_derivative(d, z, 0, t).v
    assert abs(v - fd) <= 1e-5 * max(1, abs(v))


@settings(max_examples=20)
@given(st.sampled_from(sorted(CATALOG)), disk_z, st.floats(0.1, 2))
def test_images_stay_in_disk(name, z, t):
    assert abs(evolve_point(CATALOG[name], z, 0, t).w) < 1
