import numpy as np
import pytest

from loewner import drivers as D
from loewner.expr import ExprSyntaxError


@pytest.mark.parametrize(
    "driver, z, expected",
    [
        (D.constant(1, 0), 0.5, -0.5),
        (D.radial(0.0), 0.5, -1.5),
        (D.constant(1, 1), 0, 1),
        (D.constant(1j, 0), 0.5, -0.5j),
    ],
)
def test_vector_field_examples(driver, z, expected):
    assert abs(driver.vector_field(z, 0.3) - expected) < 1e-15


@pytest.mark.parametrize(
    "driver, z, expected",
    [
        (D.constant(1, 0), 0.4 + 0.1j, -1),
        (D.constant(1, 1), 0, -2),
    ],
)
def test_vector_field_derivative_examples(driver, z, expected):
    assert abs(driver.vector_field_dz(z, 0.0) - expected) < 1e-14


@pytest.mark.parametrize("name", sorted(D.oracle_catalog()))
@pytest.mark.parametrize("z", [0j, 0.3 + 0.2j, -0.5j])
def test_derivative_matches_central_difference(name, z):
    d = D.oracle_catalog()[name]
    h = 1e-5
    fd = (d.vector_field(z + h, 0.4) - d.vector_field(z - h, 0.4)) / (2 * h)
    assert abs(d.vector_field_dz(z, 0.4) - fd) <= 1e-8 * max(1, abs(fd))


def test_bp_expression_driver_gets_symbolic_derivative():
    d = D.bp("(1+z)/(1-z)*exp(-t)", tau=0.2j)
    assert d.dp is not None
    assert not d.autonomous
    assert D.bp("1+z").autonomous


def test_bp_rejects_bad_expression():
    with pytest.raises(ExprSyntaxError):
        D.bp("1+")


@pytest.mark.parametrize(
    "driver, passed",
    [
        (D.constant(1, 0), True),
        (D.bp("(1+z)/(1-z)"), True),
        (D.bp("-1"), False),
        (D.bp("1", tau=1.5), False),
        (D.radial("t"), True),
    ],
)
def test_validate(driver, passed):
    rep = D.validate(driver)
    assert rep.passed is passed
    assert rep.as_dict()["pass"] is passed


def test_validate_constant_reports_min_re_p():
    assert D.validate(D.constant(1, 0)).min_re_p == pytest.approx(1.0)
    assert D.validate(D.bp("(1+z)/(1-z)")).min_re_p >= 0


def test_piecewise_linear_interpolates_and_clamps():
    f = D.PiecewiseLinear([0, 1, 2], [0.0, 2.0, 0.0])
    assert f(0.5) == 1.0
    assert f(-1) == 0.0
    assert f(5) == 0.0
    assert f.knots == (0.0, 1.0, 2.0)


@pytest.mark.parametrize("times, values", [([0, 0], [1, 2]), ([], []), ([0, 1], [1])])
def test_piecewise_linear_rejects_bad_samples(times, values):
    with pytest.raises(ValueError):
        D.PiecewiseLinear(times, values)


def test_sampled_path_declares_knots_as_breakpoints():
    d = D.sampled_path([0, 0.5, 1.0], [0, 1, 0])
    assert d.breakpoints == (0.0, 0.5, 1.0)
    assert d.breakpoints_in(0.2, 0.8) == [0.5]


def test_piecewise_driver_switches_field():
    d = D.PiecewiseDriver([(0, D.constant(1j)), (1, D.constant(1))])
    assert d.breakpoints == (1.0,)
    assert abs(d.vector_field(0.5, 0.5) + 0.5j) < 1e-15
    assert abs(d.vector_field(0.5, 1.5) + 0.5) < 1e-15
    assert d.on_interval(1.0, 2.0) is d.drivers[1]


def test_piecewise_driver_must_start_at_zero():
    with pytest.raises(ValueError):
        D.PiecewiseDriver([(0.5, D.constant(1))])


def test_radial_rejects_z_dependent_angle():
    with pytest.raises(ValueError):
        D.radial("z")


def test_chordal_vector_field_is_pullback():
    d = D.chordal(0.0)
    z = 0.2 + 0.3j
    from loewner.disk import cayley_derivative, cayley_to_halfplane

    w = cayley_to_halfplane(z)
    assert abs(d.vector_field(z, 0) * cayley_derivative(z) - 2 / (0 - w)) < 1e-14


def test_herglotz_p_recovered_from_field():
    d = D.chordal(0.0)
    p = d.herglotz_p(np.array([0.1, 0.5j]), 0.0)
    assert np.all(p.real >= 0)


def test_catalog_has_six_members():
    assert sorted(D.oracle_catalog()) == ["chordal", "dilation", "elliptic", "parabolic", "radial", "rotation"]
