import json
import math

import numpy as np
import pytest

from loewner.chain import FunctionChain, StandardChain
from loewner.drivers import PiecewiseLinear, bp, constant, oracle_catalog, radial
from loewner.verify import (
    PoleNearContour,
    WindingAmbiguous,
    catalog_suite,
    check_beta_monotone,
    check_chain_equation,
    check_chordal_flow,
    check_ef_axioms,
    check_growth_bound,
    check_lk_pde,
    check_univalence,
    contour_inverse_oracle,
    corrupted_pulse_driver,
    disk_grid,
    spectral_theta_derivative,
    suite_passed,
    winding_number,
)

TIMES = (0.0, 0.5, 1.0, 2.0)
ELLIPTIC = constant(1.0)
ELLIPTIC_CHAIN = FunctionChain(lambda s, z: np.exp(s) * np.asarray(z), "e^s z")
REPORT_KEYS = {"check", "pass", "skipped", "max_residual", "threshold", "grid", "witness", "failures"}


def test_disk_grid_layout():
    g = disk_grid((0.0, 0.5), 4)
    assert g.size == 5 and g[0] == 0
    assert np.allclose(np.abs(g[1:]), 0.5)


@pytest.mark.parametrize("name", sorted(oracle_catalog()))
def test_ef_axioms_hold_on_catalog(name):
    rep = check_ef_axioms(oracle_catalog()[name], TIMES, disk_grid(), 1e-8)
    assert rep.passed, rep.as_dict()


def test_corrupted_breakpoints_fail_and_declared_ones_pass():
    pts = disk_grid((0.5,), 4)
    bad = check_ef_axioms(corrupted_pulse_driver(False), TIMES, pts, 1e-8)
    good = check_ef_axioms(corrupted_pulse_driver(True), TIMES, pts, 1e-8)
    assert bad.passed is False and bad.max_residual > 1e-3
    assert good.passed, good.as_dict()
    assert bad.witness["t"] is not None


def test_chordal_flow():
    rep = check_chordal_flow()
    assert rep.passed and rep.max_residual < 1e-7


def test_chain_equation_accepts_closed_form_and_rejects_wrong_chain():
    good = check_chain_equation(ELLIPTIC, ELLIPTIC_CHAIN, TIMES, disk_grid())
    assert good.passed and good.max_residual < 1e-9
    wrong = FunctionChain(lambda s, z: np.exp(2 * s) * np.asarray(z))
    bad = check_chain_equation(ELLIPTIC, wrong, TIMES, disk_grid())
    assert bad.passed is False


def test_chain_equation_records_chain_errors():
    def broken(s, z):
        raise RuntimeError("boom")

    rep = check_chain_equation(ELLIPTIC, broken, TIMES, disk_grid((0.3,), 2))
    assert rep.passed is False and rep.max_residual == math.inf
    assert rep.failures and "boom" in rep.failures[0]


def test_lk_pde_closed_form():
    rep = check_lk_pde(ELLIPTIC, ELLIPTIC_CHAIN, (0.5, 1.5), disk_grid((0.0, 0.5), 4))
    assert rep.passed and rep.max_residual < 1e-6


def test_lk_pde_rejects_wrong_chain():
    wrong = FunctionChain(lambda s, z: np.exp(s) * np.asarray(z) ** 2 + np.exp(s) * np.asarray(z))
    assert check_lk_pde(ELLIPTIC, wrong, (0.5,), disk_grid((0.5,), 4)).passed is False


def test_lk_pde_guards_breakpoints():
    d = radial(theta=PiecewiseLinear([0, 1, 2], [0, 1, 0]))
    with pytest.raises(ValueError):
        check_lk_pde(d, ELLIPTIC_CHAIN, (1.0,), [0.1])
    with pytest.raises(ValueError):
        check_lk_pde(ELLIPTIC, ELLIPTIC_CHAIN, (0.0,), [0.1])


@pytest.mark.parametrize("name", sorted(oracle_catalog()))
def test_beta_monotone_on_catalog(name):
    rep = check_beta_monotone(oracle_catalog()[name], np.linspace(0, 2, 9), disk_grid((0.0, 0.5), 4))
    assert rep.passed, rep.as_dict()


def test_growth_bound_is_skipped_for_rotation():
    d = oracle_catalog()["rotation"]
    rep = check_growth_bound(d, ELLIPTIC_CHAIN, (0.0,))
    assert rep.skipped and rep.passed is None
    assert rep.as_dict()["skipped"] is True
    assert "NonUnique" in rep.failures[0]


def test_growth_bound_holds_for_closed_form_chain():
    rep = check_growth_bound(ELLIPTIC, ELLIPTIC_CHAIN, (0.0, 1.0))
    assert rep.passed
    # the Koebe bound is attained by no map here, so the excess is negative
    assert rep.max_residual < 0


@pytest.mark.parametrize(
    "curve, w, expected",
    [
        (np.exp(2j * np.pi * np.arange(64) / 64), 0, 1),
        (np.exp(2j * np.pi * np.arange(64) / 64), 2, 0),
        (np.exp(-2j * np.pi * np.arange(64) / 64), 0, -1),
        (np.exp(4j * np.pi * np.arange(128) / 128), 0.1, 2),
    ],
)
def test_winding_number(curve, w, expected):
    assert winding_number(curve, w) == expected


def test_winding_number_on_curve_is_ambiguous():
    with pytest.raises(WindingAmbiguous):
        winding_number(np.exp(2j * np.pi * np.arange(8) / 8), 1.0)


@pytest.mark.parametrize(
    "F, ok",
    [
        (lambda z: z, True),
        (lambda z: z / (1 - z) ** 2, True),
        (lambda z: z + z * z / 2, True),
        (lambda z: z * z, False),
        (lambda z: z + 2 * z * z, False),
    ],
)
def test_check_univalence(F, ok):
    assert bool(check_univalence(F, 0.9, 256).passed) == ok


@pytest.mark.parametrize(
    "F, dF, w, expected",
    [
        (lambda z: z, lambda z: np.ones_like(z), 0.3, 0.3),
        (lambda z: math.e * z, lambda z: math.e * np.ones_like(z), 0.5, 0.5 / math.e),
        (lambda z: z / (1 - z), lambda z: 1 / (1 - z) ** 2, 1.0, 0.5),
        (lambda z: z / (1 - z) ** 2, lambda z: (1 + z) / (1 - z) ** 3, 0.2, (1.4 - math.sqrt(1.4**2 - 4 * 0.2**2)) / (2 * 0.2)),
    ],
)
@pytest.mark.parametrize("exact_derivative", [True, False])
def test_contour_inverse_oracle(F, dF, w, expected, exact_derivative):
    z = contour_inverse_oracle(F, dF if exact_derivative else None, w)
    assert abs(z - expected) < 1e-9


def test_contour_oracle_rejects_poles_on_contour():
    with pytest.raises(PoleNearContour):
        contour_inverse_oracle(lambda z: z, None, 0.9)


def test_spectral_derivative_of_trig_polynomial():
    th = 2 * np.pi * np.arange(32) / 32
    v = np.exp(3j * th) + np.cos(2 * th)
    assert np.max(np.abs(spectral_theta_derivative(v) - (3j * np.exp(3j * th) - 2 * np.sin(2 * th)))) < 1e-12


def test_report_json_schema():
    rep = check_ef_axioms(bp("1"), (0.0, 1.0), [0.2], 1e-8)
    d = json.loads(json.dumps(rep.as_dict()))
    assert set(d) == REPORT_KEYS
    assert set(d["witness"]) == {"s", "t", "z_re", "z_im"}
    assert isinstance(d["pass"], bool)


def test_suite_passed_logic():
    good = check_univalence(lambda z: z, 0.9, 64)
    bad = check_univalence(lambda z: z * z, 0.9, 64)
    assert suite_passed([good])
    assert not suite_passed([bad])
    bad.extra["expected_pass"] = False
    assert suite_passed([good, bad])


def test_catalog_suite_subset():
    reports = catalog_suite(names=["elliptic"])
    names = [r.check for r in reports]
    assert "elliptic:chain_equation" in names and "negative_control:z_squared" in names
    assert suite_passed(reports)


@pytest.mark.slow
def test_full_catalog_suite():
    reports = catalog_suite()
    failing = [r.as_dict() for r in reports if not r.skipped and bool(r.passed) != r.extra.get("expected_pass", True)]
    assert not failing
