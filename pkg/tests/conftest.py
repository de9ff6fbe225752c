import cmath

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "numerics",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numerics")


def polar_grid(radii=(0.0, 0.35, 0.7), angles=8):
    pts = []
    for r in radii:
        if r == 0:
            pts.append(0j)
        else:
            pts += [r * cmath.exp(2j * np.pi * k / angles) for k in range(angles)]
    return np.asarray(pts)


@pytest.fixture
def grid():
    return polar_grid()


# --------------------------------------------------------------------------- acceptance summary

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    number, title = marker.args
    _, ok, seconds = _ACCEPTANCE.get(number, (title, True, 0.0))
    _ACCEPTANCE[number] = (title, ok and rep.passed, seconds + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, seconds = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} ({seconds:5.1f} s)  {title}")
