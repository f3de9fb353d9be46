import numpy as np
import pytest

from dtwpa.filtsynth import FilterSpec, design_diplexer


@pytest.fixture(scope="session")
def ref_spec():
    return FilterSpec(order=5, ripple_db=0.1, crossover_hz=8e9, z0=50.0)


@pytest.fixture(scope="session")
def ref_diplexer(ref_spec):
    return design_diplexer(ref_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance reporting ----------------------------------------------------
# tests marked ``acceptance(n, title)`` get one PASS/FAIL line each in the
# terminal summary

_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running simulation")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _ACCEPTANCE[number] = (title, status, round(rep.duration, 2))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, status, dur = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title} ({dur:.1f} s)")
