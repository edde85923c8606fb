import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from msdyn import ModelParams

settings.register_profile("msdyn", deadline=None, derandomize=True, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("msdyn")

FIG1 = ModelParams(p=1.0, q=1.2, r=0.8, s=0.8)


@pytest.fixture
def fig1():
    return FIG1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        if hasattr(rep, "wasxfail"):
            verdict = "XFAIL (strict, see ledger)" if rep.skipped else "XPASS"
        else:
            verdict = rep.outcome.upper()
        _ACCEPTANCE.append((mark.args[0], mark.args[1], verdict, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, verdict, secs in sorted(_ACCEPTANCE, key=lambda a: a[0]):
        terminalreporter.write_line(f"AC{n:<3} {verdict:<26} {secs:7.1f} s  {title}")
