import numpy as np
import pytest

from mecgame.model import NetworkParams, Scenario, Task, UserParams


def make_network(num_channels=1, bandwidth=2e6, noise=1e-13, server_cpu=1e10, p_max=0.15,
                 theta=1.0, floor=1e6):
    return NetworkParams(num_channels, bandwidth, noise, server_cpu, p_max, theta, floor)


def make_user(n, channel=0, gain=1e-8, wt=0.5, kappa=1e-27, f_max=1e9, bits=5e6, cpb=200.0):
    return UserParams(n, channel, gain, kappa, f_max, wt, 1.0 - wt, Task(bits, cpb))


def make_scenario(channels, gains=None, wts=None, num_channels=None, bits=5e6, **net):
    gains = gains or [1e-8] * len(channels)
    wts = wts or [0.5] * len(channels)
    k = num_channels or max(channels) + 1
    users = tuple(make_user(n, c, g, w, bits=bits) for n, (c, g, w) in enumerate(zip(channels, gains, wts)))
    return Scenario(users, make_network(k, **net))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "criterion", None)
    if marker is not None:
        _CRITERIA[marker[0]] = (marker[1], report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome = _CRITERIA[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {title}")
