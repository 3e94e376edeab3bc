import numpy as np
import pytest

from pgts.bandit import BanditConfig


@pytest.fixture
def unit_config():
    return BanditConfig(K=3, T=10, prior_mean=0.0, prior_var=1.0, noise_var=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
