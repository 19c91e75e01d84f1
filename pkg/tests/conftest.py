import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from beamee import ChannelStats, PowerModel, ScenarioSpec, generate

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_stats(seed, K=2, M=4, N=2, sigma2=1.0, scale=3.0):
    """Dense random coupling matrices with entries in (0, scale]."""
    rng = np.random.default_rng(seed)
    omegas = [scale * rng.uniform(0.05, 1.0, (N, M)) for _ in range(K)]
    return ChannelStats.from_omegas(omegas, sigma2)


def random_alloc(seed, K, M, total=1.0):
    rng = np.random.default_rng([seed, 1])
    lam = rng.uniform(0.0, 1.0, (K, M))
    return lam * (total / lam.sum())


@pytest.fixture
def pm_unit():
    return PowerModel(xi=1.0, p_c=0.05, p_s=0.5, p_max=2.0)


@pytest.fixture(scope="session")
def default_scenario():
    return generate(ScenarioSpec())


@pytest.fixture(scope="session")
def default_pm():
    return PowerModel.from_dbm(5.0, 30.0, 40.0, 30.0)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
