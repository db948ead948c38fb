from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rseas import AirlineParams, gen_airline

settings.register_profile(
    "rseas", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("rseas")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def airline_series():
    """A clean simulated monthly airline series, n=150."""
    return gen_airline(AirlineParams(0.7, 0.7, 1.0), 12, 150, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acc = __import__("sys").modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acc.RESULTS):
        terminalreporter.write_line(acc.RESULTS[number])
