import numpy as np
import pytest

from nslasalle import PiecewiseField, PiecewiseScalar, load_scenario
from nslasalle.scenario import bundled


@pytest.fixture(scope="session")
def sign_field():
    return PiecewiseField.from_strings(1, ["x1"], {"+": "-1", "-": "1"}, name="sign")


@pytest.fixture(scope="session")
def abs_V():
    return PiecewiseScalar.from_strings(1, {"+": "x1", "-": "-x1"}, ["x1"])


@pytest.fixture(scope="session")
def adaptive_field():
    return PiecewiseField.from_strings(
        2, ["x1"], {"+": ["-x1 - 1 + x2", "-x1"], "-": ["-x1 + 1 + x2", "-x1"]}, name="adaptive")


@pytest.fixture(scope="session")
def scenarios():
    return {name: load_scenario(bundled(name)) for name in ("sign", "adaptive", "frozen")}


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
