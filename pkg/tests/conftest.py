import numpy as np
import pytest

from lmpc_hvac import reference as ref
from lmpc_hvac.thermal import assemble_state_space

# filled by test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def room_model():
    return assemble_state_space(ref.single_room_network())


@pytest.fixture(scope="session")
def zone_model():
    return assemble_state_space(ref.single_zone_network())


@pytest.fixture(scope="session")
def ref_model():
    return assemble_state_space(ref.reference_network())


@pytest.fixture(scope="session")
def ref_scenario():
    return ref.generate_reference(0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
