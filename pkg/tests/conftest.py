import pytest
from hypothesis import settings

from mbcool.fock import PhysicalParams, thermal_occupation

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ref_params():
    return PhysicalParams.from_ratios()


@pytest.fixture(scope="session")
def ref_thermal(ref_params):
    return thermal_occupation(ref_params)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
