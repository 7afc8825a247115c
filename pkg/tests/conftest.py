import pytest

from bellcv.numerics import ErrorBudget
from bellcv.propagation import OpticalConfig
from bellcv.states import BvParams, DoubleGaussian, auto_banded_modal

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


REF_BV = BvParams(1.0, 0.01)
SMALL_BV = BvParams(0.1, 0.03)
SMALL_DG = DoubleGaussian(0.1, 0.03)


@pytest.fixture(scope="session")
def optics():
    return OpticalConfig(650.0)


@pytest.fixture(scope="session")
def small_bv():
    return auto_banded_modal(SMALL_BV)


@pytest.fixture(scope="session")
def small_dg():
    return auto_banded_modal(SMALL_DG)


@pytest.fixture(scope="session")
def ref_state():
    return auto_banded_modal(REF_BV, ErrorBudget())


@pytest.fixture(scope="session")
def ref_dg():
    return auto_banded_modal(DoubleGaussian(1.0, 0.01), ErrorBudget())


# ratio 10: small enough to be fast, wide enough in ratio to violate
RATIO10_BV = BvParams(0.3, 0.03)


@pytest.fixture(scope="session")
def ratio10():
    return auto_banded_modal(RATIO10_BV)
