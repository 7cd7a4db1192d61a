import numpy as np
import pytest

from perpetua import fd_solver as fd
from perpetua.market_model import MarketModel
from perpetua.payoff import PayoffSpec

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def put_model():
    return MarketModel.from_volatility(0.05, [0.0], [0.2])


@pytest.fixture(scope="session")
def put_spec():
    return PayoffSpec("put", strike=100.0)


@pytest.fixture(scope="session")
def put_grid():
    return fd.LogGrid.from_prices([10.0], [400.0], 2048)


@pytest.fixture(scope="session")
def put_vf(put_model, put_spec, put_grid):
    return fd.solve_perpetual(put_model, put_spec, put_grid)


@pytest.fixture(scope="session")
def call_model():
    return MarketModel.from_volatility(0.05, [0.1], [0.2])


@pytest.fixture(scope="session")
def call_spec():
    return PayoffSpec("call", strike=100.0)


@pytest.fixture(scope="session")
def call_vf(call_model, call_spec):
    return fd.solve_perpetual(call_model, call_spec, fd.LogGrid.from_prices([5.0], [1000.0], 2048))


@pytest.fixture(scope="session")
def put_surface(put_model, put_spec, put_grid):
    return fd.solve_finite_horizon(put_model, put_spec, put_grid, 1.0, 500)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
