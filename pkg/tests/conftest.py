import numpy as np
import pytest

from essnorm.symbols import BallSelfMap, BlaschkeSymbol, PolynomialSymbol, self_map

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def poly(*coeffs):
    return PolynomialSymbol.from_coeffs(coeffs)


@pytest.fixture
def z():
    return PolynomialSymbol.coordinate(0, 1)


@pytest.fixture
def one():
    return PolynomialSymbol.constant(1.0)


@pytest.fixture
def identity():
    return BallSelfMap.identity(1)


@pytest.fixture
def half():
    return self_map(poly(0, 0.5))


@pytest.fixture
def lens():
    return self_map(poly(0.5, 0.5))


@pytest.fixture
def squaring():
    return self_map(poly(0, 0, 1))


@pytest.fixture
def blaschke():
    return self_map(BlaschkeSymbol([0.5]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
