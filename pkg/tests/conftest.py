import numpy as np
import pytest

from rep.tensor import CpModel


def random_model(rng, I, J, K, F):
    return CpModel(rng.uniform(size=(I, F)), rng.uniform(size=(J, F)), rng.uniform(size=(K, F)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
