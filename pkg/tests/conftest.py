import numpy as np
import pytest

from featdistill.corpus import natural_corpus, natural_image


@pytest.fixture(scope="session")
def corpus():
    return natural_corpus(20, 64, seed=2024)


@pytest.fixture(scope="session")
def natural():
    return natural_image(64, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
