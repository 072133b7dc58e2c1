import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

BER = np.array([0.15, 0.85])
HAMMING2 = 1.0 - np.eye(2)


def simplex_vectors(n, min_mass=1e-3):
    """Hypothesis strategy for strictly positive probability vectors of length n."""
    return arrays(np.float64, n, elements=st.floats(min_mass, 1.0)).map(lambda a: a / a.sum())


def kernels(n, m):
    return arrays(np.float64, (n, m), elements=st.floats(1e-3, 1.0)).map(
        lambda a: a / a.sum(axis=1, keepdims=True)
    )


@pytest.fixture
def ber():
    return BER.copy()


@pytest.fixture
def hamming2():
    return HAMMING2.copy()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
