import numpy as np
import pytest
from scipy import sparse

from kdiff.datasets import Dataset
from kdiff.density import build_transition
from kdiff.kernels import SparseKernel


def line(*coords, labels=None):
    """1-D dataset with the given coordinates."""
    return Dataset(np.asarray(coords, dtype=float)[:, None], labels)


def chain(rows):
    """TransitionMatrix from a dense row-stochastic array."""
    return build_transition(SparseKernel(sparse.csr_matrix(np.asarray(rows, dtype=float))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for text in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(text)
