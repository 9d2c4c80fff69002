import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=50)
settings.load_profile("repo")


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_pd(rng, n, batch=(), looks=None):
    """Random Hermitian positive definite matrices (sample covariances)."""
    looks = looks or 3 * n
    X = random_complex(rng, batch + (n, looks))
    S = X @ np.conj(np.swapaxes(X, -1, -2)) / looks
    return 0.5 * (S + np.conj(np.swapaxes(S, -1, -2)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
