import numpy as np
import pytest
import scipy.sparse as sp

from qsim import Qobj


def random_matrix(rng, d, hermitian=False):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    if hermitian:
        m = m + m.conj().T
    return m


def random_density(rng, d):
    g = random_matrix(rng, d)
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def as_sparse(q: Qobj) -> Qobj:
    return Qobj(sp.csc_array(q.full()), q.kind, q.dims)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion and return ``ok``."""

    def report(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'} | {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
