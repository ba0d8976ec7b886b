import numpy as np
import pytest

from qstlab import qcore


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def random_two_qubit_state(rng):
    return qcore.random_state("mixed-hs", 4, rng)


def random_hermitian_trace_one(d, rng):
    """Random Hermitian trace-1 matrix, generally not PSD."""
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (a + a.conj().T) / 2.0
    h = h - (np.trace(h).real - 1.0) / d * np.eye(d)
    return h
