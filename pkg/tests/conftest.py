import numpy as np
import pytest
from hypothesis import settings

from neeqma.pauli import random_pauli_sum
from neeqma.simulator import StateVector, make_rng

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_label(label: str) -> np.ndarray:
    """Independent dense matrix of a Pauli word via Kronecker products."""
    m = np.eye(1, dtype=complex)
    for ch in label:
        m = np.kron(m, PAULI_MATS[ch])
    return m


def dense_sum(h) -> np.ndarray:
    return sum(t.coeff * kron_label(t.string.label) for t in h)


def expm_herm(m: np.ndarray, t: float) -> np.ndarray:
    """``exp(i t M)`` for Hermitian ``M`` through numpy's LAPACK eigh."""
    w, v = np.linalg.eigh(m)
    return (v * np.exp(1j * t * w)) @ v.conj().T


@pytest.fixture
def rng():
    return make_rng(1234)


def random_problem(seed: int, n_qubits: int, n_terms: int):
    r = make_rng(seed)
    return random_pauli_sum(r, n_qubits, n_terms), StateVector.random(n_qubits, r)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
