"""Dense-matrix ground truth for the simulator and the fitted convergence laws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pauli import PauliSum, compute_xi
from .simulator import StateVector, apply_pauli

MAX_DENSE_QUBITS = 12
MAX_SERIES_QUBITS = 6
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
# Above this dimension the round-robin Jacobi is too slow in numpy; LAPACK is used.
JACOBI_MAX_DIM = 128
DEGENERACY_TOL = 1e-9
NEGLIGIBLE = 1e-30


class OracleError(RuntimeError):
    pass


def dense_operator(h: PauliSum) -> np.ndarray:
    """``sum_j a_j P_j`` as a ``2^Q x 2^Q`` matrix (qubit 0 most significant)."""
    q = h.n_qubits
    if q > MAX_DENSE_QUBITS:
        raise OracleError(f"{q} qubits exceeds the dense limit {MAX_DENSE_QUBITS}")
    dim = 2**q
    m = np.zeros((dim, dim), dtype=complex)
    eye = np.eye(dim, dtype=complex)
    for term in h:
        m += term.coeff * _pauli_columns(eye, term.string)
    return m


def _pauli_columns(eye: np.ndarray, p) -> np.ndarray:
    return np.stack([apply_pauli(col, p) for col in eye.T], axis=1)


def _round_robin(n: int) -> list[np.ndarray]:
    """Rounds of disjoint index pairs covering every pair once (circle method)."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a >= 0 and b >= 0]
        rounds.append(np.array(pairs, dtype=np.int64).reshape(-1, 2))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    Pairs are visited in round-robin order so each round applies ``n/2`` disjoint
    rotations at once.  Sweeps continue until the off-diagonal Frobenius mass falls
    below ``tol * max(1, ||A||_F)``.

    Returns ``(eigenvalues, eigenvectors)`` sorted ascending, vectors in columns.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise OracleError("matrix must be square")
    if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-10 * max(1.0, np.abs(a).max(initial=0)):
        raise OracleError("matrix is not Hermitian")
    a = (a + a.conj().T) / 2
    v = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(a)))
    rounds = _round_robin(n)

    def off() -> float:
        # direct sum: |A|^2 - sum|a_ii|^2 cancels catastrophically near convergence
        return float(np.linalg.norm(a - np.diag(np.diag(a))))

    for _ in range(max_sweeps):
        if off() < tol * scale:
            break
        for pairs in rounds:
            if pairs.size == 0:
                continue
            p, q = pairs[:, 0], pairs[:, 1]
            apq = a[p, q]
            mag = np.abs(apq)
            # subnormal entries overflow the phase; they cannot matter at tol anyway
            active = mag > NEGLIGIBLE * scale
            if not np.any(active):
                continue
            p, q, apq, mag = p[active], q[active], apq[active], mag[active]
            phase = apq / mag
            app, aqq = a[p, p].real, a[q, q].real
            tau = (aqq - app) / (2 * mag)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1 / np.sqrt(1 + t**2)
            s = t * c
            # J = diag(1, conj(phase)) @ [[c, s], [-s, c]] on the (p, q) plane
            jpp, jpq = c, s
            jqp, jqq = -s * phase.conj(), c * phase.conj()
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = ap * jpp + aq * jqp
            a[:, q] = ap * jpq + aq * jqq
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = jpp.conj()[:, None] * rp + jqp.conj()[:, None] * rq
            a[q, :] = jpq.conj()[:, None] * rp + jqq.conj()[:, None] * rq
            a[p, q] = 0
            a[q, p] = 0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * jpp + vq * jqp
            v[:, q] = vp * jpq + vq * jqq
    else:
        if off() >= tol * scale:
            raise OracleError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if m.shape[0] <= JACOBI_MAX_DIM:
        return jacobi_eigh(m)
    w, v = np.linalg.eigh(m)
    return w, v


@dataclass(frozen=True)
class Eigenpair:
    value: float
    weight: float

    def __iter__(self):
        return iter((self.value, self.weight))


def _state_vector(psi) -> np.ndarray:
    return psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)


def eigen_overlaps(h: PauliSum, psi, merge_degenerate: bool = True) -> list[Eigenpair]:
    """``(lambda_i, |<lambda_i|psi>|^2)`` over the spectrum, largest weight first.

    Degenerate eigenvalues (within 1e-9) are merged into one eigenspace weight,
    since the per-vector split inside an eigenspace is basis dependent.
    """
    if not h.hermitian:
        raise OracleError("eigen_overlaps requires a Hermitian operator")
    w, v = eigh(dense_operator(h))
    amps = _state_vector(psi)
    weights = np.abs(v.conj().T @ amps) ** 2
    pairs: list[tuple[float, float]] = []
    if merge_degenerate:
        i = 0
        while i < len(w):
            j = i
            while j + 1 < len(w) and w[j + 1] - w[i] <= DEGENERACY_TOL:
                j += 1
            pairs.append((float(np.mean(w[i:j + 1])), float(np.sum(weights[i:j + 1]))))
            i = j + 1
    else:
        pairs = list(zip(map(float, w), map(float, weights)))
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return [Eigenpair(lam, alpha) for lam, alpha in pairs]


def spectral_radius(h: PauliSum) -> float:
    w, _ = eigh(dense_operator(h))
    return float(np.max(np.abs(w)))


def exact_unitary_action(h: PauliSum, t: float, psi) -> StateVector:
    """``exp(i t H)|psi>`` through the eigen-decomposition of ``H``."""
    w, v = eigh(dense_operator(h))
    amps = _state_vector(psi)
    out = v @ (np.exp(1j * t * w) * (v.conj().T @ amps))
    return StateVector(out, h.n_qubits)


def exact_unitary(h: PauliSum, t: float) -> np.ndarray:
    w, v = eigh(dense_operator(h))
    return (v * np.exp(1j * t * w)) @ v.conj().T


def trotter_step_matrix(h: PauliSum, tau: float) -> np.ndarray:
    """One Lie-Trotter step; the first term of ``h`` acts first (rightmost factor)."""
    dim = 2**h.n_qubits
    step = np.eye(dim, dtype=complex)
    eye = np.eye(dim, dtype=complex)
    for term in h:
        p = _pauli_columns(eye, term.string)
        theta = tau * term.coeff.real
        step = (math.cos(theta) * eye + 1j * math.sin(theta) * p) @ step
    return step


def trotter_matrix(h: PauliSum, t: float, n: int) -> np.ndarray:
    return np.linalg.matrix_power(trotter_step_matrix(h, t / n), n)


def trotter_expectation(h: PauliSum, t: float, psi, n: int) -> complex:
    amps = _state_vector(psi)
    return complex(np.vdot(amps, trotter_matrix(h, t, n) @ amps))


def exact_expectation(h: PauliSum, t: float, psi) -> complex:
    amps = _state_vector(psi)
    return complex(np.vdot(amps, exact_unitary_action(h, t, amps).amplitudes))


def exact_trotter_error(h: PauliSum, t: float, psi, n: int) -> float:
    """``|<psi|(exp(itH) - S(t, n))|psi>|``."""
    return abs(exact_expectation(h, t, psi) - trotter_expectation(h, t, psi, n))


def oracle_trotter_constants(h: PauliSum, t: float, psi,
                             n_pair: tuple[int, int] = (16, 32)
                             ) -> tuple[complex, complex, complex]:
    """Two-point extraction of ``(c, e1, e2)`` in ``<S(t,n)> ~ c + e1/n + e2/n^2``.

    With ``D(n) = <exp(itH)> - <S(t, n)>`` the pair of equations
    ``D(n) = -e1/n - e2/n^2`` at ``n1 < n2`` is solved exactly.
    """
    n1, n2 = n_pair
    if n1 == n2:
        raise OracleError("singular extraction: n1 == n2")
    if not (8 <= n1 < n2):
        raise OracleError(f"need 8 <= n1 < n2, got {n_pair}")
    c = exact_expectation(h, t, psi)
    d = np.array([c - trotter_expectation(h, t, psi, n) for n in (n1, n2)])
    a = np.array([[1 / n1, 1 / n1**2], [1 / n2, 1 / n2**2]])
    e1, e2 = np.linalg.solve(a, -d)
    return c, complex(e1), complex(e2)


def oracle_er1_series(h: PauliSum, t: float, k_max: int = 20) -> np.ndarray:
    """First-order error operator ``E_11`` of ``S(t, n) = exp(itH) + E_11/n + ...``.

    ``E_11 = sum_{k=1}^{k_max} 1/k! sum_{l<k} A^l X A^(k-1-l)`` with ``A = i t H``
    and ``X = (i t)^2 Xi_1``.  ``Xi_1`` is taken for the operator product order of
    the circuit, whose first gate is the rightmost factor, i.e. on the reversed
    term list.
    """
    if h.n_qubits > MAX_SERIES_QUBITS:
        raise OracleError(f"series oracle limited to {MAX_SERIES_QUBITS} qubits")
    hm = dense_operator(h)
    xi1 = compute_xi(h.reversed(), 1)
    x = (1j * t) ** 2 * (dense_operator(xi1) if xi1 else np.zeros_like(hm))
    a = 1j * t * hm
    total = np.zeros_like(hm)
    inner = x.copy()          # sum_l A^l X A^(k-1-l) for k = 1
    a_pow = np.eye(hm.shape[0], dtype=complex)
    fact = 1.0
    for k in range(1, k_max + 1):
        fact *= k
        total += inner / fact
        a_pow = a_pow @ a
        inner = a @ inner + x @ a_pow
    return total


def operator_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def error_operator_bounds(h: PauliSum, t: float) -> tuple[float, float]:
    """Upper bounds on ``||E_r1||`` and ``||E_r2||``.

    ``t^2 ||Xi_1|| e^{t||H||}`` and ``t^3 (||Xi_2|| + ||Xi_1||^2/2) e^{t||H||}``.
    """
    hn = operator_norm(dense_operator(h))
    xi1, xi2 = compute_xi(h.reversed(), 1), compute_xi(h.reversed(), 2)
    n1 = operator_norm(dense_operator(xi1)) if xi1 else 0.0
    n2 = operator_norm(dense_operator(xi2)) if xi2 else 0.0
    growth = math.exp(abs(t) * hn)
    return t**2 * n1 * growth, abs(t) ** 3 * (n2 + n1**2 / 2) * growth
