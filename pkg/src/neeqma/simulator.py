"""Dense statevector simulation with exact and finite-shot estimators.

Qubit 0 is the leftmost character of a basis label and the most significant bit of
the amplitude index, so ``"10"`` is index 2.  Ancillas are appended on the right.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable

import numpy as np

from .pauli import PauliString, PauliSum, coefficient_one_norm

MAX_QUBITS = 16
NORM_TOL = 1e-10
TAYLOR_TOL = 1e-12


class SimulationError(ValueError):
    pass


def make_rng(seed: int | None, *stream: int) -> np.random.Generator:
    """PCG64 generator for the substream ``(seed, *stream)``."""
    entropy = [0 if seed is None else int(seed), *map(int, stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


class StateVector:
    """Amplitudes over ``n_qubits`` qubits; mutated in place by the gate functions."""

    __slots__ = ("amplitudes", "n_qubits")

    def __init__(self, amplitudes, n_qubits: int | None = None):
        amps = np.asarray(amplitudes, dtype=complex).ravel().copy()
        if n_qubits is None:
            n_qubits = int(round(math.log2(amps.size)))
        if amps.size != 2**n_qubits:
            raise SimulationError(f"{amps.size} amplitudes do not describe {n_qubits} qubits")
        self.amplitudes = amps
        self.n_qubits = n_qubits

    @classmethod
    def random(cls, n_qubits: int, rng: np.random.Generator) -> StateVector:
        v = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
        return cls(v / np.linalg.norm(v), n_qubits)

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes, self.n_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: StateVector) -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor_zero(self, extra: int = 1) -> StateVector:
        """``|self> ⊗ |0...0>`` with ``extra`` new qubits on the right."""
        amps = np.zeros((self.amplitudes.size, 2**extra), dtype=complex)
        amps[:, 0] = self.amplitudes
        return StateVector(amps.ravel(), self.n_qubits + extra)

    def basis_index(self) -> int | None:
        """Index of the computational basis state this vector equals, if any."""
        nz = np.flatnonzero(np.abs(self.amplitudes) > 1e-12)
        if nz.size != 1 or abs(abs(self.amplitudes[nz[0]]) - 1.0) > 1e-12:
            return None
        return int(nz[0])

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"


def init_basis_state(bits: str) -> StateVector:
    if not bits or any(b not in "01" for b in bits):
        raise SimulationError(f"basis label must be a nonempty word over 0/1, got {bits!r}")
    if len(bits) > MAX_QUBITS:
        raise SimulationError(f"{len(bits)} qubits exceeds the dense limit {MAX_QUBITS}")
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps, len(bits))


# Index-space helpers.  Qubit q of n corresponds to bit (n - 1 - q) of the index.

def _qubit_bit(q: int, n: int) -> int:
    return 1 << (n - 1 - q)


def _index_masks(p: PauliString) -> tuple[int, int]:
    n = p.n_qubits
    x = z = 0
    for q in range(n):
        if (p.x >> q) & 1:
            x |= _qubit_bit(q, n)
        if (p.z >> q) & 1:
            z |= _qubit_bit(q, n)
    return x, z


@lru_cache(maxsize=4096)
def _pauli_action(p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """``(source, factor)`` such that ``(P psi)[c] = factor[c] * psi[source[c]]``."""
    n = p.n_qubits
    x, z = _index_masks(p)
    idx = np.arange(2**n, dtype=np.int64)
    source = idx ^ x
    # P|b> = i^y (-1)^{popcount(z & b)} |b ^ x>, evaluated at b = c ^ x
    parity = np.bitwise_count(source & z) & 1
    factor = (1j ** (p.y_count % 4)) * (1 - 2 * parity.astype(float))
    source.setflags(write=False)
    factor.setflags(write=False)
    return source, factor


def apply_pauli(amps: np.ndarray, p: PauliString) -> np.ndarray:
    source, factor = _pauli_action(p)
    return factor * amps[source]


def apply_pauli_sum(amps: np.ndarray, h: PauliSum) -> np.ndarray:
    out = np.zeros_like(amps)
    for term in h:
        out += term.coeff * apply_pauli(amps, term.string)
    return out


def _control_mask(control: int, n: int) -> np.ndarray:
    idx = np.arange(2**n, dtype=np.int64)
    return (idx & _qubit_bit(control, n)) != 0


def _check_length(state: StateVector, p: PauliString) -> None:
    if p.n_qubits != state.n_qubits:
        raise SimulationError(
            f"Pauli string on {p.n_qubits} qubits applied to {state.n_qubits}-qubit state")


def apply_pauli_rotation(state: StateVector, p: PauliString, theta: float,
                         control: int | None = None) -> StateVector:
    """``exp(i theta P)`` using ``P^2 = I``."""
    _check_length(state, p)
    amps = state.amplitudes
    rotated = math.cos(theta) * amps + 1j * math.sin(theta) * apply_pauli(amps, p)
    if control is None:
        state.amplitudes = rotated
    else:
        if (p.x | p.z) >> control & 1:
            raise SimulationError("control qubit overlaps the rotation support")
        mask = _control_mask(control, state.n_qubits)
        state.amplitudes = np.where(mask, rotated, amps)
    return state


def apply_exp_h(state: StateVector, h: PauliSum, t: float,
                control: int | None = None) -> StateVector:
    """``exp(i t H)`` by truncated Taylor series on the vector.

    The time is split into steps with ``|tau| * ||alpha||_1 <= 1`` and each step's
    series stops once the remainder bound ``x^{k+1}/(k+1)! e^x`` drops below its
    share of the 1e-12 total.
    """
    if h.n_qubits != state.n_qubits:
        raise SimulationError(
            f"Hamiltonian on {h.n_qubits} qubits applied to {state.n_qubits}-qubit state")
    if not h.hermitian:
        raise SimulationError("apply_exp_h requires a Hermitian Pauli sum")
    norm1 = coefficient_one_norm(h)
    if t == 0 or norm1 == 0:
        return state
    amps = state.amplitudes
    if control is not None:
        for term in h:
            if (term.string.x | term.string.z) >> control & 1:
                raise SimulationError("control qubit overlaps the Hamiltonian support")
        mask = _control_mask(control, state.n_qubits)
        untouched = np.where(mask, 0, amps)
        amps = np.where(mask, amps, 0)
    start_norm = np.linalg.norm(amps)
    steps = max(1, math.ceil(abs(t) * norm1))
    tau = t / steps
    x = abs(tau) * norm1
    ex = math.exp(x)
    tol = TAYLOR_TOL / steps
    for _ in range(steps):
        total = amps.copy()
        term = amps
        k = 0
        bound = x * ex
        while bound >= tol:
            k += 1
            term = apply_pauli_sum(term, h) * (1j * tau / k)
            total += term
            bound *= x / (k + 1)
        amps = total
    # only round-off drift is corrected here
    norm = np.linalg.norm(amps)
    if start_norm > 0 and abs(norm - start_norm) <= NORM_TOL:
        amps = amps * (start_norm / norm)
    state.amplitudes = amps if control is None else amps + untouched
    return state


class GateKind(enum.Enum):
    PAULI_ROTATION = "pauli_rotation"
    HADAMARD = "h"
    S = "s"
    SDG = "sdg"
    RX = "rx"
    RZ = "rz"
    X = "x"
    EVOLUTION = "evolution"


_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    GateKind.HADAMARD: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    GateKind.S: np.array([[1, 0], [0, 1j]], dtype=complex),
    GateKind.SDG: np.array([[1, 0], [0, -1j]], dtype=complex),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
}


def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]])


@dataclass(frozen=True)
class Gate:
    """A primitive operation.

    ``PAULI_ROTATION`` is ``exp(i angle P)``; ``EVOLUTION`` is ``exp(i angle H)`` for a
    Hermitian Pauli sum ``H`` (used for the exact signal operator).  ``RX``/``RZ``
    follow the usual ``exp(-i angle/2 sigma)`` convention.
    """

    kind: GateKind
    qubit: int | None = None
    angle: float = 0.0
    pauli: PauliString | None = None
    hamiltonian: PauliSum | None = field(default=None, compare=False)
    control: int | None = None

    @property
    def n_qubits_required(self) -> int:
        if self.pauli is not None:
            return self.pauli.n_qubits
        if self.hamiltonian is not None:
            return self.hamiltonian.n_qubits
        return max(self.qubit, -1 if self.control is None else self.control) + 1

    def controlled(self, control: int) -> Gate:
        if self.control is not None:
            raise SimulationError("gate is already controlled")
        return replace(self, control=control)

    def inverse(self) -> Gate:
        if self.kind in (GateKind.HADAMARD, GateKind.X):
            return self
        if self.kind is GateKind.S:
            return replace(self, kind=GateKind.SDG)
        if self.kind is GateKind.SDG:
            return replace(self, kind=GateKind.S)
        return replace(self, angle=-self.angle)

    def widened(self, n_qubits: int) -> Gate:
        if self.pauli is not None:
            return replace(self, pauli=self.pauli.padded(n_qubits))
        if self.hamiltonian is not None:
            return replace(self, hamiltonian=self.hamiltonian.padded(n_qubits))
        return self


def pauli_rotation(p: PauliString | str, angle: float) -> Gate:
    if isinstance(p, str):
        p = PauliString.from_label(p)
    return Gate(GateKind.PAULI_ROTATION, angle=angle, pauli=p)


def evolution(h: PauliSum, t: float) -> Gate:
    return Gate(GateKind.EVOLUTION, angle=t, hamiltonian=h)


def hadamard(q: int) -> Gate:
    return Gate(GateKind.HADAMARD, qubit=q)


def s_gate(q: int) -> Gate:
    return Gate(GateKind.S, qubit=q)


def s_dagger(q: int) -> Gate:
    return Gate(GateKind.SDG, qubit=q)


def rx(q: int, angle: float) -> Gate:
    return Gate(GateKind.RX, qubit=q, angle=angle)


def rz(q: int, angle: float) -> Gate:
    return Gate(GateKind.RZ, qubit=q, angle=angle)


def pauli_x(q: int) -> Gate:
    return Gate(GateKind.X, qubit=q)


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate) -> None:
        if g.n_qubits_required > self.n_qubits:
            raise SimulationError(f"gate {g.kind.value} does not fit {self.n_qubits} qubits")
        if g.pauli is not None and g.pauli.n_qubits != self.n_qubits:
            raise SimulationError("Pauli string length differs from circuit width")
        if g.hamiltonian is not None and g.hamiltonian.n_qubits != self.n_qubits:
            raise SimulationError("Hamiltonian width differs from circuit width")
        if g.control is not None and g.control == g.qubit:
            raise SimulationError("control equals target")

    def append(self, g: Gate) -> Circuit:
        self._check(g)
        self.gates.append(g)
        return self

    def extend(self, gates: Iterable[Gate]) -> Circuit:
        for g in gates:
            self.append(g)
        return self

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: Circuit) -> Circuit:
        if other.n_qubits != self.n_qubits:
            raise SimulationError("cannot concatenate circuits of different widths")
        return Circuit(self.n_qubits, [*self.gates, *other.gates])

    def inverse(self) -> Circuit:
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.gates)])

    def widened(self, n_qubits: int) -> Circuit:
        return Circuit(n_qubits, [g.widened(n_qubits) for g in self.gates])

    def controlled(self, control: int) -> Circuit:
        return Circuit(self.n_qubits, [g.controlled(control) for g in self.gates])


def _apply_1q(state: StateVector, m: np.ndarray, q: int, control: int | None) -> None:
    n = state.n_qubits
    amps = state.amplitudes.reshape([2] * n)
    if control is None:
        sub = amps
        axis = q
    else:
        index = [slice(None)] * n
        index[control] = 1
        sub = amps[tuple(index)]
        axis = q - (1 if control < q else 0)
    moved = np.moveaxis(sub, axis, 0)
    a0, a1 = moved[0].copy(), moved[1].copy()
    moved[0] = m[0, 0] * a0 + m[0, 1] * a1
    moved[1] = m[1, 0] * a0 + m[1, 1] * a1


def apply_gate(state: StateVector, g: Gate) -> StateVector:
    n = state.n_qubits
    for q in (g.qubit, g.control):
        if q is not None and not 0 <= q < n:
            raise SimulationError(f"qubit index {q} out of range for {n} qubits")
    if g.kind is GateKind.PAULI_ROTATION:
        return apply_pauli_rotation(state, g.pauli, g.angle, g.control)
    if g.kind is GateKind.EVOLUTION:
        return apply_exp_h(state, g.hamiltonian, g.angle, g.control)
    if g.kind is GateKind.RX:
        m = _rx(g.angle)
    elif g.kind is GateKind.RZ:
        m = _rz(g.angle)
    else:
        m = _FIXED[g.kind]
    _apply_1q(state, m, g.qubit, g.control)
    return state


def run_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.n_qubits != state.n_qubits:
        raise SimulationError(
            f"{circuit.n_qubits}-qubit circuit applied to {state.n_qubits}-qubit state")
    for g in circuit.gates:
        apply_gate(state, g)
    return state


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    shots: int | None

    def __iter__(self):
        return iter((self.value, self.stderr))


def _check_shots(shots: int | None) -> None:
    if shots is not None and shots < 1:
        raise SimulationError(f"shots must be positive or None (exact), got {shots}")


def _binomial_pm1(p_plus: float, shots: int, rng: np.random.Generator) -> Estimate:
    """Estimate ``2p - 1`` from ``shots`` draws of a +/-1 outcome with ``P(+1) = p_plus``."""
    p_plus = min(max(p_plus, 0.0), 1.0)
    k = int(rng.binomial(shots, p_plus))
    p_hat = k / shots
    return Estimate(2 * p_hat - 1, 2 * math.sqrt(p_hat * (1 - p_hat) / shots), shots)


def hadamard_test_probability(psi: StateVector, u: Circuit, part: str = "re") -> float:
    """Probability of reading the Hadamard-test ancilla in ``|0>``."""
    if part not in ("re", "im"):
        raise SimulationError(f"part must be 're' or 'im', got {part!r}")
    if u.n_qubits != psi.n_qubits:
        raise SimulationError("circuit and state widths differ")
    anc = psi.n_qubits
    state = psi.tensor_zero(1)
    apply_gate(state, hadamard(anc))
    run_circuit(state, u.widened(anc + 1).controlled(anc))
    if part == "im":
        apply_gate(state, s_dagger(anc))
    apply_gate(state, hadamard(anc))
    amps = state.amplitudes.reshape(-1, 2)
    return float(np.sum(np.abs(amps[:, 0]) ** 2))


def hadamard_test_estimate(psi: StateVector, u: Circuit, part: str = "re",
                           shots: int | None = None,
                           rng: np.random.Generator | int | None = None) -> Estimate:
    """Estimate ``Re`` or ``Im`` of ``<psi|U|psi>`` with an ancilla-controlled ``U``.

    The ancilla is appended after the last qubit of ``psi`` and every gate of ``u``
    is controlled on it.  For ``part="im"`` an ``S^dagger`` precedes the final
    Hadamard, so ``P(0) = (1 + Im<U>)/2``.  ``shots=None`` is the exact limit.
    """
    _check_shots(shots)
    p0 = hadamard_test_probability(psi, u, part)
    if shots is None:
        return Estimate(2 * p0 - 1, 0.0, None)
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    return _binomial_pm1(p0, shots, rng)


def return_probability_estimate(psi0: StateVector, circuit: Circuit, shots: int | None = None,
                                rng: np.random.Generator | int | None = None) -> Estimate:
    """Probability of measuring the basis bitstring of ``psi0`` after ``circuit``."""
    _check_shots(shots)
    index = psi0.basis_index()
    if index is None:
        raise SimulationError("return probability needs a computational basis initial state")
    state = run_circuit(psi0.copy(), circuit)
    p = min(1.0, float(abs(state.amplitudes[index]) ** 2))
    if shots is None:
        return Estimate(p, 0.0, None)
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    k = int(rng.binomial(shots, p))
    p_hat = k / shots
    return Estimate(p_hat, math.sqrt(p_hat * (1 - p_hat) / shots), shots)


def pauli_expectation(state: StateVector, p: PauliString) -> float:
    return float(np.vdot(state.amplitudes, apply_pauli(state.amplitudes, p)).real)


def _split_shots(shots: int, parts: int) -> list[int]:
    base, extra = divmod(shots, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def pauli_sum_expectation(state: StateVector, h: PauliSum, shots: int | None = None,
                          rng: np.random.Generator | int | None = None) -> Estimate:
    """``<psi|H|psi>``; with finite shots each non-identity term gets an equal share.

    Each term is read out in its own rotated basis, where the measured parity is a
    +/-1 variable with mean ``<P_j>``; that parity is drawn binomially.
    """
    _check_shots(shots)
    if not h.hermitian:
        raise SimulationError("expectation requires a Hermitian Pauli sum")
    if h.n_qubits != state.n_qubits:
        raise SimulationError("Hamiltonian and state widths differ")
    means = [(t.coeff.real, t.string, pauli_expectation(state, t.string)) for t in h]
    if shots is None:
        return Estimate(sum(a * m for a, _, m in means), 0.0, None)
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    measured = [(a, m) for a, s, m in means if not s.is_identity]
    value = sum(a for a, s, _ in means if s.is_identity)
    if not measured:
        return Estimate(value, 0.0, shots)
    if shots < len(measured):
        raise SimulationError(f"{shots} shots cannot cover {len(measured)} terms")
    var = 0.0
    for (a, m), share in zip(measured, _split_shots(shots, len(measured))):
        est = _binomial_pm1((1 + m) / 2, share, rng)
        value += a * est.value
        var += (a * est.stderr) ** 2
    return Estimate(value, math.sqrt(var), shots)


def expectation_dense(state: StateVector, circuit: Circuit) -> complex:
    """``<psi|C|psi>`` computed directly (no ancilla)."""
    out = run_circuit(state.copy(), circuit)
    return state.inner(out)

