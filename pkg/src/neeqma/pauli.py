"""Pauli strings, weighted Pauli sums and the BCH commutator sums of a product formula.

A Pauli string on Q qubits is stored symplectically as two integer bit masks:
bit ``i`` of ``x`` / ``z`` refers to qubit ``i``, which is the ``i``-th character
(counting from the left) of the word representation.

    I = (0, 0), X = (1, 0), Y = (1, 1), Z = (0, 1)

With this encoding a string equals ``i**popcount(x & z) * X**x Z**z``, so products
reduce to XORs plus an integer phase exponent modulo 4.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator

COEFF_CUTOFF = 1e-14
HERMITIAN_TOL = 1e-12

_PHASES = (1, 1j, -1, -1j)
_CHAR_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_CHAR = {bits: char for char, bits in _CHAR_BITS.items()}


class HamiltonianParseError(ValueError):
    """Raised when a Hamiltonian document cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True, slots=True)
class PauliString:
    x: int
    z: int
    n_qubits: int

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        x = z = 0
        for i, char in enumerate(label):
            try:
                bx, bz = _CHAR_BITS[char]
            except KeyError:
                raise ValueError(f"invalid Pauli character {char!r}") from None
            x |= bx << i
            z |= bz << i
        return cls(x, z, len(label))

    @classmethod
    def identity(cls, n_qubits: int) -> PauliString:
        return cls(0, 0, n_qubits)

    @property
    def label(self) -> str:
        return "".join(
            _BITS_CHAR[((self.x >> i) & 1, (self.z >> i) & 1)] for i in range(self.n_qubits)
        )

    def __str__(self) -> str:
        return self.label

    def __len__(self) -> int:
        return self.n_qubits

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def y_count(self) -> int:
        return _popcount(self.x & self.z)

    def commutes_with(self, other: PauliString) -> bool:
        _check_lengths(self, other)
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def tensor(self, other: PauliString) -> PauliString:
        """Concatenate ``other`` on the right (higher qubit indices)."""
        shift = self.n_qubits
        return PauliString(self.x | (other.x << shift), self.z | (other.z << shift),
                           self.n_qubits + other.n_qubits)

    def padded(self, n_qubits: int) -> PauliString:
        """Embed into a larger register, identity on the extra (rightmost) qubits."""
        if n_qubits < self.n_qubits:
            raise ValueError("cannot pad to fewer qubits")
        return PauliString(self.x, self.z, n_qubits)


def _check_lengths(a: PauliString, b: PauliString) -> None:
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"Pauli length mismatch: {a.n_qubits} vs {b.n_qubits}")


def product_phase_exponent(a: PauliString, b: PauliString) -> tuple[int, PauliString]:
    """Return ``(k, c)`` with ``a * b = i**k * c``; ``k`` is an integer mod 4."""
    _check_lengths(a, b)
    x, z = a.x ^ b.x, a.z ^ b.z
    k = (_popcount(a.x & a.z) + _popcount(b.x & b.z) + 2 * _popcount(a.z & b.x)
         - _popcount(x & z)) % 4
    return k, PauliString(x, z, a.n_qubits)


def pauli_product(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    k, c = product_phase_exponent(a, b)
    return _PHASES[k], c


@dataclass(frozen=True, slots=True)
class PauliTerm:
    coeff: complex
    string: PauliString

    @classmethod
    def from_label(cls, label: str, coeff: complex = 1.0) -> PauliTerm:
        return cls(coeff, PauliString.from_label(label))

    @property
    def n_qubits(self) -> int:
        return self.string.n_qubits


class PauliSum:
    """Collected linear combination of Pauli strings of equal length.

    Terms keep their first-insertion order; that order is the product order used
    by the Lie-Trotter formula.  Coefficients with magnitude below ``1e-14`` are
    dropped on collection.
    """

    __slots__ = ("_terms", "n_qubits", "hermitian")

    def __init__(self, terms: Iterable[PauliTerm] = (), n_qubits: int | None = None):
        acc: dict[PauliString, complex] = {}
        for term in terms:
            if n_qubits is None:
                n_qubits = term.n_qubits
            elif term.n_qubits != n_qubits:
                raise ValueError(
                    f"Pauli length mismatch: {term.n_qubits} vs {n_qubits}")
            acc[term.string] = acc.get(term.string, 0.0) + complex(term.coeff)
        if n_qubits is None:
            raise ValueError("cannot infer qubit count of an empty Pauli sum")
        self.n_qubits = n_qubits
        self._terms = tuple(PauliTerm(c, s) for s, c in acc.items() if abs(c) >= COEFF_CUTOFF)
        self.hermitian = all(abs(t.coeff.imag) < HERMITIAN_TOL for t in self._terms)

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[complex, str]]) -> PauliSum:
        return cls(PauliTerm.from_label(label, coeff) for coeff, label in pairs)

    @classmethod
    def zero(cls, n_qubits: int) -> PauliSum:
        return cls((), n_qubits)

    @property
    def terms(self) -> tuple[PauliTerm, ...]:
        return self._terms

    @property
    def real_coeffs(self) -> list[float]:
        return [t.coeff.real for t in self._terms]

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        return iter(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __repr__(self) -> str:
        body = " + ".join(f"({t.coeff:.6g})*{t.string.label}" for t in self._terms[:6])
        more = f" + ... ({len(self)} terms)" if len(self) > 6 else ""
        return f"PauliSum({body or '0'}{more}, n_qubits={self.n_qubits})"

    def __add__(self, other: PauliSum) -> PauliSum:
        return PauliSum((*self._terms, *other._terms), self.n_qubits)

    def __sub__(self, other: PauliSum) -> PauliSum:
        return self + other.scaled(-1.0)

    def __neg__(self) -> PauliSum:
        return self.scaled(-1.0)

    def __mul__(self, scalar: complex) -> PauliSum:
        return self.scaled(scalar)

    __rmul__ = __mul__

    def scaled(self, factor: complex) -> PauliSum:
        return PauliSum((PauliTerm(t.coeff * factor, t.string) for t in self._terms),
                        self.n_qubits)

    def reversed(self) -> PauliSum:
        return PauliSum(reversed(self._terms), self.n_qubits)

    def coefficient(self, label: str) -> complex:
        key = PauliString.from_label(label)
        for t in self._terms:
            if t.string == key:
                return t.coeff
        return 0.0

    def to_dict(self) -> dict[str, complex]:
        return {t.string.label: t.coeff for t in self._terms}

    def tensor_pauli(self, label: str) -> PauliSum:
        """Return ``self ⊗ P`` with ``P`` acting on new rightmost qubits."""
        extra = PauliString.from_label(label)
        return PauliSum((PauliTerm(t.coeff, t.string.tensor(extra)) for t in self._terms),
                        self.n_qubits + extra.n_qubits)

    def padded(self, n_qubits: int) -> PauliSum:
        return PauliSum((PauliTerm(t.coeff, t.string.padded(n_qubits)) for t in self._terms),
                        n_qubits)


def pauli_commutator(a: PauliTerm, b: PauliTerm) -> PauliSum:
    """``[a, b] = ab - ba``: zero, or ``2 * phase * coeff_a * coeff_b * (a.string b.string)``."""
    _check_lengths(a.string, b.string)
    if a.string.commutes_with(b.string):
        return PauliSum.zero(a.n_qubits)
    k, c = product_phase_exponent(a.string, b.string)
    return PauliSum([PauliTerm(2 * _PHASES[k] * a.coeff * b.coeff, c)], a.n_qubits)


def sum_commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"Pauli length mismatch: {a.n_qubits} vs {b.n_qubits}")
    acc = _Accumulator(a.n_qubits)
    for ta in a:
        for tb in b:
            acc.add_commutator(ta, tb, 1.0)
    return acc.result()


class _Accumulator:
    """Order-deterministic accumulation of commutator terms."""

    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.acc: dict[PauliString, complex] = {}

    def add_commutator(self, a: PauliTerm, b: PauliTerm, weight: complex) -> None:
        if a.string.commutes_with(b.string):
            return
        k, c = product_phase_exponent(a.string, b.string)
        self.acc[c] = self.acc.get(c, 0.0) + weight * 2 * _PHASES[k] * a.coeff * b.coeff

    def add_sum(self, s: PauliSum, weight: complex) -> None:
        for t in s:
            self.acc[t.string] = self.acc.get(t.string, 0.0) + weight * t.coeff

    def result(self) -> PauliSum:
        return PauliSum((PauliTerm(c, s) for s, c in self.acc.items()), self.n_qubits)


def compute_xi(h: PauliSum, order: int) -> PauliSum:
    """BCH commutator sums of the ordered product ``prod_j exp(t H_j)``.

    ``exp(t H_0) exp(t H_1) ... = exp(t H + t^2 Xi_1 + t^3 Xi_2 + O(t^4))`` with

        Xi_1 = 1/2  sum_{j<k} [H_j, H_k]
        Xi_2 = 1/12 ( sum_{j,k} [H_j, [H_j, H_k]]
                      + 2 sum_{j<k<l} ([H_j, [H_k, H_l]] + [H_l, [H_k, H_j]]) )

    where ``H_j`` are the terms of ``h`` in stored order (leftmost factor first).
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if not h:
        raise ValueError("compute_xi needs at least one term")
    terms = h.terms
    acc = _Accumulator(h.n_qubits)
    if order == 1:
        for j, k in combinations(range(len(terms)), 2):
            acc.add_commutator(terms[j], terms[k], 0.5)
        return acc.result()

    # [H_j, [H_j, H_k]] vanishes unless the strings anticommute, in which case it is 4 a_j^2 H_k.
    for hj in terms:
        for hk in terms:
            if not hj.string.commutes_with(hk.string):
                acc.add_sum(PauliSum([hk]), 4 * hj.coeff * hj.coeff / 12)
    inner = {}
    for k, l in combinations(range(len(terms)), 2):
        inner[k, l] = pauli_commutator(terms[k], terms[l])
    for j, k, l in combinations(range(len(terms)), 3):
        # [H_l, [H_k, H_j]] = [H_l, -[H_j, H_k]]
        for t in inner[k, l]:
            acc.add_commutator(terms[j], t, 2 / 12)
        for t in inner[j, k]:
            acc.add_commutator(terms[l], t, -2 / 12)
    return acc.result()


def coefficient_one_norm(h: PauliSum) -> float:
    return float(sum(abs(t.coeff) for t in h))


def parse_hamiltonian(text: str) -> PauliSum:
    """Parse ``<coefficient> <pauli word>`` lines; ``#`` starts a comment line.

    Term order follows the file, which fixes the Trotter product order.
    """
    pairs: list[tuple[float, str]] = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise HamiltonianParseError(
                f"expected '<coefficient> <pauli word>', got {line!r}", lineno)
        coeff_text, word = fields
        try:
            coeff = float(coeff_text)
        except ValueError:
            raise HamiltonianParseError(f"bad coefficient {coeff_text!r}", lineno) from None
        for char in word:
            if char not in _CHAR_BITS:
                raise HamiltonianParseError(f"invalid Pauli character {char!r}", lineno)
        if width is None:
            width = len(word)
        elif len(word) != width:
            raise HamiltonianParseError(
                f"inconsistent word length {len(word)} (expected {width})", lineno)
        pairs.append((coeff, word))
    if not pairs:
        raise HamiltonianParseError("empty Hamiltonian document")
    return PauliSum.from_labels(pairs)


def load_hamiltonian(path) -> PauliSum:
    with open(path, encoding="utf-8") as fh:
        return parse_hamiltonian(fh.read())


def format_hamiltonian(h: PauliSum) -> str:
    if not h.hermitian:
        raise ValueError("only Hermitian sums have a file representation")
    return "".join(f"{t.coeff.real!r} {t.string.label}\n" for t in h)


def random_pauli_sum(rng, n_qubits: int, n_terms: int, low: float = -1.0,
                     high: float = 1.0, allow_identity: bool = False) -> PauliSum:
    """Hermitian sum of ``n_terms`` distinct random strings with uniform coefficients."""
    chars = "IXYZ"
    max_terms = 4**n_qubits - (0 if allow_identity else 1)
    if n_terms > max_terms:
        raise ValueError(f"only {max_terms} distinct strings on {n_qubits} qubits")
    labels: list[str] = []
    while len(labels) < n_terms:
        label = "".join(chars[i] for i in rng.integers(0, 4, n_qubits))
        if label in labels or (not allow_identity and set(label) == {"I"}):
            continue
        labels.append(label)
    return PauliSum.from_labels((float(rng.uniform(low, high)), w) for w in labels)

