"""Quantum signal processing circuits, the one-qubit evaluator and the QSP error model.

The signal operator is ``W = exp(i t H ⊗ Z)`` followed by ``exp(i delta Z)`` on the
signal qubit (the last qubit).  Processing rotations are ``S_X(phi) = exp(i phi X)``.
A degree-``d`` sequence is ``S_X(phi_d) W ... W S_X(phi_0)`` (``phi_0`` applied
first).  On an eigenvector with eigenvalue ``x`` the signal qubit sees
``exp(i theta Z)`` with ``theta = t x + delta`` and the measured quantity is
``Re <0|U|0>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from typing import Iterator, Mapping, Sequence

import numpy as np

from .fitkit import (FitError, FitResult, SweepRow, SweepSeries, fit_nonlinear,
                     select_min_from)
from .pauli import PauliSum
from .simulator import (Circuit, Gate, StateVector, evolution, hadamard_test_estimate,
                        make_rng, pauli_rotation, run_circuit, rx, rz)
from .trotter import parallel_map

DEFAULT_SHOTS = 10**5
DEFAULT_M = 3
DEFAULT_SHIFT = -0.5
ALPHA_SUM_TOL = 1e-9
BUNDLED_ANGLES = "sign_phase_angles.txt"


class PhaseAngleError(ValueError):
    pass


class PhaseAngleSet(Mapping[int, tuple[float, ...]]):
    """Degree ``d`` to its ``d + 1`` phase angles."""

    def __init__(self, angles: Mapping[int, Sequence[float]] | None = None):
        self._angles: dict[int, tuple[float, ...]] = {}
        for d, phis in (angles or {}).items():
            phis = tuple(float(p) for p in phis)
            if d < 1:
                raise PhaseAngleError(f"degree must be positive, got {d}")
            if len(phis) != d + 1:
                raise PhaseAngleError(f"degree {d}: expected {d + 1} angles, got {len(phis)}")
            self._angles[int(d)] = phis
        self._angles = dict(sorted(self._angles.items()))

    def __getitem__(self, d: int) -> tuple[float, ...]:
        try:
            return self._angles[d]
        except KeyError:
            raise KeyError(f"no phase angles for degree {d}") from None

    def __iter__(self) -> Iterator[int]:
        return iter(self._angles)

    def __len__(self) -> int:
        return len(self._angles)

    @property
    def degrees(self) -> list[int]:
        return list(self._angles)

    def restricted(self, degrees: Sequence[int]) -> PhaseAngleSet:
        return PhaseAngleSet({d: self[d] for d in degrees})

    def to_text(self) -> str:
        return "".join(f"{d} " + " ".join(repr(p) for p in phis) + "\n"
                       for d, phis in self._angles.items())

    def __repr__(self) -> str:
        return f"PhaseAngleSet(degrees={self.degrees})"


def parse_phase_angles(text: str) -> PhaseAngleSet:
    """Read ``<d> <phi_0> ... <phi_d>`` lines; ``#`` starts a comment."""
    table: dict[int, list[float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            d = int(fields[0])
        except ValueError:
            raise PhaseAngleError(f"line {lineno}: bad degree {fields[0]!r}") from None
        if d < 1:
            raise PhaseAngleError(f"line {lineno}: degree must be positive")
        if d in table:
            raise PhaseAngleError(f"line {lineno}: duplicate degree {d}")
        if len(fields) - 1 != d + 1:
            raise PhaseAngleError(
                f"line {lineno}: expected {d + 1} angles for degree {d}, got {len(fields) - 1}")
        try:
            table[d] = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise PhaseAngleError(f"line {lineno}: {exc}") from None
    return PhaseAngleSet(table)


def load_phase_angles(path) -> PhaseAngleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_phase_angles(fh.read())


def bundled_sign_angles() -> PhaseAngleSet:
    """Odd-degree sign-function approximations shipped with the package."""
    text = resources.files("neeqma.data").joinpath(BUNDLED_ANGLES).read_text(encoding="utf-8")
    return parse_phase_angles(text)


def shift_to_phase(shift: float) -> float:
    """Eigenvalue shift ``Delta`` to the signal-qubit phase ``delta = pi/2 Delta``."""
    return math.pi / 2 * shift


def default_qsp_time(lambda_max: float) -> float:
    """``pi / (2 |lambda_m|)``, which maps the spectrum into ``[-pi/2, pi/2]``."""
    if lambda_max == 0:
        raise ValueError("spectral radius is zero")
    return math.pi / (2 * abs(lambda_max))


def _check_steps(trotter_steps: int | None) -> None:
    if trotter_steps is not None and trotter_steps < 1:
        raise ValueError(f"Trotter backend needs n >= 1, got {trotter_steps}")


def signal_operator_gates(h: PauliSum, t: float, delta: float,
                          trotter_steps: int | None = None) -> list[Gate]:
    """Gates of ``exp(i t H ⊗ Z)`` then ``exp(i delta Z)`` on the appended signal qubit.

    ``trotter_steps=None`` uses the exact exponential; an integer ``n`` uses ``n``
    Lie-Trotter steps of the ``P_j ⊗ Z`` rotations, which acts as ``S(+t, n)`` and
    ``S(-t, n)`` on the two signal branches.
    """
    _check_steps(trotter_steps)
    if not h.hermitian:
        raise ValueError("signal operator needs a Hermitian Pauli sum")
    hz = h.tensor_pauli("Z")
    signal = h.n_qubits
    if trotter_steps is None:
        gates = [evolution(hz, t)] if hz else []
    else:
        step = [pauli_rotation(term.string, t / trotter_steps * term.coeff.real)
                for term in hz]
        gates = step * trotter_steps
    return gates + [rz(signal, -2 * delta)]


def apply_signal_operator(state: StateVector, h: PauliSum, t: float, delta: float,
                          trotter_steps: int | None = None) -> StateVector:
    if state.n_qubits != h.n_qubits + 1:
        raise ValueError("state must carry exactly one signal qubit after the system")
    circuit = Circuit(state.n_qubits, signal_operator_gates(h, t, delta, trotter_steps))
    return run_circuit(state, circuit)


def build_qsp_circuit(angles: Sequence[float], h: PauliSum, t: float, delta: float,
                      trotter_steps: int | None = None) -> Circuit:
    if len(angles) == 0:
        raise ValueError("empty phase-angle list")
    signal = h.n_qubits
    w = signal_operator_gates(h, t, delta, trotter_steps)
    # S_X(phi) = exp(i phi X) = RX(-2 phi)
    gates = [rx(signal, -2 * angles[0])]
    for phi in angles[1:]:
        gates.extend(w)
        gates.append(rx(signal, -2 * phi))
    return Circuit(signal + 1, gates)


def sweep_qsp(h: PauliSum, t: float, delta: float, psi: StateVector,
              angleset: PhaseAngleSet, shots: int | None = DEFAULT_SHOTS,
              seed: int | None = 0, degrees: Sequence[int] | None = None,
              trotter_steps: int | None = None) -> SweepSeries:
    """``Re <psi, 0| QSP_d |psi, 0>`` by a Hadamard test for every degree.

    Row ``i`` samples from the substream ``(seed, i)``.
    """
    if degrees is not None:
        angleset = angleset.restricted(sorted(degrees))
    if len(angleset) == 0:
        raise ValueError("empty phase-angle set")
    if psi.n_qubits != h.n_qubits:
        raise ValueError("state and Hamiltonian widths differ")
    start = psi.tensor_zero(1)

    def row(item):
        index, d = item
        circuit = build_qsp_circuit(angleset[d], h, t, delta, trotter_steps)
        est = hadamard_test_estimate(start, circuit, "re", shots, make_rng(seed, index))
        return SweepRow(d, est.value, est.stderr, shots)

    return SweepSeries("qsp", parallel_map(row, list(enumerate(angleset.degrees))))


def _sx(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, 1j * s], [1j * s, c]])


def qsp_unitary(angles: Sequence[float], theta) -> np.ndarray:
    """The 2x2 QSP products for signal phases ``theta`` (any shape), stacked last."""
    if len(angles) == 0:
        raise ValueError("empty phase-angle list")
    theta = np.asarray(theta, dtype=float)
    phase = np.exp(1j * theta)
    u = np.broadcast_to(_sx(angles[0]), theta.shape + (2, 2)).copy()
    for phi in angles[1:]:
        # W = diag(e^{i theta}, e^{-i theta}) scales the rows
        u[..., 0, :] *= phase[..., None]
        u[..., 1, :] *= phase.conj()[..., None]
        u = _sx(phi) @ u
    return u


def one_qubit_qsp_eval(angles: Sequence[float], x, t: float, delta: float):
    """``Re F`` of the one-qubit sequence with signal ``exp(i (t x + delta) Z)``."""
    theta = t * np.asarray(x, dtype=float) + delta
    value = qsp_unitary(angles, theta)[..., 0, 0].real
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class QspErrorModel:
    """Eigen-data ``(lambda_i, alpha_i)`` seen through the QSP sequence.

    ``shift`` is the eigenvalue shift ``Delta``; the signal phase is ``pi/2 Delta``.
    """

    lambdas: tuple[float, ...]
    alphas: tuple[float, ...]
    shift: float
    t: float

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "alphas", tuple(float(v) for v in self.alphas))
        if len(self.lambdas) != len(self.alphas) or not self.lambdas:
            raise ValueError("need matching, non-empty lambda and alpha lists")
        if any(a < 0 for a in self.alphas):
            raise ValueError("overlap weights must be non-negative")
        if sum(self.alphas) > 1 + ALPHA_SUM_TOL:
            raise ValueError(f"overlap weights sum to {sum(self.alphas)} > 1")

    @property
    def m(self) -> int:
        return len(self.lambdas)

    @property
    def delta(self) -> float:
        return shift_to_phase(self.shift)

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.lambdas, self.alphas))

    def to_fit_result(self, cost: float = 0.0, grid: Sequence[int] = ()) -> FitResult:
        params: dict[str, float] = {}
        for i, (lam, alpha) in enumerate(self.pairs()):
            params[f"lambda{i}"] = lam
            params[f"alpha{i}"] = alpha
        return FitResult("qsp", params, cost, list(grid), self.t,
                         {"shift": self.shift, "m": self.m})

    @classmethod
    def from_fit_result(cls, fit: FitResult) -> QspErrorModel:
        if fit.model != "qsp":
            raise FitError(f"expected a qsp model, got {fit.model!r}")
        if fit.t_ref is None or "shift" not in fit.extra:
            raise FitError("qsp model needs t_ref and shift")
        m = int(fit.extra.get("m", sum(k.startswith("lambda") for k in fit.params)))
        try:
            lams = [fit.params[f"lambda{i}"] for i in range(m)]
            alphas = [fit.params[f"alpha{i}"] for i in range(m)]
        except KeyError as exc:
            raise FitError(f"qsp model lacks parameter {exc}") from None
        return cls(tuple(lams), tuple(alphas), float(fit.extra["shift"]), float(fit.t_ref))


def qsp_fit_eq(d: int, model: QspErrorModel, angleset: PhaseAngleSet) -> float:
    """``sum_i alpha_i Re F_d(t lambda_i + delta)``."""
    values = one_qubit_qsp_eval(angleset[d], np.array(model.lambdas), model.t, model.delta)
    return float(np.dot(model.alphas, values))


def _model_from_raw(v: Mapping[str, float], m: int, shift: float, t: float) -> QspErrorModel:
    raw = np.array([v[f"a{i}"] for i in range(m)])
    alphas = raw / max(1.0, float(raw.sum()))
    return QspErrorModel(tuple(v[f"lambda{i}"] for i in range(m)), tuple(alphas), shift, t)


def fit_qsp(series: SweepSeries, angleset: PhaseAngleSet, m: int = DEFAULT_M,
            t: float = math.pi / 2, delta: float = shift_to_phase(DEFAULT_SHIFT),
            seed: int | None = 0, restarts: int = 8,
            init: QspErrorModel | None = None) -> tuple[QspErrorModel, float]:
    """Fit ``m`` eigen-pairs to a degree sweep by minimising the absolute-difference cost.

    ``lambda_i`` live in ``[-1, 1]``; raw weights ``a_i`` in ``[0, 1]`` map to
    ``alpha = a / max(1, sum a)``, which keeps ``alpha >= 0`` and ``sum alpha <= 1``.
    """
    if m < 1:
        raise FitError("m must be positive")
    if len(series) < 2 * m:
        raise FitError(f"{len(series)} rows cannot determine {m} eigen-pairs (need {2 * m})")
    missing = [d for d in series.grid if d not in angleset]
    if missing:
        raise FitError(f"no phase angles for degrees {missing}")
    shift = delta / (math.pi / 2)
    if init is None:
        lams = np.linspace(-0.5, 0.5, m) if m > 1 else np.zeros(1)
        init = QspErrorModel(tuple(lams), (1.0 / m,) * m, shift, t)
    elif init.m != m:
        raise FitError("initial model has the wrong number of eigen-pairs")
    start: dict[str, float] = {}
    bounds: dict[str, tuple[float, float]] = {}
    for i in range(m):
        start[f"lambda{i}"] = min(1.0, max(-1.0, init.lambdas[i]))
        start[f"a{i}"] = init.alphas[i]
        bounds[f"lambda{i}"] = (-1.0, 1.0)
        bounds[f"a{i}"] = (0.0, 1.0)
    values = {d: angleset[d] for d in series.grid}

    def eq(d, v):
        lam = np.array([v[f"lambda{i}"] for i in range(m)])
        raw = np.array([v[f"a{i}"] for i in range(m)])
        alphas = raw / max(1.0, float(raw.sum()))
        return float(np.dot(alphas, one_qubit_qsp_eval(values[int(d)], lam, t, delta)))

    result = fit_nonlinear(series, eq, start, bounds, seed=seed, restarts=restarts, model="qsp")
    model = _model_from_raw(result.params, m, shift, t)
    return _canonical_branch(model, values), result.cost


def _canonical_branch(model: QspErrorModel, values: Mapping[int, Sequence[float]]
                      ) -> QspErrorModel:
    """Reflect each ``lambda`` with ``t lambda + delta > 0`` onto ``theta <= 0``.

    Responses that depend on ``cos theta`` only cannot tell ``theta`` from ``-theta``.
    The reflection is applied only if it stays in ``[-1, 1]`` and reproduces the
    response at every fitted degree, so asymmetric angle sets are left alone.
    """
    lams = list(model.lambdas)
    for i, lam in enumerate(lams):
        theta = model.t * lam + model.delta
        if theta <= 0:
            continue
        mirror = (-theta - model.delta) / model.t
        if abs(mirror) > 1:
            continue
        a = np.array([one_qubit_qsp_eval(phis, lam, model.t, model.delta)
                      for phis in values.values()])
        b = np.array([one_qubit_qsp_eval(phis, mirror, model.t, model.delta)
                      for phis in values.values()])
        if np.max(np.abs(a - b)) <= 1e-12:
            lams[i] = mirror
    return replace(model, lambdas=tuple(lams))


def target_sign(model: QspErrorModel, x) -> np.ndarray:
    """``sign(cos(t x + delta))``, the function the bundled angles approximate."""
    return np.sign(np.cos(model.t * np.asarray(x, dtype=float) + model.delta))


def qsp_err_model(model: QspErrorModel, d: int, angleset: PhaseAngleSet) -> float:
    """``|sum_i alpha_i (sign(cos theta_i) - poly_d(cos theta_i))|``, ``theta = t x + delta``.

    The same argument feeds the target and the polynomial.
    """
    lam = np.array(model.lambdas)
    poly = one_qubit_qsp_eval(angleset[d], lam, model.t, model.delta)
    return float(abs(np.dot(model.alphas, target_sign(model, lam) - poly)))


def min_qsp_degree(model: QspErrorModel, epsilon: float, angleset: PhaseAngleSet) -> int | None:
    """Smallest available degree whose predicted error is at most ``epsilon``."""
    return select_min_from(lambda d: qsp_err_model(model, d, angleset), epsilon,
                           angleset.degrees)
