"""Lie-Trotter circuits, Trotter-number sweeps and the Trotter error model.

The convergence law fitted here is the order-two truncation

    <psi| S(t, n) |psi>  ~  c + e1/n + e2/n^2,      S(t, n) = (prod_j exp(i t/n a_j P_j))^n

with complex ``e_j`` whose time dependence is taken as ``e_j(t) ~ t^(j+1)``.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

from .fitkit import (FitError, FitResult, SweepRow, SweepSeries, fit_linear_basis,
                     fit_nonlinear, select_min_parameter)
from .pauli import PauliSum
from .simulator import (Circuit, Estimate, StateVector, hadamard_test_estimate, make_rng,
                        pauli_rotation, pauli_sum_expectation, return_probability_estimate,
                        run_circuit)

DEFAULT_GRID = (2, 3, 4, 6, 8, 12, 16, 24, 32)
DEFAULT_SHOTS = 10**5
DEFAULT_SHOTS_RE_IM = 10**8
DEFAULT_FIDELITY_OFFSET = 1


class ObservableKind(enum.Enum):
    REAL = "real"
    IMAG = "imag"
    PHASE = "phase"
    FIDELITY = "fidelity"
    ENERGY = "energy"


def default_shots(kind: ObservableKind) -> int:
    """Shot budget used for the published runs: 1e8 for Re/Im, 1e5 otherwise."""
    return DEFAULT_SHOTS_RE_IM if kind in (ObservableKind.REAL, ObservableKind.IMAG) \
        else DEFAULT_SHOTS


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("NEEQMA_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Order-preserving map, threaded up to ``NEEQMA_THREADS`` workers."""
    workers = min(thread_cap(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def build_lie_trotter(h: PauliSum, t: float, n: int) -> Circuit:
    """``n`` repetitions of ``exp(i t/n a_j P_j)`` over the terms of ``h`` in order."""
    if n < 1:
        raise ValueError(f"Trotter number must be >= 1, got {n}")
    if not h.hermitian:
        raise ValueError("Lie-Trotter synthesis needs a Hermitian Pauli sum")
    step = [pauli_rotation(term.string, t / n * term.coeff.real) for term in h]
    return Circuit(h.n_qubits, step * n)


def _check_grid(grid: Sequence[int]) -> list[int]:
    grid = [int(n) for n in grid]
    if not grid:
        raise ValueError("empty convergence-parameter grid")
    if grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing and start at >= 1")
    return grid


def _phase_estimate(psi, u, shots, seed, index) -> Estimate:
    re = hadamard_test_estimate(psi, u, "re", shots, make_rng(seed, index, 0))
    im = hadamard_test_estimate(psi, u, "im", shots, make_rng(seed, index, 1))
    value = re.value**2 + im.value**2
    stderr = math.hypot(2 * re.value * re.stderr, 2 * im.value * im.stderr)
    return Estimate(value, stderr, shots)


def sweep_trotter(h: PauliSum, t: float, psi: StateVector, kind: ObservableKind,
                  grid: Sequence[int] = DEFAULT_GRID, shots: int | None = None,
                  seed: int | None = 0,
                  fidelity_offset: int = DEFAULT_FIDELITY_OFFSET) -> SweepSeries:
    """Measure one observable of ``S(t, n)|psi>`` for every ``n`` in ``grid``.

    ``shots=None`` gives exact values.  Row ``i`` draws from the substream
    ``(seed, i)`` so rows are reproducible independently of evaluation order.
    """
    kind = ObservableKind(kind)
    grid = _check_grid(grid)
    if psi.n_qubits != h.n_qubits:
        raise ValueError("state and Hamiltonian widths differ")
    if kind is ObservableKind.FIDELITY and fidelity_offset < 1:
        raise ValueError("fidelity offset must be >= 1")

    def row(item):
        index, n = item
        circuit = build_lie_trotter(h, t, n)
        rng = make_rng(seed, index)
        if kind is ObservableKind.REAL:
            est = hadamard_test_estimate(psi, circuit, "re", shots, rng)
        elif kind is ObservableKind.IMAG:
            est = hadamard_test_estimate(psi, circuit, "im", shots, rng)
        elif kind is ObservableKind.PHASE:
            est = _phase_estimate(psi, circuit, shots, seed, index)
        elif kind is ObservableKind.FIDELITY:
            back = build_lie_trotter(h, t, n + fidelity_offset).inverse()
            est = return_probability_estimate(psi, circuit + back, shots, rng)
        else:
            evolved = run_circuit(psi.copy(), circuit)
            est = pauli_sum_expectation(evolved, h, shots, rng)
        return SweepRow(n, est.value, est.stderr, shots)

    rows = parallel_map(row, list(enumerate(grid)))
    return SweepSeries(kind.value, rows)


# Parameter names of each equation-to-fit.
FIT_PARAMS: dict[ObservableKind, tuple[str, ...]] = {
    ObservableKind.REAL: ("c", "e1", "e2"),
    ObservableKind.IMAG: ("c", "e1", "e2"),
    ObservableKind.PHASE: ("k1r", "k1i", "k2r", "k2i", "k3r", "k3i"),
    ObservableKind.ENERGY: ("a0", "a1", "a2", "a3", "a4"),
    ObservableKind.FIDELITY: ("c1r", "c1i", "c2r", "c2i", "c3", "c4r", "c4i", "c5"),
}


def _require(params: Mapping[str, float], names: Sequence[str]) -> None:
    missing = [n for n in names if n not in params]
    if missing:
        raise KeyError(f"missing fit parameters {missing}")


def trotter_fit_eq(kind: ObservableKind, n: float, params: Mapping[str, float],
                   fidelity_offset: int = DEFAULT_FIDELITY_OFFSET) -> float:
    kind = ObservableKind(kind)
    _require(params, FIT_PARAMS[kind])
    p = params
    if kind in (ObservableKind.REAL, ObservableKind.IMAG):
        return p["c"] + p["e1"] / n + p["e2"] / n**2
    if kind is ObservableKind.ENERGY:
        return sum(p[f"a{k}"] / n**k for k in range(5))
    if kind is ObservableKind.PHASE:
        z = complex(p["k1r"], p["k1i"]) + complex(p["k2r"], p["k2i"]) / n \
            + complex(p["k3r"], p["k3i"]) / n**2
        return abs(z) ** 2
    j = fidelity_offset
    c1 = complex(p["c1r"], p["c1i"])
    c2 = complex(p["c2r"], p["c2i"])
    c4 = complex(p["c4r"], p["c4i"])
    m = n + j
    z = (1 + c1 / n + c2 / n**2 + c1.conjugate() / m + p["c3"] / (n**2 + n * j)
         + c4 / (n**3 + n**2 * j) + c2.conjugate() / m**2 + c4.conjugate() / (m**2 * n)
         + p["c5"] / (m**2 * n**2))
    return abs(z) ** 2


_LINEAR_BASIS = {
    ObservableKind.REAL: {"c": lambda n: 1.0, "e1": lambda n: 1 / n, "e2": lambda n: n**-2},
    ObservableKind.ENERGY: {f"a{k}": (lambda n, k=k: n**-k) for k in range(5)},
}
_LINEAR_BASIS[ObservableKind.IMAG] = _LINEAR_BASIS[ObservableKind.REAL]


def fit_trotter(series: SweepSeries, kind: ObservableKind | None = None, t_ref: float | None = None,
                fidelity_offset: int = DEFAULT_FIDELITY_OFFSET, seed: int | None = 0,
                restarts: int | None = None) -> FitResult:
    """Fit the equation-to-fit of ``kind`` (default: the series' own tag).

    Re/Im/energy are linear in their parameters; phase and fidelity go through the
    derivative-free fitter.  For the phase form the global phase of
    ``(k1, k2, k3)`` and a simultaneous complex conjugation are unobservable, so
    ``k1`` is pinned real and nonnegative.  Fidelity constants are likewise only
    determined up to the symmetries of the squared modulus.
    """
    kind = ObservableKind(kind or series.observable)
    names = FIT_PARAMS[kind]
    if len(series) < len(names):
        raise FitError(f"{len(series)} rows cannot determine {len(names)} parameters "
                       f"for {kind.value} (short by {len(names) - len(series)})")
    if kind in _LINEAR_BASIS:
        result = fit_linear_basis(series, _LINEAR_BASIS[kind], model=f"trotter-{kind.value}")
    else:
        def eq(n, v):
            return trotter_fit_eq(kind, n, {**v, "k1i": 0.0}, fidelity_offset) \
                if kind is ObservableKind.PHASE else trotter_fit_eq(kind, n, v, fidelity_offset)

        kwargs = {} if restarts is None else {"restarts": restarts}
        if kind is ObservableKind.PHASE:
            init = {n: 0.0 for n in names if n != "k1i"}
            init["k1r"] = math.sqrt(max(series.values[-1], 0.0))
            bounds = {"k1r": (0.0, 1.5)}
            result = fit_nonlinear(series, eq, init, bounds, seed=seed,
                                   model=f"trotter-{kind.value}", **kwargs)
            result.params = {k: result.params.get(k, 0.0) for k in names}
        else:
            init = {n: 0.0 for n in names}
            result = fit_nonlinear(series, eq, init, seed=seed,
                                   model=f"trotter-{kind.value}", **kwargs)
        result.extra["unidentifiable"] = "global phase / conjugation of complex constants"
    result.t_ref = t_ref
    if kind is ObservableKind.FIDELITY:
        result.extra["fidelity_offset"] = fidelity_offset
    return result


@dataclass(frozen=True)
class TrotterErrorModel:
    """Converged values and complex error constants ``e_j = er_j + i ei_j`` at ``t_ref``."""

    cr: float
    ci: float
    er1: float
    ei1: float
    er2: float
    ei2: float
    t_ref: float

    @property
    def e1(self) -> complex:
        return complex(self.er1, self.ei1)

    @property
    def e2(self) -> complex:
        return complex(self.er2, self.ei2)

    @property
    def c(self) -> complex:
        return complex(self.cr, self.ci)

    def observable(self, n: float) -> complex:
        return self.c + self.e1 / n + self.e2 / n**2

    @classmethod
    def from_fits(cls, real: FitResult, imag: FitResult, t_ref: float) -> TrotterErrorModel:
        return cls(real.params["c"], imag.params["c"], real.params["e1"], imag.params["e1"],
                   real.params["e2"], imag.params["e2"], t_ref)

    @classmethod
    def from_constants(cls, c: complex, e1: complex, e2: complex, t_ref: float
                       ) -> TrotterErrorModel:
        return cls(c.real, c.imag, e1.real, e1.imag, e2.real, e2.imag, t_ref)

    def to_fit_result(self, cost: float = 0.0, grid: Sequence[int] = ()) -> FitResult:
        params = {k: getattr(self, k) for k in ("cr", "ci", "er1", "ei1", "er2", "ei2")}
        return FitResult("trotter", params, cost, list(grid), self.t_ref)

    @classmethod
    def from_fit_result(cls, fit: FitResult) -> TrotterErrorModel:
        if fit.model != "trotter":
            raise FitError(f"expected a 'trotter' model, got {fit.model!r}")
        if fit.t_ref is None:
            raise FitError("trotter model lacks t_ref")
        p = fit.params
        try:
            return cls(p["cr"], p["ci"], p["er1"], p["ei1"], p["er2"], p["ei2"], fit.t_ref)
        except KeyError as exc:
            raise FitError(f"trotter model lacks parameter {exc}") from None


def fit_error_model(real: SweepSeries, imag: SweepSeries, t_ref: float) -> tuple[
        TrotterErrorModel, float]:
    """Combine Re and Im fits into one model; returns the model and the summed cost."""
    fr = fit_trotter(real, ObservableKind.REAL, t_ref)
    fi = fit_trotter(imag, ObservableKind.IMAG, t_ref)
    return TrotterErrorModel.from_fits(fr, fi, t_ref), fr.cost + fi.cost


def rescale_constants(model: TrotterErrorModel, t_new: float) -> TrotterErrorModel:
    """Move the error constants to a new time with ``e_j(t) / t^(j+1)`` held fixed.

    ``cr``/``ci`` stay the values observed at the original time.
    """
    if not model.t_ref > 0:
        raise ValueError("model t_ref must be positive")
    if not t_new > 0:
        raise ValueError(f"new time must be positive, got {t_new}")
    r = t_new / model.t_ref
    return replace(model, er1=model.er1 * r**2, ei1=model.ei1 * r**2,
                   er2=model.er2 * r**3, ei2=model.ei2 * r**3, t_ref=t_new)


def predict_err(model: TrotterErrorModel, n: float) -> float:
    """``|e1/n + e2/n^2|``."""
    if n < 1:
        raise ValueError(f"Trotter number must be >= 1, got {n}")
    return abs(model.e1 / n + model.e2 / n**2)


def min_trotter_number(model: TrotterErrorModel, epsilon: float,
                       max_param: int = 10**6) -> int | None:
    return select_min_parameter(lambda n: predict_err(model, n), epsilon, max_param)
