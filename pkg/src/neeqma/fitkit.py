"""Sweep series containers, the absolute-difference cost and the fitters."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .simulator import make_rng

CSV_HEADER = ("param", "observable", "estimate", "stderr", "shots")
RANK_TOL = 1e-12
SIMPLEX_TOL = 1e-10
MAX_EVALS = 20_000
DEFAULT_RESTARTS = 8
DEFAULT_MAX_PARAM = 10**6


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class SweepRow:
    param: int
    value: float
    stderr: float = 0.0
    shots: int | None = None


@dataclass
class SweepSeries:
    """Observable estimates indexed by a convergence parameter (n or d)."""

    observable: str
    rows: list[SweepRow] = field(default_factory=list)

    def __post_init__(self):
        params = [r.param for r in self.rows]
        if any(p < 1 for p in params):
            raise FitError("convergence parameters must be >= 1")
        if any(b <= a for a, b in zip(params, params[1:])):
            raise FitError("convergence parameters must be strictly increasing")
        for r in self.rows:
            if r.stderr < 0:
                raise FitError("negative standard error")
            if r.shots is None and r.stderr != 0:
                raise FitError("exact rows carry zero standard error")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def params(self) -> np.ndarray:
        return np.array([r.param for r in self.rows], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows], dtype=float)

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([r.stderr for r in self.rows], dtype=float)

    @property
    def grid(self) -> list[int]:
        return [r.param for r in self.rows]

    def weights(self) -> np.ndarray:
        """``1/stderr^2`` for sampled rows, 1 for exact rows.

        A sampled row whose estimate happened to give zero spread is floored at
        the one-count resolution ``1/shots``.
        """
        w = np.ones(len(self.rows))
        for i, r in enumerate(self.rows):
            if r.shots is not None:
                w[i] = 1.0 / max(r.stderr, 1.0 / r.shots) ** 2
        if np.any([r.shots is None for r in self.rows]) and np.any(
                [r.shots is not None for r in self.rows]):
            raise FitError("cannot weight a series mixing exact and sampled rows")
        return w

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([r.param, self.observable, repr(float(r.value)),
                             repr(float(r.stderr)), "exact" if r.shots is None else r.shots])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> SweepSeries:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise FitError(f"sweep CSV must start with header {','.join(CSV_HEADER)}")
        rows, kinds = [], set()
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(CSV_HEADER):
                raise FitError(f"line {lineno}: expected {len(CSV_HEADER)} fields")
            try:
                shots = None if rec[4] in ("exact", "inf") else int(rec[4])
                rows.append(SweepRow(int(rec[0]), float(rec[2]), float(rec[3]), shots))
            except ValueError as exc:
                raise FitError(f"line {lineno}: {exc}") from None
            kinds.add(rec[1])
        if len(kinds) > 1:
            raise FitError(f"sweep CSV mixes observables {sorted(kinds)}")
        return cls(kinds.pop() if kinds else "", rows)


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    cost: float
    grid: list[int]
    t_ref: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {"model": self.model, "params": {k: float(v) for k, v in self.params.items()},
               "cost": float(self.cost), "grid": list(self.grid), "t_ref": self.t_ref}
        doc.update(self.extra)
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> FitResult:
        doc = json.loads(text)
        try:
            core = {k: doc.pop(k) for k in ("model", "params", "cost", "grid")}
        except KeyError as exc:
            raise FitError(f"fit JSON lacks field {exc}") from None
        t_ref = doc.pop("t_ref", None)
        return cls(core["model"], {k: float(v) for k, v in core["params"].items()},
                   float(core["cost"]), [int(g) for g in core["grid"]], t_ref, doc)


FitEq = Callable[[float, Mapping[str, float]], float]


def cost(series: SweepSeries, fit_eq: FitEq, values: Mapping[str, float]) -> float:
    """Sum over rows of ``|Obs(param) - FitEq(param, values)|``."""
    return float(sum(abs(r.value - fit_eq(r.param, values)) for r in series.rows))


def fit_linear_basis(series: SweepSeries, basis: Mapping[str, Callable[[float], float]],
                     model: str = "linear") -> FitResult:
    """Weighted least squares on a linear-in-parameters model.

    Solved with a column-pivoted QR of the weighted design matrix; a numerically
    dependent column set raises :class:`FitError` naming the offending columns.
    """
    names = list(basis)
    if len(series) < len(names):
        raise FitError(
            f"{len(series)} rows cannot determine {len(names)} parameters "
            f"(short by {len(names) - len(series)})")
    x = series.params
    design = np.array([[basis[name](p) for name in names] for p in x], dtype=float)
    sw = np.sqrt(series.weights())
    a = design * sw[:, None]
    b = series.values * sw
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < len(names):
        dependent = [names[i] for i in piv[rank:]]
        raise FitError(f"rank-deficient basis: columns {dependent} depend on the others")
    coef = np.empty(len(names))
    coef[piv] = scipy.linalg.solve_triangular(r, q.T @ b)
    params = dict(zip(names, map(float, coef)))

    def eq(p, v):
        return sum(v[n] * basis[n](p) for n in names)

    return FitResult(model, params, cost(series, eq, params), series.grid)


def _to_box(u: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return lo + (hi - lo) * (1 + np.sin(u)) / 2


def _from_box(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = np.where(hi > lo, hi - lo, 1.0)
    s = np.clip(2 * (x - lo) / span - 1, -1.0, 1.0)
    return np.arcsin(s)


def fit_nonlinear(series: SweepSeries, fit_eq: FitEq, init: Mapping[str, float],
                  bounds: Mapping[str, tuple[float, float]] | None = None,
                  seed: int | None = 0, restarts: int = DEFAULT_RESTARTS,
                  model: str = "nonlinear", max_evals: int = MAX_EVALS) -> FitResult:
    """Derivative-free minimisation of the absolute-difference cost.

    Box bounds are enforced by the smooth map ``x = lo + (hi - lo)(1 + sin u)/2``,
    so the Nelder-Mead search itself is unconstrained.  Each run is a smooth
    least-squares descent followed by a simplex descent on the L1 cost, restarted
    once from its own end point.  Restart ``k`` begins from ``init`` perturbed by
    the seeded substream ``(seed, k)``; the lowest cost wins, ties going to the
    lowest index.  The result never costs more than ``init``.
    """
    names = list(init)
    bounds = dict(bounds or {})
    lo = np.array([bounds.get(n, (-np.inf, np.inf))[0] for n in names], dtype=float)
    hi = np.array([bounds.get(n, (-np.inf, np.inf))[1] for n in names], dtype=float)
    if np.any(lo > hi):
        bad = [n for n, a, b in zip(names, lo, hi) if a > b]
        raise FitError(f"inverted bounds for {bad}")
    x0 = np.array([init[n] for n in names], dtype=float)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise FitError("initial point lies outside the bounds")
    boxed = np.isfinite(lo) & np.isfinite(hi)
    if np.any(np.isfinite(lo) ^ np.isfinite(hi)):
        raise FitError("half-open bounds are not supported")

    params_x = series.params
    values = series.values

    def to_x(u):
        x = u.copy()
        x[boxed] = _to_box(u[boxed], lo[boxed], hi[boxed])
        return x

    def to_u(x):
        u = x.copy()
        u[boxed] = _from_box(x[boxed], lo[boxed], hi[boxed])
        return u

    def residuals(x):
        v = dict(zip(names, x))
        return values - np.array([fit_eq(p, v) for p in params_x])

    def l1(u):
        return float(np.sum(np.abs(residuals(to_x(u)))))

    def l2(u):
        return float(np.sum(residuals(to_x(u)) ** 2))

    options = {"xatol": SIMPLEX_TOL, "fatol": np.inf, "maxfev": max_evals, "adaptive": True}

    def descend(u):
        u = minimize(l2, u, method="Nelder-Mead", options=options).x
        for _ in range(2):
            u = minimize(l1, u, method="Nelder-Mead", options=options).x
        return u

    u0 = to_u(x0)
    best_u, best_cost = u0, l1(u0)
    starts = [u0]
    for k in range(restarts):
        rng = make_rng(seed, k)
        scale = np.where(boxed, 1.0, np.maximum(np.abs(x0), 1.0) * 0.5)
        starts.append(u0 + rng.normal(size=u0.size) * scale)
    for u in starts:
        u = descend(u)
        c = l1(u)
        if c < best_cost:
            best_u, best_cost = u, c
    x = to_x(best_u)
    x = np.clip(x, lo, hi)
    params = dict(zip(names, map(float, x)))
    return FitResult(model, params, cost(series, fit_eq, params), series.grid,
                     extra={"restarts": restarts, "seed": seed})


def select_min_parameter(err: Callable[[int], float], epsilon: float,
                         max_param: int = DEFAULT_MAX_PARAM) -> int | None:
    """Smallest ``p`` in ``[1, max_param]`` with ``err(p) <= epsilon`` (linear scan)."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    for p in range(1, max_param + 1):
        if err(p) <= epsilon:
            return p
    return None


def select_min_from(err: Callable[[int], float], epsilon: float,
                    candidates: Sequence[int]) -> int | None:
    """Like :func:`select_min_parameter` but over an explicit sorted candidate list."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    for p in sorted(candidates):
        if err(p) <= epsilon:
            return p
    return None


def power_basis(order: int) -> dict[str, Callable[[float], float]]:
    """``{a0: 1, a1: 1/n, ..., a_order: 1/n^order}``."""
    return {f"a{k}": (lambda n, k=k: n ** -k) for k in range(order + 1)}

