"""Command-line front end: sweep, fit, predict, minparam, oracle.

Every command writes plain text (CSV or JSON) to ``--out`` or stdout, and the
only randomness comes from ``--seed``, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import oracle, qsp, trotter
from .fitkit import DEFAULT_MAX_PARAM, FitResult, SweepSeries
from .pauli import PauliSum, load_hamiltonian
from .simulator import StateVector, init_basis_state

EXIT_INPUT = 2
EXACT = "exact"


class InputError(Exception):
    pass


def _shots(text: str) -> int | str:
    if text == EXACT:
        return EXACT
    try:
        value = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("shots must be a positive integer or 'exact'") from None
    if value < 1:
        raise argparse.ArgumentTypeError("shots must be >= 1")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") \
            from None


def _range(text: str) -> list[int]:
    """``a:b`` (inclusive) or a comma list."""
    if ":" in text:
        try:
            lo, hi = (int(v) for v in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}") from None
        if lo < 1 or hi < lo:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        return list(range(lo, hi + 1))
    return _int_list(text)


def _add_problem(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ham", type=Path, help="Hamiltonian file (<coeff> <pauli word> per line)")
    p.add_argument("--state", help="initial computational basis state, e.g. 0011")
    tg = p.add_mutually_exclusive_group()
    tg.add_argument("--time", type=float, help="evolution time t")
    tg.add_argument("--time-qpe", type=int, metavar="K",
                    help="t = 2 pi / (2 |lambda_m|) * 2^K")
    p.add_argument("--norm", type=float,
                   help="|lambda_m| to use instead of the dense spectral radius")


def _add_sampling(p: argparse.ArgumentParser) -> None:
    p.add_argument("--shots", type=_shots,
                   help="shots per estimate or 'exact' (default 1e8 for real/imag, 1e5 else)")
    p.add_argument("--seed", type=int, default=0)


def _add_trotter_obs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--obs", choices=[k.value for k in trotter.ObservableKind])
    p.add_argument("--grid", type=_int_list, default=list(trotter.DEFAULT_GRID))
    p.add_argument("--fidelity-offset", type=int, default=trotter.DEFAULT_FIDELITY_OFFSET)


def _add_qsp(p: argparse.ArgumentParser) -> None:
    p.add_argument("--angles", type=Path, help="phase-angle file (default: bundled sign set)")
    p.add_argument("--degrees", type=_int_list, help="restrict to these degrees")
    p.add_argument("--shift", type=float, default=qsp.DEFAULT_SHIFT,
                   help="eigenvalue shift Delta (signal phase pi/2 Delta)")
    p.add_argument("--trotter-steps", type=int,
                   help="Trotterize the signal operator with this many steps")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="neeqma",
                                 description="Fit convergence laws of Trotter and QSP circuits.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="simulate a convergence-parameter sweep (CSV)")
    p.add_argument("--mode", choices=("trotter", "qsp"), required=True)
    _add_problem(p)
    _add_sampling(p)
    _add_trotter_obs(p)
    _add_qsp(p)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("fit", help="fit an equation-to-fit (JSON)")
    p.add_argument("--mode", choices=("trotter", "qsp"), required=True)
    p.add_argument("--series", type=Path, action="append", default=[],
                   help="sweep CSV; give real and imag files for a full trotter model")
    _add_problem(p)
    _add_sampling(p)
    _add_trotter_obs(p)
    _add_qsp(p)
    p.add_argument("--m", type=int, default=qsp.DEFAULT_M, help="eigen-pairs in the QSP model")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("predict", help="predicted error over a parameter range (CSV)")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--range", type=_range, default=list(range(1, 65)))
    p.add_argument("--time", type=float, help="rescale a trotter model to this time")
    p.add_argument("--angles", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("minparam", help="smallest parameter meeting an error target")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--max-param", type=int, default=DEFAULT_MAX_PARAM)
    p.add_argument("--time", type=float, help="rescale a trotter model to this time")
    p.add_argument("--angles", type=Path)

    p = sub.add_parser("oracle", help="dense reference data (JSON)")
    p.add_argument("--what", choices=("overlaps", "trotter"), default="overlaps")
    _add_problem(p)
    p.add_argument("--n-pair", type=_int_list, default=[16, 32])
    p.add_argument("--normalize", action="store_true",
                   help="divide eigenvalues by |lambda_m| (overlaps only)")
    p.add_argument("--out", type=Path)
    return ap


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _hamiltonian(args) -> PauliSum:
    if args.ham is None:
        raise InputError("--ham is required")
    return load_hamiltonian(args.ham)


def _state(args, h: PauliSum) -> StateVector:
    bits = args.state if args.state is not None else "0" * h.n_qubits
    if len(bits) != h.n_qubits:
        raise InputError(f"--state has {len(bits)} bits, Hamiltonian has {h.n_qubits} qubits")
    return init_basis_state(bits)


def _lambda_max(args, h: PauliSum) -> float:
    lam = args.norm if args.norm is not None else oracle.spectral_radius(h)
    if not lam > 0:
        raise InputError("|lambda_m| must be positive")
    return abs(lam)


def _trotter_time(args, h: PauliSum) -> float:
    if args.time is not None:
        return args.time
    if args.time_qpe is not None:
        return 2 * math.pi / (2 * _lambda_max(args, h)) * 2**args.time_qpe
    raise InputError("trotter mode needs --time or --time-qpe")


def _qsp_problem(args):
    """Normalized Hamiltonian, time, signal phase and angle set for QSP runs."""
    h = _hamiltonian(args)
    h = h.scaled(1 / _lambda_max(args, h))
    if args.time_qpe is not None:
        raise InputError("--time-qpe applies to trotter mode only")
    t = args.time if args.time is not None else math.pi / 2
    angles = _qsp_angles(args)
    if args.degrees:
        angles = angles.restricted(args.degrees)
    return h, t, qsp.shift_to_phase(args.shift), angles


def _resolve_shots(args, default: int) -> int | None:
    if args.shots == EXACT:
        return None
    return default if args.shots is None else args.shots


def _trotter_sweep(args, h, t, psi, kind) -> SweepSeries:
    kind = trotter.ObservableKind(kind)
    shots = _resolve_shots(args, trotter.default_shots(kind))
    return trotter.sweep_trotter(h, t, psi, kind, args.grid, shots, args.seed,
                                 args.fidelity_offset)


def _qsp_sweep(args) -> tuple[SweepSeries, float, float, qsp.PhaseAngleSet]:
    h, t, delta, angles = _qsp_problem(args)
    psi = _state(args, h)
    shots = _resolve_shots(args, qsp.DEFAULT_SHOTS)
    series = qsp.sweep_qsp(h, t, delta, psi, angles, shots, args.seed,
                           trotter_steps=args.trotter_steps)
    return series, t, delta, angles


def cmd_sweep(args) -> None:
    if args.mode == "trotter":
        h = _hamiltonian(args)
        series = _trotter_sweep(args, h, _trotter_time(args, h), _state(args, h),
                                args.obs or "real")
    else:
        series = _qsp_sweep(args)[0]
    _emit(series.to_csv(), args.out)


def _read_series(path: Path) -> SweepSeries:
    return SweepSeries.from_csv(path.read_text(encoding="utf-8"))


def _fit_trotter(args) -> FitResult:
    t = args.time
    if args.series:
        series = [_read_series(p) for p in args.series]
        if t is None and args.time_qpe is None:
            t_ref = None
        else:
            t_ref = t if t is not None else _trotter_time(args, _hamiltonian(args))
    else:
        h = _hamiltonian(args)
        t_ref = _trotter_time(args, h)
        psi = _state(args, h)
        kinds = [args.obs] if args.obs else ["real", "imag"]
        series = [_trotter_sweep(args, h, t_ref, psi, k) for k in kinds]
    by_kind = {s.observable: s for s in series}
    if len(by_kind) != len(series):
        raise InputError("duplicate observable among the series")
    if set(by_kind) == {"real", "imag"} and args.obs is None:
        if t_ref is None:
            raise InputError("a combined trotter model needs --time")
        model, cost = trotter.fit_error_model(by_kind["real"], by_kind["imag"], t_ref)
        return model.to_fit_result(cost, by_kind["real"].grid)
    if len(series) != 1:
        raise InputError("give one series, or exactly one real and one imag series")
    kind = args.obs or series[0].observable
    return trotter.fit_trotter(series[0], kind, t_ref, args.fidelity_offset, args.seed,
                               args.restarts)


def _fit_qsp(args) -> FitResult:
    if args.series:
        if len(args.series) != 1:
            raise InputError("qsp fit takes a single series")
        series = _read_series(args.series[0])
        if args.ham is not None:
            _, t, delta, angles = _qsp_problem(args)
        else:
            t = args.time if args.time is not None else math.pi / 2
            delta = qsp.shift_to_phase(args.shift)
            angles = _qsp_angles(args)
    else:
        series, t, delta, angles = _qsp_sweep(args)
    model, cost = qsp.fit_qsp(series, angles, args.m, t, delta, args.seed, args.restarts)
    result = model.to_fit_result(cost, series.grid)
    result.extra.update({"seed": args.seed, "restarts": args.restarts})
    return result


def cmd_fit(args) -> None:
    result = _fit_trotter(args) if args.mode == "trotter" else _fit_qsp(args)
    _emit(result.to_json(), args.out)


def _load_model(args):
    fit = FitResult.from_json(args.model.read_text(encoding="utf-8"))
    if fit.model == "trotter":
        model = trotter.TrotterErrorModel.from_fit_result(fit)
        if args.time is not None:
            model = trotter.rescale_constants(model, args.time)
        return model
    if fit.model == "qsp":
        if args.time is not None:
            raise InputError("--time rescaling applies to trotter models only")
        return qsp.QspErrorModel.from_fit_result(fit)
    raise InputError(f"model {fit.model!r} carries no error law; fit a full "
                     "'trotter' (real + imag) or 'qsp' model")


def _qsp_angles(args) -> qsp.PhaseAngleSet:
    return qsp.load_phase_angles(args.angles) if args.angles else qsp.bundled_sign_angles()


def cmd_predict(args) -> None:
    model = _load_model(args)
    lines = ["param,predicted_error"]
    if isinstance(model, trotter.TrotterErrorModel):
        for n in args.range:
            lines.append(f"{n},{trotter.predict_err(model, n)!r}")
    else:
        angles = _qsp_angles(args)
        for d in args.range:
            if d in angles:
                lines.append(f"{d},{qsp.qsp_err_model(model, d, angles)!r}")
    _emit("\n".join(lines) + "\n", args.out)


def cmd_minparam(args) -> None:
    model = _load_model(args)
    if isinstance(model, trotter.TrotterErrorModel):
        n = trotter.min_trotter_number(model, args.epsilon, args.max_param)
    else:
        n = qsp.min_qsp_degree(model, args.epsilon, _qsp_angles(args))
    print("none" if n is None else n)


def cmd_oracle(args) -> None:
    h = _hamiltonian(args)
    psi = _state(args, h)
    if args.what == "overlaps":
        scale = _lambda_max(args, h) if args.normalize else 1.0
        pairs = oracle.eigen_overlaps(h, psi)
        doc = {"kind": "overlaps", "scale": scale,
               "pairs": [{"lambda": p.value / scale, "alpha": p.weight} for p in pairs]}
    else:
        if len(args.n_pair) != 2:
            raise InputError("--n-pair takes two integers")
        t = _trotter_time(args, h)
        c, e1, e2 = oracle.oracle_trotter_constants(h, t, psi, tuple(args.n_pair))
        doc = {"kind": "trotter", "t_ref": t, "n_pair": args.n_pair,
               "c": [c.real, c.imag], "e1": [e1.real, e1.imag], "e2": [e2.real, e2.imag]}
    _emit(json.dumps(doc, indent=2) + "\n", args.out)


COMMANDS = {"sweep": cmd_sweep, "fit": cmd_fit, "predict": cmd_predict,
            "minparam": cmd_minparam, "oracle": cmd_oracle}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (InputError, ValueError, KeyError, OSError, oracle.OracleError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"neeqma {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
