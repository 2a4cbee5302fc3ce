"""Command-line driver.

Exit codes: 0 success, 2 bad parameters or input, 3 convergence or
structural failure, 4 regime or size guard.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager

from . import analysis, approx, bethe, fock
from .errors import BHDimerError, NoConvergence, ParameterError, SizeGuard, StructureViolation
from .exact import format_float, reduced_spectrum, spectrum_trace, write_spectrum_csv
from .model import PhysicalParams, ReducedParams, load_params, map_energy_to_physical, reduce

REDUCED_FLAGS = ("c", "delta")
PHYSICAL_FLAGS = ("epsilon", "j", "u", "v")

EXIT_OK = 0
EXIT_PARAM = 2
EXIT_CONVERGENCE = 3


# ---------------------------------------------------------------------------
# argument handling


def _add_param_flags(p: argparse.ArgumentParser, with_n: bool = True) -> None:
    g = p.add_argument_group("parameters (reduced or physical, not both)")
    g.add_argument("--c", type=float, help="reduced coupling c > 0")
    g.add_argument("--delta", type=float, help="reduced bias delta")
    if with_n:
        g.add_argument("--n", type=int, help="particle number N")
    g.add_argument("--epsilon", type=float, help="site bias epsilon")
    g.add_argument("--j", type=float, help="tunneling J")
    g.add_argument("--u", type=float, help="on-site interaction U")
    g.add_argument("--v", type=float, help="inter-site interaction V")
    g.add_argument("--params", metavar="PATH", help="JSON parameter file")


def _add_io_flags(p: argparse.ArgumentParser, default_format: str) -> None:
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=default_format)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-10, help="solver residual tolerance")
    p.add_argument("--max-iter", type=int, default=200, help="Newton iteration cap")


def _given(args, names) -> list[str]:
    return [n for n in names if getattr(args, n, None) is not None]


def params_from_args(args, require_n: bool = True):
    """Build PhysicalParams or ReducedParams from flags or --params."""
    reduced = _given(args, REDUCED_FLAGS)
    physical = _given(args, PHYSICAL_FLAGS)
    if getattr(args, "params", None):
        if reduced or physical or getattr(args, "n", None) is not None:
            raise ParameterError("--params cannot be combined with parameter flags")
        return load_params(args.params)
    if reduced and physical:
        raise ParameterError("reduced (--c/--delta) and physical (--epsilon/--j/--u/--v) flags are mutually exclusive")
    if require_n and args.n is None:
        raise ParameterError("--n is required")
    if reduced:
        missing = [f"--{n}" for n in REDUCED_FLAGS if getattr(args, n) is None]
        if missing:
            raise ParameterError(f"missing {', '.join(missing)}")
        return ReducedParams(args.c, args.delta, args.n)
    if physical:
        missing = [f"--{n}" for n in PHYSICAL_FLAGS if getattr(args, n) is None]
        if missing:
            raise ParameterError(f"missing {', '.join(missing)}")
        return PhysicalParams(args.epsilon, args.j, args.u, args.v, args.n)
    raise ParameterError("no parameters given")


def _reduced(params) -> ReducedParams:
    return reduce(params) if isinstance(params, PhysicalParams) else params


def _options(args) -> bethe.SolverOptions:
    if not args.tol > 0:
        raise ParameterError("--tol must be positive")
    if args.max_iter < 1:
        raise ParameterError("--max-iter must be positive")
    return bethe.SolverOptions(tol=args.tol, max_iter=args.max_iter)


@contextmanager
def _output(path):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
    else:
        yield sys.stdout


def _write_json(args, payload) -> None:
    with _output(args.out) as fh:
        fh.write(json.dumps(payload, indent=2) + "\n")


def _params_dict(params) -> dict:
    if isinstance(params, PhysicalParams):
        return {"epsilon": params.epsilon, "J": params.J, "U": params.U, "V": params.V, "N": params.N}
    return {"c": params.c, "delta": params.delta, "N": params.N}


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(args) -> int:
    params = params_from_args(args)
    r = _reduced(params)
    spec = reduced_spectrum(r)
    if args.format == "csv":
        with _output(args.out) as fh:
            write_spectrum_csv(fh, params, spec)
        return EXIT_OK
    payload = {"params": _params_dict(params), "energies": spec.energies.tolist(),
               "trace": {"sum_energy": float(spec.energies.sum()), "sum_diag": spectrum_trace(r)}}
    if isinstance(params, PhysicalParams):
        payload["physical_energies"] = map_energy_to_physical(spec.energies, params).tolist()
    _write_json(args, payload)
    return EXIT_OK


def cmd_bethe(args) -> int:
    params = params_from_args(args)
    r = _reduced(params)
    opts = _options(args)
    solve = bethe.solve_ground if args.sigma == 0 else bethe.solve_first_excited
    try:
        state = solve(r, opts)
    except NoConvergence as exc:
        report = {"error": type(exc).__name__, "message": str(exc),
                  "trace": [list(step) for step in exc.trace]}
        print(json.dumps(report, indent=2), file=sys.stderr)
        return exc.exit_code
    E = state.energy
    exact = float(reduced_spectrum(r).energies[args.sigma])
    comparison = {"bethe": E, "exact": exact,
                  "relative_difference": (E - exact) / exact if exact else None}
    if isinstance(params, PhysicalParams):
        comparison["physical_bethe"] = float(map_energy_to_physical(E, params))
        comparison["physical_exact"] = float(map_energy_to_physical(exact, params))
    if args.format == "csv":
        with _output(args.out) as fh:
            fh.write("j,re,im\n")
            for j, z in enumerate(state.roots):
                fh.write(f"{j},{format_float(z.real)},{format_float(z.imag)}\n")
        return EXIT_OK
    payload = bethe.state_to_dict(state)
    payload["energy"] = comparison
    payload["diagnostics"] = bethe.validate_state(state, opts.tol).as_dict()
    _write_json(args, payload)
    return EXIT_OK


def _approx_ids(params, requested) -> list[str]:
    if requested:
        return list(requested)
    ids = ["G_RED", "G_RED_TELESCOPED", "E1_RED_SMALL", "E1_RED_LARGE"]
    if isinstance(params, PhysicalParams):
        ids += ["G_PHYS", "E1_PHYS_SMALL", "E1_PHYS_LARGE"]
    return ids


def cmd_approx(args) -> int:
    params = params_from_args(args)
    r = _reduced(params)
    rows = []
    for fid in _approx_ids(params, args.formula):
        if fid not in approx.FORMULAS:
            raise ParameterError(f"unknown formula {fid!r}")
        if "_PHYS" in fid and not isinstance(params, PhysicalParams):
            raise ParameterError(f"{fid} needs physical parameters")
        est = approx.FORMULAS[fid](params if "_PHYS" in fid else r)
        rows.append(est)
    regime = approx.regime(r).value
    if args.format == "csv":
        with _output(args.out) as fh:
            fh.write("formula_id,value,in_regime\n")
            for est in rows:
                fh.write(f"{est.formula_id},{format_float(est.value)},{int(est.in_validity_regime)}\n")
        return EXIT_OK
    payload = {"params": _params_dict(params), "regime": regime,
               "estimates": [{"formula_id": e.formula_id, "value": e.value,
                              "in_regime": e.in_validity_regime} for e in rows]}
    if regime == approx.Regime.SMALL_C.value:
        payload["lambda_linear"] = approx.lambda_linear(r)
    _write_json(args, payload)
    return EXIT_OK


def sweep_spec_from_args(args) -> analysis.SweepSpec:
    if args.spec:
        spec = analysis.load_sweep_spec(args.spec)
        if args.workers is not None:
            spec = analysis.SweepSpec(spec.axis, spec.values, spec.fixed, spec.formulas, spec.output, args.workers)
        return spec
    if args.axis is None:
        raise ParameterError("give --spec or --axis with a range")
    if args.values:
        grid = [float(v) for v in args.values.split(",")]
    elif args.start is not None and args.stop is not None and (args.step or args.count):
        rng = {"start": args.start, "stop": args.stop}
        rng.update({"step": args.step} if args.step else {"count": args.count})
        grid = analysis.grid_values(rng)
    else:
        raise ParameterError("give --values or --start/--stop with --step or --count")
    names = {"c": "c", "delta": "delta", "n": "N", "epsilon": "epsilon", "j": "J", "u": "U", "v": "V"}
    fixed = {names[k]: getattr(args, k) for k in names if getattr(args, k) is not None}
    reduced = [k for k in ("c", "delta") if k in fixed]
    physical = [k for k in ("epsilon", "J", "U", "V") if k in fixed]
    if reduced and physical:
        raise ParameterError("reduced and physical flags are mutually exclusive")
    formulas = args.formula or (["G_RED"] if not physical and args.axis != "U" else ["G_PHYS"])
    return analysis.SweepSpec(args.axis, tuple(grid), fixed, tuple(formulas), args.out, args.workers or 1)


def cmd_sweep(args) -> int:
    spec = sweep_spec_from_args(args)
    records = analysis.run_sweep(spec)
    out = args.out or spec.output
    with _output(out) as fh:
        if args.format == "csv":
            analysis.write_sweep_csv(fh, records)
        else:
            rows = [dict(zip(analysis.CSV_COLUMNS, rec.row())) for rec in records]
            fh.write(json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


def cmd_fit_alpha(args) -> int:
    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            records = analysis.read_sweep_csv(fh)
    else:
        records = analysis.run_sweep(sweep_spec_from_args(args))
    fits = analysis.fit_alpha_by_formula(records)
    cols = ("formula_id", "alpha", "amplitude", "residual", "n_points", "n_excluded")
    if args.format == "csv":
        with _output(args.out) as fh:
            fh.write(",".join(cols) + "\n")
            for fid, fit in fits.items():
                fh.write(f"{fid},{format_float(fit.alpha)},{format_float(fit.amplitude)},"
                         f"{format_float(fit.residual)},{fit.n_points},{fit.n_excluded}\n")
        return EXIT_OK
    _write_json(args, [fit.as_dict() for fit in fits.values()])
    return EXIT_OK


def cmd_fock_expect(args) -> int:
    params = params_from_args(args)
    r = _reduced(params)
    opts = _options(args)
    if r.N > args.max_n:
        raise SizeGuard(f"N={r.N} exceeds the Fock size guard {args.max_n}")
    A = fock.observable_matrix(args.observable, r)
    spec = reduced_spectrum(r, want_vectors=True)
    # eigenvectors are indexed by b-occupation; the Fock basis by a-occupation
    vec = spec.amplitudes[::-1, args.sigma]
    exact = float(vec @ A @ vec)
    solve = bethe.solve_ground if args.sigma == 0 else bethe.solve_first_excited
    state = solve(r, opts)
    solved = fock.expectation(state, A, args.max_n)
    payload = {"params": _params_dict(params), "observable": args.observable, "sigma": args.sigma,
               "exact": exact, "bethe": solved,
               "bethe_relative_difference": (solved - exact) / exact if exact else None}
    if args.sigma == 0:
        equi = bethe.BetheState(bethe.equidistant_init(r), 0, r, math.nan)
        try:
            approx_value = fock.expectation(equi, A, args.max_n)
        except BHDimerError as exc:
            approx_value = None
            payload["equidistant_error"] = type(exc).__name__
        payload["equidistant"] = approx_value
        if approx_value is not None and exact:
            payload["equidistant_relative_difference"] = (approx_value - exact) / exact
    for path, expand in ((args.dump_ket, fock.ket_expansion), (args.dump_bra, fock.bra_expansion)):
        if path:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fock.write_fock_csv(fh, expand(state, args.max_n))
    if args.format == "csv":
        with _output(args.out) as fh:
            fh.write("source,value\n")
            for key in ("exact", "bethe", "equidistant"):
                if payload.get(key) is not None:
                    fh.write(f"{key},{format_float(payload[key])}\n")
        return EXIT_OK
    _write_json(args, payload)
    return EXIT_OK


def cmd_validate(args) -> int:
    state = bethe.load_state(args.state)
    report = bethe.validate_state(state, args.tol)
    payload = report.as_dict()
    try:
        E = state.energy
        exact = float(reduced_spectrum(state.params).energies[state.sigma]) if 0 <= state.sigma <= state.params.N else None
        payload["energy"] = {"bethe": E, "exact": exact}
    except BHDimerError as exc:
        payload["energy"] = {"error": type(exc).__name__, "message": str(exc)}
    _write_json(args, payload)
    if not report.passed:
        raise StructureViolation(f"failed checks: {', '.join(report.failed())}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhdimer", description="Two-site Bose-Hubbard spectra, Bethe roots and closed-form energies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="exact spectrum by diagonalization")
    _add_param_flags(p)
    _add_io_flags(p, "csv")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("bethe", help="solve the Bethe equations for the ground or first excited state")
    _add_param_flags(p)
    _add_solver_flags(p)
    _add_io_flags(p, "json")
    p.add_argument("--sigma", type=int, choices=(0, 1), default=0)
    p.set_defaults(func=cmd_bethe)

    p = sub.add_parser("approx", help="closed-form energy estimates")
    _add_param_flags(p)
    _add_io_flags(p, "csv")
    p.add_argument("--formula", action="append", help="formula id (repeatable); default: all applicable")
    p.set_defaults(func=cmd_approx)

    for name, func, help_text in (("sweep", cmd_sweep, "relative-error sweep of closed forms"),
                                  ("fit-alpha", cmd_fit_alpha, "power-law decay exponent of the relative error")):
        p = sub.add_parser(name, help=help_text)
        _add_param_flags(p)
        _add_io_flags(p, "csv")
        p.add_argument("--spec", metavar="PATH", help="JSON sweep specification")
        p.add_argument("--axis", choices=analysis.AXES)
        p.add_argument("--values", help="comma-separated axis values")
        p.add_argument("--start", type=float)
        p.add_argument("--stop", type=float)
        p.add_argument("--step", type=float)
        p.add_argument("--count", type=int)
        p.add_argument("--formula", action="append", help="formula id (repeatable)")
        p.add_argument("--workers", type=int, help="worker processes (output is identical for any count)")
        if name == "fit-alpha":
            p.add_argument("--input", metavar="PATH", help="sweep CSV to fit instead of running a sweep")
        p.set_defaults(func=func)

    p = sub.add_parser("fock-expect", help="expectation value via the Fock expansion of Bethe vectors")
    _add_param_flags(p)
    _add_solver_flags(p)
    _add_io_flags(p, "json")
    p.add_argument("--observable", choices=fock.OBSERVABLES, default="a_bdag")
    p.add_argument("--sigma", type=int, choices=(0, 1), default=0)
    p.add_argument("--max-n", type=int, default=fock.DEFAULT_MAX_N, help="Fock size guard")
    p.add_argument("--dump-ket", metavar="PATH", help="write ket coefficients as CSV")
    p.add_argument("--dump-bra", metavar="PATH", help="write bra coefficients as CSV")
    p.set_defaults(func=cmd_fock_expect)

    p = sub.add_parser("validate", help="structural checks of a saved Bethe state")
    p.add_argument("state", metavar="STATE_JSON")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("json",), default="json")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BHDimerError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
