"""Command-line interface.

Every CSV starts with ``#`` comment lines naming the tool version, the command,
the seed and all parameters, so identical invocations give identical bytes.
Failures print a JSON object ``{"error", "message", "exit_code"}`` on stderr and
exit with the code of the error class (see ``retrodict.errors``).

Frozen CSV columns:

    witness ck        sample_index,k,running_max
    witness scatter   sample_index,class,f
    witness gap       p,q,delta,raw_delta,c0,c2,stderr
    cv phase-space    radius,value,closed_form,abs_err,trusted
    cv variance       s,phi,n_max,variance
    probs             setting,outcome,probability
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings

import numpy as np

from . import __version__
from .errors import RetrodictError
from .operators import load_operator
from .retrodiction import PastState, Povm, probability_table
from .reduced import marginal_criteria, negativity_witness, xi_from_past

EXIT_IO = 2


class CliError(RetrodictError):
    exit_code = EXIT_IO


def _header(command: str, params: dict) -> list[str]:
    lines = [f"# retrodict {__version__}", f"# command: {command}"]
    lines += [f"# {k}: {v}" for k, v in params.items()]
    return lines


def _emit(text: str, out: str | None):
    if out and out != "-":
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _table(command, params, columns, rows, fmt, out):
    if fmt == "json":
        payload = {
            "tool": f"retrodict {__version__}",
            "command": command,
            "params": params,
            "columns": list(columns),
            "rows": [list(r) for r in rows],
        }
        _emit(json.dumps(payload, indent=1) + "\n", out)
        return
    buf = io.StringIO()
    buf.write("\n".join(_header(command, params)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    _emit(buf.getvalue(), out)


def _load_povms(path) -> list[Povm]:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        from .errors import SchemaError

        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if isinstance(payload, dict) and "povms" in payload:
        items = payload["povms"]
        return [Povm.from_json(p, where=f"{path}.povms[{i}]") for i, p in enumerate(items)]
    return [Povm.from_json(payload, where=str(path))]


def _load_past(args) -> PastState:
    rho = load_operator(args.rho, require_hermitian=True)
    eff = load_operator(args.effect, require_hermitian=True)
    return PastState(rho, eff)


# -- subcommands ---------------------------------------------------------------

def cmd_probs(args):
    past = _load_past(args)
    povms = _load_povms(args.povm)
    table = probability_table(past, povms)
    rows = [
        (table.labels[a] or str(a), m, float(p))
        for a, row in enumerate(table.probs)
        for m, p in enumerate(row)
    ]
    params = {"rho": args.rho, "effect": args.effect, "povm": args.povm}
    _table("probs", params, ("setting", "outcome", "probability"), rows, args.format, args.out)


def cmd_xi(args):
    past = _load_past(args)
    xi = xi_from_past(past)
    wit = negativity_witness(xi)
    tr = xi.xi.trace()
    payload = {
        "lambda_min": wit.lambda_min,
        "nonseparable": wit.nonseparable,
        "marginal_lambda_mins": list(marginal_criteria(xi)),
        "trace": [tr.real, tr.imag],
    }
    _emit(json.dumps(payload, indent=1) + "\n", args.out)


def cmd_witness_ck(args):
    from .witness import MAX_PROB_SUM, PAULI_ABS_SUM, estimate_ck, mub_suite, pauli_suite

    if args.d == 4:
        suite, wfn = mub_suite(), MAX_PROB_SUM
    elif args.d == 2:
        suite, wfn = pauli_suite(), PAULI_ABS_SUM
    else:
        raise CliError(f"no measurement suite for d={args.d}; use 2 (Pauli) or 4 (MUB)")
    rows, skipped = [], {}
    for k in range(1, args.kmax + 1):
        est = estimate_ck(wfn, suite, args.d, k, args.samples, args.seed, args.strategy)
        rows += [(i, k, v) for i, v in est.trace]
        skipped[k] = est.skipped
    params = {
        "seed": args.seed,
        "samples": args.samples,
        "d": args.d,
        "kmax": args.kmax,
        "strategy": args.strategy,
        "witness": wfn.kind,
        "suite": suite.label,
        "skipped": " ".join(f"k{k}={n}" for k, n in skipped.items()),
    }
    _table("witness ck", params, ("sample_index", "k", "running_max"), rows, args.format, args.out)


def cmd_witness_scatter(args):
    from .witness import scatter_samples

    rows = scatter_samples(args.samples, args.seed)
    params = {"seed": args.seed, "samples": args.samples, "witness": "PauliAbsSum", "suite": "pauli"}
    _table("witness scatter", params, ("sample_index", "class", "f"), rows, args.format, args.out)


def cmd_witness_gap(args):
    from .witness import detection_gap

    grid = np.linspace(0.0, 1.0, args.grid)
    rows = []
    for p in grid:
        for q in grid:
            g = detection_gap(float(p), float(q), args.samples, args.seed, args.strategy)
            rows.append((float(p), float(q), g.delta, g.raw_delta, g.c0, g.c2, g.stderr))
    params = {"seed": args.seed, "samples": args.samples, "grid": args.grid, "strategy": args.strategy}
    cols = ("p", "q", "delta", "raw_delta", "c0", "c2", "stderr")
    _table("witness gap", params, cols, rows, args.format, args.out)


def cmd_cv_phase_space(args):
    from .cv import (
        husimi,
        husimi_closed,
        in_trusted_region,
        wigner,
        wigner_closed,
        xi_diag,
    )

    sign = "alternating" if args.which == "xi" else "plain"
    op = xi_diag(args.nbar, sign, args.nmax)
    radii = np.linspace(0.0, args.rmax, args.points)
    fn, closed = (husimi, husimi_closed) if args.kind == "husimi" else (wigner, wigner_closed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values = fn(op, radii)
    ref = closed(args.nbar, args.which, radii)
    trusted = in_trusted_region(radii, args.nmax)
    rows = [
        (float(r), float(v), float(c), float(abs(v - c)), int(t))
        for r, v, c, t in zip(radii, values, ref, trusted)
    ]
    params = {
        "nbar": args.nbar,
        "kind": args.kind,
        "which": args.which,
        "rmax": args.rmax,
        "points": args.points,
        "nmax": args.nmax,
    }
    cols = ("radius", "value", "closed_form", "abs_err", "trusted")
    _table("cv phase-space", params, cols, rows, args.format, args.out)


def cmd_cv_variance(args):
    from .cv import guard_nmax, past_quadrature_variance

    s_list = [float(s) for s in args.s_list.split(",") if s.strip()]
    phis = [float(p) for p in args.phi.split(",") if p.strip()]
    rows = []
    for s in s_list:
        n = guard_nmax(s, args.nmax)
        for phi in phis:
            rows.append((s, phi, n, past_quadrature_variance(s, phi, n)))
    params = {"s_list": args.s_list, "phi": args.phi, "nmax": args.nmax or "auto"}
    _table("cv variance", params, ("s", "phi", "n_max", "variance"), rows, args.format, args.out)


def cmd_fixtures(args):
    from .fixtures import write_fixture_files

    for p in write_fixture_files(args.out):
        print(p)


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retrodict", description="Past-state retrodiction toolkit")
    parser.add_argument("--version", action="version", version=f"retrodict {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stochastic=False, samples=10**4):
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if stochastic:
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--samples", type=int, default=samples)

    p = sub.add_parser("probs", help="retrodicted outcome probabilities")
    p.add_argument("--rho", required=True)
    p.add_argument("--effect", required=True)
    p.add_argument("--povm", required=True, help="POVM JSON, or {'povms': [...]}")
    common(p)
    p.set_defaults(func=cmd_probs)

    p = sub.add_parser("xi", help="reduced past state diagnostics (JSON)")
    p.add_argument("--rho", required=True)
    p.add_argument("--effect", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_xi)

    w = sub.add_parser("witness", help="dimension witnesses").add_subparsers(dest="action", required=True)
    p = w.add_parser("ck", help="running-max estimates of c_k")
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--kmax", type=int, default=4)
    p.add_argument("--strategy", choices=("state-and-effect", "effect-only"), default="state-and-effect")
    common(p, stochastic=True, samples=10**5)
    p.set_defaults(func=cmd_witness_ck)
    p = w.add_parser("scatter", help="witness values of random past states")
    common(p, stochastic=True, samples=10**3)
    p.set_defaults(func=cmd_witness_scatter)
    p = w.add_parser("gap", help="detection gap over a (p, q) grid")
    p.add_argument("--grid", type=int, default=11)
    p.add_argument("--strategy", choices=("state-and-effect", "effect-only"), default="effect-only")
    common(p, stochastic=True)
    p.set_defaults(func=cmd_witness_gap)

    c = sub.add_parser("cv", help="continuous-variable past states").add_subparsers(dest="action", required=True)
    p = c.add_parser("phase-space", help="Husimi or Wigner function against closed forms")
    p.add_argument("--nbar", type=float, required=True)
    p.add_argument("--kind", choices=("husimi", "wigner"), default="wigner")
    p.add_argument("--which", choices=("xi", "thermal"), default="xi")
    p.add_argument("--rmax", type=float, default=3.0)
    p.add_argument("--points", type=int, default=31)
    p.add_argument("--nmax", type=int, default=40)
    common(p)
    p.set_defaults(func=cmd_cv_phase_space)
    p = c.add_parser("variance", help="retrodicted quadrature variance of squeezed past states")
    p.add_argument("--s-list", default="0,0.4,0.8,1.2")
    p.add_argument("--phi", default="0")
    p.add_argument("--nmax", type=int, default=None, help="default: smallest value passing the guard")
    common(p)
    p.set_defaults(func=cmd_cv_variance)

    p = sub.add_parser("fixtures", help="write the fixture JSON files to a directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixtures)
    return parser


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except RetrodictError as exc:
        return _fail(exc, exc.exit_code)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    except ValueError as exc:
        return _fail(exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
