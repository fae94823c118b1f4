"""Command-line entry point ``amalgam``.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
import time

import numpy as np

from .errors import NumericalError, ReportIOError, ValidationError
from .fileio import (CONFIG_SCHEMA, fmt, inflation_config, parse_config, plot_report,
                     read_field_csv, read_report_csv, serialize_config, write_field_csv,
                     write_manifest, write_report)
from .spectral import DataPair, SpectralField

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _space(args):
    from .norms import SpaceSpec
    return SpaceSpec(args.family, args.p, args.q, args.s)


def _load_pair(u0_path, u1_path):
    u0 = read_field_csv(u0_path)
    u1 = read_field_csv(u1_path, u0.grid) if u1_path else SpectralField.zeros(u0.grid)
    return DataPair(u0, u1)


def _problem(args, grid):
    from .engine import NlwProblem
    return NlwProblem(args.sigma, args.rho, args.sign, grid)


def cmd_norm(args) -> int:
    from .norms import norm, restricted_norm
    f = read_field_csv(args.input)
    spec = _space(args)
    if args.n0 is not None:
        value = restricted_norm(f, spec, [int(v) for v in args.n0.split(",")])
    else:
        value = norm(f, spec)
    if args.json:
        print(json.dumps({"family": spec.family.value, "p": spec.p, "q": spec.q,
                          "s": spec.s, "value": value}))
    else:
        print(fmt(value))
    return EXIT_OK


def _iterate_table(series, out):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["k", "fl1_norm", "norm", "support_size"])
    for k in range(1, series.kmax + 1):
        w.writerow([k, fmt(series.fl1_norms[k]), fmt(series.norms.get(k, float("nan"))),
                    fmt(series.support_sizes[k])])


def _mesh(args):
    from .quadrature import TimeMesh
    return TimeMesh(args.quadrature, args.mesh_nodes)


def cmd_picard(args) -> int:
    from .engine import default_kmax, picard_iterates
    pair = _load_pair(args.input, args.u1)
    prob = _problem(args, pair.grid)
    kmax = args.kmax or default_kmax(prob.sigma)
    series = picard_iterates(pair, prob, kmax, args.T, _mesh(args), spec=_space(args))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "iterates.csv"), "w", newline="", encoding="utf-8") as fh:
            _iterate_table(series, fh)
        write_field_csv(series.partial_sum(), os.path.join(args.out, "field.csv"))
    else:
        _iterate_table(series, sys.stdout)
    return EXIT_OK


def cmd_solve(args) -> int:
    from .engine import solve_fixed_point, solve_series
    pair = _load_pair(args.input, args.u1)
    prob = _problem(args, pair.grid)
    if args.method == "series":
        res = solve_series(pair, prob, args.T, args.tol, args.kmax, _mesh(args))
        field, tail = res.solution, res.tail_bound
    else:
        field = solve_fixed_point(pair, prob, args.T, args.tol, args.itermax, _mesh(args))
        tail = float("nan")
    from .norms import fl_norm
    print(f"fl1_norm: {fmt(fl_norm(field, 1, 0))}")
    print(f"tail_bound: {fmt(tail)}")
    if args.out:
        write_field_csv(field, args.out)
        print(f"field: {args.out}")
    return EXIT_OK


def cmd_inflate(args) -> int:
    from .inflation import run_inflation
    overrides = {k: getattr(args, k) for k in CONFIG_SCHEMA if getattr(args, k, None) is not None}
    if args.no_plot:
        overrides["plot"] = "false"
    cfg = parse_config(args.config, overrides, command="inflate")
    u0 = None
    if cfg["u0"] != "zero" or cfg["u1"] != "zero":
        if cfg["u0"] == "zero":
            u1 = read_field_csv(cfg["u1"])
            u0 = DataPair(SpectralField.zeros(u1.grid), u1)
        else:
            u0 = _load_pair(cfg["u0"], None if cfg["u1"] == "zero" else cfg["u1"])
    start = time.perf_counter()
    report = run_inflation(u0, inflation_config(cfg))
    files = write_report(report, args.out, plot=cfg["plot"], command=" ".join(sys.argv),
                         extra={"config_text": serialize_config(cfg).strip(),
                                "total_time_s": fmt(time.perf_counter() - start)})
    for f in files:
        print(f)
    failed = sum(1 for r in report.records if r.error)
    return EXIT_NUMERIC if failed == len(report.records) and failed else EXIT_OK


def cmd_verify(args) -> int:
    from .battery import run_battery
    results = run_battery(args.seed)
    width = max(len(r["name"]) for r in results)
    for r in results:
        print(f"{r['name']:<{width}}  {'PASS' if r['ok'] else 'FAIL'}  {r['detail']}")
    return EXIT_OK if all(r["ok"] for r in results) else EXIT_NUMERIC


def cmd_report(args) -> int:
    path = os.path.join(args.dir, "report.csv")
    rows = read_report_csv(path)
    cols = ["N", "theta", "pert_norm", "restricted_L", "ratio_L", "sol_norm", "dominance"]
    print(",".join(cols))
    for r in rows:
        print(",".join(r[c] for c in cols))
    if args.plot and rows:
        print(plot_report(rows, os.path.join(args.dir, "plot.svg")))
    return EXIT_OK


def _add_space(p, s_default=0.0):
    p.add_argument("--family", default="FourierAmalgam")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--s", type=float, default=s_default)


def _add_problem(p):
    p.add_argument("--input", required=True, help="u0 field CSV")
    p.add_argument("--u1", default=None, help="u1 field CSV (default zero)")
    p.add_argument("--sigma", type=int, default=3)
    p.add_argument("--rho", type=int, default=3)
    p.add_argument("--sign", type=int, default=1)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--mesh-nodes", type=int, default=None)
    p.add_argument("--quadrature", default="chebyshev")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amalgam", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="norm of a field")
    _add_space(p)
    p.add_argument("--input", required=True)
    p.add_argument("--n0", default=None, help="restrict to one cube, e.g. 1 or 1,0")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("picard", help="Picard iterate table")
    _add_problem(p)
    _add_space(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_picard)

    p = sub.add_parser("solve", help="solve the integral equation")
    _add_problem(p)
    p.add_argument("--method", choices=["series", "fixed-point"], default="series")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--itermax", type=int, default=100)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("inflate", help="norm inflation sweep")
    p.add_argument("--config", default=None)
    for key in ("s", "sigma", "rho", "sign", "delta", "m", "family", "p", "q", "d",
                "domain", "mesh", "kmax", "threshold", "quadrature", "u0", "u1"):
        p.add_argument(f"--{key}", default=None)
    p.add_argument("--theta", default=None, help="comma list")
    p.add_argument("--N", default=None, help="comma list")
    p.add_argument("--out", required=True)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_inflate)

    p = sub.add_parser("verify-lemmas", help="run the oracle battery")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="summarise an inflate output directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--plot", action="store_true", help="re-render plot.svg")
    p.set_defaults(func=cmd_report)
    return ap


_NEGATIVE = re.compile(r"^-[0-9.]")


def _join_negative_values(argv):
    # argparse reads "--theta -0.4,1" as two options; glue such values on with "="
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    try:
        return args.func(args)
    except ReportIOError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
