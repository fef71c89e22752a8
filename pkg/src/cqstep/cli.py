"""Command line entry point.

    cqstep run --preset table6.1 [--m 1..3 --Ns 200,400,800 ...]
    cqstep run --config experiments.ini --format csv --out tables/
    cqstep solve --case a --scheme corrected --k 7 --m 3 --N 800 --out u.csv
    cqstep symbols --family shifted --k 3
    cqstep oracle probe --family weighted --k 7
    cqstep oracle equivalence --case a --k 2 --m 1 --N 64

Exit status: 0 on success, 2 for configuration errors, 3 for solver errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from . import __version__
from .errors import ConfigError, ShapeError, SolverError
from .harness import (PRESETS, experiment_from_section, get_case, load_config, parse_ladder, preset_text,
                      render, resolve_precision, run_experiment)
from .oracle import DEFAULT_Q, DEFAULT_THETA, defect_probe, equivalence
from .spatial import laplacian_dirichlet
from .stepper import SchemeKind, build_plan, run
from .symbols import SchemeOrder, as_fraction, power_coeffs, shifted_coeffs, base_coeffs, weighted_coeffs

log = logging.getLogger("cqstep")

EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _override_args(p):
    p.add_argument("--case", choices=["a", "b", "star", "example21"])
    p.add_argument("--scheme", choices=[k.value for k in SchemeKind])
    p.add_argument("--k", help="step number(s), e.g. 7 or 1..7")
    p.add_argument("--m", help="smoothing order(s), e.g. 3 or 0..7")
    p.add_argument("--beta")
    p.add_argument("--Ns", dest="Ns", help="doubling ladder, e.g. 100,200,400")
    p.add_argument("--nodes", help="collocation intervals P")
    p.add_argument("--precision", help="double, auto, or a digit count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqstep", description="WSBDF convolution-quadrature time stepping")
    parser.add_argument("--version", action="version", version=f"cqstep {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="self-convergence tables")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="INI experiment file")
    src.add_argument("--preset", choices=PRESETS)
    _override_args(p)
    p.add_argument("--format", choices=["csv", "markdown"])
    p.add_argument("--out", help="output file, or directory when several experiments run")

    p = sub.add_parser("solve", help="single run; writes u^N at the nodes as CSV")
    _override_args(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--dump-smoothing", metavar="PATH", help="also write the F^n samples as CSV")

    p = sub.add_parser("symbols", help="print exact coefficient sequences")
    p.add_argument("--family", choices=["base", "shifted", "weighted"], default="base")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--beta", default="3")

    p = sub.add_parser("oracle", help="contour oracle and symbol probes")
    osub = p.add_subparsers(dest="oracle_command", required=True)
    q = osub.add_parser("probe", help="defect ratios on contour samples (CSV)")
    q.add_argument("--family", choices=["base", "shifted", "weighted"], default="weighted")
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--m", type=int, default=1)
    q.add_argument("--beta", default="3")
    q.add_argument("--taus", default="1e-2,1e-3,1e-4")
    q.add_argument("--Q", type=int, default=40)
    q.add_argument("--out")
    q = osub.add_parser("equivalence", help="contour solution against the stepper")
    _override_args(q)
    q.add_argument("--N", type=int, default=64)
    q.add_argument("--n", type=int, help="step to compare (default N)")
    q.add_argument("--theta", type=float, default=DEFAULT_THETA)
    q.add_argument("--kappa", type=float)
    q.add_argument("--Q", type=int, default=DEFAULT_Q)
    q.add_argument("--out")
    return parser


def _overrides(args) -> dict:
    keys = {"case": "case", "scheme": "scheme", "k": "k", "m": "m", "beta": "beta", "Ns": "Ns",
            "nodes": "nodes", "precision": "precision"}
    out = {dst: getattr(args, src) for src, dst in keys.items() if getattr(args, src, None) is not None}
    for extra in ("format", "out"):
        if getattr(args, extra, None) is not None:
            out[extra] = getattr(args, extra)
    return out


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_run(args) -> int:
    overrides = _overrides(args)
    out = overrides.pop("out", None)
    if args.config:
        experiments = load_config(args.config, overrides)
    elif args.preset:
        experiments = load_config(preset_text(args.preset), overrides)
    else:
        experiments = [experiment_from_section("cli", {}, overrides)]
    many = len(experiments) > 1
    if out and many:
        os.makedirs(out, exist_ok=True)
    for exp in experiments:
        table = run_experiment(exp, progress=_progress)
        text = render(table, exp.format)
        if out:
            ext = "csv" if exp.format == "csv" else "md"
            path = os.path.join(out, f"{exp.name}.{ext}") if many else out
        else:
            path = exp.out
        if many and path is None:
            sys.stdout.write(f"# {exp.name}\n")
        _write(text, path)
    return 0


def _progress(exp, row):
    log.info("[%s] row %s done (%s), rate %s", exp.name, row.key, row.precision,
             "n/a" if row.rate is None else f"{row.rate:.2f}")


def _single_order(args, default_k=7, default_m=0):
    try:
        k = int(args.k) if args.k is not None else default_k
        m = int(args.m) if args.m is not None else default_m
    except ValueError:
        raise ConfigError("--k and --m take a single integer here") from None
    return SchemeOrder(k, m, as_fraction(args.beta or "3"))


def cmd_solve(args) -> int:
    order = _single_order(args)
    kind = SchemeKind.parse(args.scheme or ("plain" if order.m == 0 else "corrected"))
    prec = resolve_precision(args.precision or "auto", order.m, kind)
    op = laplacian_dirichlet(int(args.nodes or 32), prec)
    problem = get_case(args.case or "a").problem()
    traj = run(problem, order, kind, args.N, op)
    nodes = prec.to_float(op.nodes)
    if args.out:
        traj.to_csv(args.out, nodes)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["x", "u"])
        for x, u in zip(nodes, traj.u):
            w.writerow([repr(float(x)), str(u)])
    if args.dump_smoothing:
        plan = build_plan(problem, order, kind, args.N, op)
        with open(args.dump_smoothing, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n"] + [repr(float(x)) for x in nodes])
            if plan.samples is not None:
                for n, row in enumerate(plan.samples.values):
                    w.writerow([n] + [str(v) for v in row])
    return 0


def cmd_symbols(args) -> int:
    beta = as_fraction(args.beta)
    if args.family == "weighted":
        seq = weighted_coeffs(args.k, beta)
    elif args.m == 1:
        seq = base_coeffs(args.k) if args.family == "base" else shifted_coeffs(args.k)
    else:
        seq = power_coeffs(args.k, args.m, args.family)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["j", "coefficient", "value"])
    for j, c in enumerate(seq):
        w.writerow([j, str(c), repr(c.numerator / c.denominator)])
    return 0


def cmd_probe(args) -> int:
    try:
        taus = [float(t) for t in args.taus.split(",") if t]
    except ValueError:
        raise ConfigError(f"bad --taus {args.taus!r}") from None
    rep = defect_probe(args.family, args.k, args.m, taus, as_fraction(args.beta), Q=args.Q)
    lines = [["tau", "z_re", "z_im", "defect", "ratio"]]
    lines += [[repr(t), repr(z.real), repr(z.imag), repr(d), repr(r)] for t, z, d, r in rep.samples]
    _write_csv(lines, args.out)
    for t, mx in zip(rep.taus, rep.max_ratio):
        log.info("tau=%g max ratio %.4g", t, mx)
    return 0


def cmd_equivalence(args) -> int:
    order = _single_order(args, default_k=2, default_m=1)
    kind = SchemeKind.parse(args.scheme or ("plain" if order.m == 0 else "corrected"))
    op = laplacian_dirichlet(int(args.nodes or 32))
    rep = equivalence(get_case(args.case or "a").problem(), order, kind, args.N, op, args.n,
                      theta=args.theta, kappa=args.kappa, Q=args.Q)
    _write_csv([["quantity", "value"]] + [[k, repr(v)] for k, v in rep.rows()], args.out)
    return 0


def _write_csv(rows, path):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    finally:
        if path:
            fh.close()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    handlers = {"run": cmd_run, "solve": cmd_solve, "symbols": cmd_symbols}
    try:
        if args.command == "oracle":
            return cmd_probe(args) if args.oracle_command == "probe" else cmd_equivalence(args)
        return handlers[args.command](args)
    except (ConfigError, ShapeError) as exc:
        print(f"cqstep: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"cqstep: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"cqstep: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
