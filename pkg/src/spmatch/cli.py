"""Command-line entry point: ``spmatch <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 infeasible model or failed audit,
3 size gate.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from . import MODEL_FORMAT_VERSION, __version__
from .audit import (
    AuditSizeError,
    DEFAULT_TOL,
    EXHAUSTIVE_LIMIT,
    check_anonymous,
    check_nonwasteful,
    check_strategyproof,
    check_symmetric,
    evaluate_objectives,
    exceeds_exhaustive_limit,
)
from .lpmodel import LpSizeError, ModelError, build_ip, build_lp, export_mps, extract_mechanism, import_solution, write_solution
from .matching import MatchingError, total_violation, waste
from .mechanisms import MechanismError, parse_mechanism
from .prefs import ProfileError, build_orbit_table, decode, format_profile, parse_profile, profile_count
from .sim import SimConfig, parse_range, run_comparison, split_descriptors, summarize, write_aggregate, write_plot_data, write_records
from .solver import SolverError, solve

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_SIZE = 0, 1, 2, 3

# Reference rows: (average stv, worst-case stv, average waste); None where not reported.
REFERENCE = {
    3: [
        ("SD", "sd:s1,s2,s3", (0.6666, 3.0, None)),
        ("Alg2", "alg2", (0.4166, 2.0, None)),
        ("RSD1", "rsd1", (0.6478, 1.3333, 0.0)),
        ("RSD2", "rsd2", (0.6229, 1.3333, 0.0)),
        ("Alg2'", "sym(anon(alg2))", (0.4063, 1.6666, 0.0)),
    ],
    2: [
        ("Alg1", "alg1", (0.0, 0.0, 0.0)),
        ("SD", "sd:s1,s2", (None, None, None)),
        ("RSD1", "rsd1", (None, None, None)),
        ("RSD2", "rsd2", (None, None, None)),
    ],
}
LP_REFERENCE = {
    3: [
        ("Obj. A", "A", False, (0.2286, 0.6224, 0.0249)),
        ("Obj. A, nonwasteful", "A", True, (0.2348, 0.6455, 0.0)),
        ("Obj. B", "B", False, (0.4218, 0.5, 0.0505)),
        ("Obj. B, nonwasteful", "B", True, (0.3730, 0.5, 0.0)),
    ],
    2: [
        ("Obj. A", "A", False, (0.0, 0.0, 0.0)),
        ("Obj. B", "B", False, (0.0, 0.0, 0.0)),
    ],
}


class UsageError(Exception):
    pass


def _market(args) -> tuple[int, int]:
    m = args.m if args.m is not None else args.n
    if args.n < 1 or m < 1:
        raise UsageError("market sides must be positive")
    return args.n, m


def _size_gate(args, n, m) -> None:
    if exceeds_exhaustive_limit(n, m) and not args.force_sampled:
        raise AuditSizeError(f"{n}x{m} market exceeds {EXHAUSTIVE_LIMIT} profiles; use --force-sampled")


# --- commands -------------------------------------------------------------

def cmd_enumerate(args) -> int:
    n, m = _market(args)
    try:
        total = profile_count(n, m)
    except OverflowError as exc:
        raise AuditSizeError(str(exc)) from None
    print(f"profiles: {total}")
    if args.orbits:
        _size_gate(args, n, m)
        table = build_orbit_table(n, m, args.symmetry)
        print(f"orbit representatives: {len(table.reps)} (group order {table.group_order})")
    for i in range(args.start, min(total, args.start + args.limit)):
        print(f"{i}\t{format_profile(decode(i, n, m))}")
    return EXIT_OK


def cmd_eval(args) -> int:
    mech = parse_mechanism(args.mech)
    if args.profile:
        m = args.m if args.m is not None else args.n
        p = parse_profile(args.profile, args.n, m)
        r = mech(p)
        print(f"profile: {format_profile(p)}")
        for s in range(p.n):
            print("  " + " ".join(f"{x:.4f}" for x in r[s]))
        print(f"stv={total_violation(r, p):.6f} waste={waste(r):.6f}")
        return EXIT_OK
    if args.n is None:
        raise UsageError("eval needs --profile or --n")
    n, m = _market(args)
    _size_gate(args, n, m)
    o = evaluate_objectives(mech, n, m)
    print(f"{mech.name}: average_stv={o.average_stv:.6f} worst_stv={o.worst_stv:.6f} "
          f"average_waste={o.average_waste:.6f} worst_profile={o.argmax}")
    return EXIT_OK


def cmd_audit(args) -> int:
    mech = parse_mechanism(args.mech)
    n, m = _market(args)
    sampled = args.sampled
    if exceeds_exhaustive_limit(n, m):
        if not args.force_sampled:
            raise AuditSizeError(f"{n}x{m} market exceeds {EXHAUSTIVE_LIMIT} profiles; use --force-sampled")
        sampled = sampled or 1000
    props = args.props.split(",")
    reports = []
    for prop in props:
        kw = dict(tol=args.tol, sampled=sampled, seed=args.seed)
        if prop == "strategyproof":
            reports.append(check_strategyproof(mech, n, m, **kw))
        elif prop == "anonymous":
            reports.append(check_anonymous(mech, n, m, **kw))
        elif prop == "symmetric":
            if n != m:
                raise UsageError("symmetry needs n == m")
            reports.append(check_symmetric(mech, n, **kw))
        elif prop == "nonwasteful":
            reports.append(check_nonwasteful(mech, n, m, **kw))
        else:
            raise UsageError(f"unknown property {prop!r}")
    for rep in reports:
        print(rep.to_json() if args.json else rep)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def _model(args):
    n, m = _market(args)
    builder = build_ip if getattr(args, "integral", False) else build_lp
    return builder(n, m, args.objective, args.nonwasteful, args.anonymity, args.symmetry)


def cmd_build(args, integral: bool) -> int:
    args.integral = integral
    model = _model(args)
    out = Path(args.out)
    export_mps(model, out, strict=args.strict)
    summary = model.summary()
    summary["format_version"] = MODEL_FORMAT_VERSION
    out.with_suffix(".json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return EXIT_OK


def _report_solution(model, x) -> None:
    mech = extract_mechanism(model, x)
    o = evaluate_objectives(mech, model.meta["n"], model.meta["m"])
    print(f"average_stv={o.average_stv:.6f} worst_stv={o.worst_stv:.6f} average_waste={o.average_waste:.6f}")


def cmd_solve(args) -> int:
    args.integral = False
    model = _model(args)
    res = solve(model, args.method, time_limit=args.time_limit)
    print(f"status={res.status} iterations={res.iterations} seconds={res.seconds:.2f}")
    if not res.optimal:
        return EXIT_FAILED
    print(f"objective={res.objective:.9f}")
    if args.out:
        write_solution(model, res.x, args.out)
    _report_solution(model, res.x)
    return EXIT_OK


def cmd_import(args) -> int:
    args.integral = False
    model = _model(args)
    x = import_solution(model, args.solution)
    from .solver import verify_solution

    rep = verify_solution(model, x, args.tol)
    print(f"feasible={rep.feasible} worst_violation={rep.worst_violation:.3e} at={rep.worst_row or '-'} objective={rep.objective:.9f}")
    return EXIT_OK if rep.feasible else EXIT_FAILED


def cmd_extract(args) -> int:
    args.integral = False
    model = _model(args)
    x = import_solution(model, args.solution)
    mech = extract_mechanism(model, x, args.tol)
    mech.save(args.out)
    print(f"wrote {args.out}")
    _report_solution(model, x)
    return EXIT_OK


def cmd_simulate(args) -> int:
    overrides = dict(n=args.n_range, reps=args.reps, seed=args.seed, mechs=args.mechs,
                     samples=args.samples, output=args.out, threads=args.threads)
    if args.config:
        cfg = SimConfig.from_file(args.config, **overrides)
    else:
        cfg = SimConfig(
            n_values=parse_range(args.n_range or "2..10"), reps=args.reps or 1000, seed=args.seed or 0,
            mechanisms=split_descriptors(args.mechs or "alg3:nat,sd:nat"),
            samples=args.samples or 256, output=args.out, threads=args.threads or 1,
        )
    records = run_comparison(cfg)
    rows = summarize(records)
    if cfg.output:
        write_records(records, cfg.output)
    if args.aggregate:
        write_aggregate(rows, args.aggregate)
    if args.plot_dir:
        write_plot_data(rows, args.plot_dir)
    for r in rows:
        print(f"n={r.n:<3} {r.series:<40} mean={r.mean:.4f} max={r.max:.4f} se={r.stderr:.4f}")
    return EXIT_OK


def _compare(label, got, ref, tol) -> tuple[str, bool]:
    cells, ok = [], True
    for g, r in zip(got, ref):
        if r is None:
            cells.append(f"{g:8.4f}        ")
            continue
        # reference figures are truncated to four decimals
        dev = abs(g - r) > tol
        ok &= not dev
        cells.append(f"{g:8.4f} ({r:.4f}){'*' if dev else ' '}")
    return f"{label:<22}" + " ".join(cells), ok


def cmd_tables(args) -> int:
    n = args.n
    if n not in REFERENCE:
        raise UsageError("tables are available for n = 2 and n = 3")
    lines = [f"n=m={n}   average stv        worst stv          average waste      (reference)"]
    flagged = 0
    for label, desc, ref in REFERENCE[n]:
        o = evaluate_objectives(parse_mechanism(desc), n, n)
        line, ok = _compare(label, o.row(), ref, args.tol)
        flagged += not ok
        lines.append(line)
    if args.lp:
        for label, objective, nw, ref in LP_REFERENCE[n]:
            anonymity = n > 2 or args.reduce
            model = build_lp(n, n, objective, nw, anonymity, anonymity)
            res = solve(model, "auto")
            if not res.optimal:
                lines.append(f"{label:<22}status={res.status}")
                flagged += 1
                continue
            o = evaluate_objectives(extract_mechanism(model, res.x), n, n)
            line, ok = _compare(label, o.row(), ref, args.tol)
            flagged += not ok
            lines.append(line)
    lines.append(f"{flagged} row(s) deviate beyond {args.tol:g} (marked *)")
    text = "\n".join(lines)
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def _market_flags(p, required=True):
    p.add_argument("--n", type=int, required=required, help="number of students")
    p.add_argument("--m", type=int, help="number of schools (default: n)")


def _model_flags(p):
    _market_flags(p)
    p.add_argument("--objective", choices=("A", "B"), default="A")
    p.add_argument("--nonwasteful", action="store_true")
    p.add_argument("--anonymity", action="store_true")
    p.add_argument("--symmetry", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spmatch", description="Strategy-proof two-sided matching: audits, LP models, simulations.")
    ap.add_argument("--version", action="version", version=f"spmatch {__version__} (model format {MODEL_FORMAT_VERSION})")
    ap.add_argument("--threads", type=int, default=1, help="worker processes where parallelism applies")
    ap.add_argument("--force-sampled", action="store_true", help="sample instead of refusing markets beyond the exhaustive limit")
    # global flags are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--force-sampled", action="store_true", default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common], help="list profiles by index")
    _market_flags(p)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--limit", type=int, default=10)
    p.add_argument("--orbits", action="store_true", help="also count orbit representatives")
    p.add_argument("--symmetry", action="store_true")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("eval", parents=[common], help="evaluate a mechanism on one profile or on all profiles")
    p.add_argument("--mech", required=True)
    p.add_argument("--profile")
    _market_flags(p, required=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("audit", parents=[common], help="check mechanism properties")
    p.add_argument("--mech", required=True)
    _market_flags(p)
    p.add_argument("--props", default="strategyproof,anonymous,symmetric,nonwasteful")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--sampled", type=int, help="sample this many profiles instead of enumerating")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_audit)

    for name, integral in (("build-lp", False), ("build-ip", True)):
        p = sub.add_parser(name, parents=[common], help=f"write the {'integer ' if integral else ''}model as MPS plus a summary JSON")
        _model_flags(p)
        p.add_argument("--out", required=True)
        p.add_argument("--strict", action="store_true", help="fixed-format MPS with 8-character names")
        p.set_defaults(func=lambda a, integral=integral: cmd_build(a, integral))

    p = sub.add_parser("solve", parents=[common], help="build and solve a model")
    _model_flags(p)
    p.add_argument("--method", choices=("auto", "dense", "external"), default="auto")
    p.add_argument("--time-limit", type=float)
    p.add_argument("--out", help="write the solution as name/value lines")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("import-solution", parents=[common], help="verify a solution file against a model")
    _model_flags(p)
    p.add_argument("--solution", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("extract", parents=[common], help="turn a solution file into a mechanism table")
    _model_flags(p)
    p.add_argument("--solution", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo comparison on random profiles")
    p.add_argument("--config")
    p.add_argument("--n", dest="n_range", help="range such as 2..10 or list 2,4,6")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mechs")
    p.add_argument("--samples", type=int)
    p.add_argument("--out", help="per-instance CSV")
    p.add_argument("--aggregate", help="aggregate CSV")
    p.add_argument("--plot-dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tables", parents=[common], help="recompute the reference comparison tables")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--lp", action="store_true", help="also solve the LP rows (external solver at n=3)")
    p.add_argument("--reduce", action="store_true", help="use orbit reduction at n=2 as well")
    p.add_argument("--report")
    p.set_defaults(func=cmd_tables)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if getattr(args, "threads", None) is None:
        args.threads = 1
    try:
        return args.func(args)
    except (AuditSizeError, LpSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE if "too large" in str(exc) else EXIT_FAILED
    except (UsageError, ProfileError, MechanismError, MatchingError, ModelError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
