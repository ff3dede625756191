"""Command-line front end.

Exit codes: 0 success, 1 path tracking failed, 2 usage or input error.
Results go to standard output, diagnostics to standard error.  Every command
prints its effective configuration first, as ``# key = value`` lines.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

from .corrector import NewtonConfig
from .metrics import (CrossWorkerMismatch, bench_eval_old_vs_new, bench_newton, format_rows,
                      quality_up)
from .polysys import (DEFAULT_SEED, SystemFormatError, SystemSpec, format_system, generate_system,
                      newton_homotopy, random_point, read_system, with_constant_term)
from .predictor import PREDICTORS
from .scalar import PrecisionLevel
from .tracker import TrackerConfig, track_path

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def _int_list(s: str) -> list[int]:
    try:
        vals = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"worker counts must be positive, got {s!r}")
    return vals


def _system_args(p: argparse.ArgumentParser, dim: int, monomials: int, degree: int,
                 avg: Optional[float]) -> None:
    p.add_argument("--dim", type=_positive_int, default=dim)
    p.add_argument("--monomials", type=_positive_int, default=monomials)
    p.add_argument("--degree", type=_positive_int, default=degree, help="largest total degree")
    p.add_argument("--avg-degree", type=_positive_float, default=avg)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--precision", choices=[x.value for x in PrecisionLevel], default="d")
    p.add_argument("--format", choices=("table", "csv"), default="table")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pathtrack", description="Multithreaded polynomial path tracker.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random system with shared support")
    _system_args(g, 20, 20, 10, None)
    g.add_argument("--constant-term", action="store_true", help="append a random constant monomial")
    g.add_argument("--out", help="output file (default: standard output)")

    t = sub.add_parser("track", help="track one path of the Newton homotopy of a system")
    t.add_argument("--system", help="system file; without it a system is generated from the size flags")
    _system_args(t, 20, 20, 10, None)
    _common(t)
    t.add_argument("--predictor", choices=PREDICTORS, default="quadratic")
    t.add_argument("--threads", type=_positive_int, default=1)
    t.add_argument("--tol", type=_positive_float, default=None)
    t.add_argument("--max-it", type=_positive_int, default=4)
    t.add_argument("--initial-step", type=_positive_float, default=0.01)
    t.add_argument("--min-step", type=_positive_float, default=None)
    t.add_argument("--max-step", type=_positive_float, default=0.1)
    t.add_argument("--max-corrections", type=int, default=200_000)

    b = sub.add_parser("bench-newton", help="time the Newton stage pipeline for several worker counts")
    _system_args(b, 40, 200, 80, 40.0)
    _common(b)
    b.add_argument("--threads", type=_int_list, default=[1, 2, 4, 8], help="comma-separated worker counts")
    b.add_argument("--repetitions", type=_positive_int, default=1000, help="Newton iterations per run")

    e = sub.add_parser("bench-eval", help="time the shared-product evaluator against the baseline")
    _system_args(e, 20, 20, 10, None)
    _common(e)
    e.add_argument("--repetitions", type=_positive_int, default=400)

    q = sub.add_parser("quality-up", help="cores needed and quality-up factor")
    q.add_argument("--t-high", type=_positive_float, required=True, help="time in the higher precision")
    q.add_argument("--t-budget", type=_positive_float, required=True, help="time in the lower precision")
    q.add_argument("--cores", type=_positive_int, required=True)
    return ap


def _print_config(args: argparse.Namespace, extra: Optional[dict] = None) -> None:
    cfg = {k: v for k, v in vars(args).items()}
    cfg.update(extra or {})
    for k in sorted(cfg):
        print(f"# {k} = {cfg[k]}")


def _spec(args) -> SystemSpec:
    try:
        spec = SystemSpec(args.dim, args.monomials, args.degree, args.avg_degree, args.seed)
        generate_system(spec)   # surfaces infeasible sizes as usage errors
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return spec


def _generate(args) -> int:
    spec = _spec(args)
    _print_config(args)
    f = generate_system(spec)
    if args.constant_term:
        f = with_constant_term(f, args.seed)
    text = format_system(f)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {f.n}x{f.m} system to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _finite_or_none(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite_or_none(v) for v in obj]
    return obj


def _track(args) -> int:
    P = PrecisionLevel.parse(args.precision)
    if args.system:
        f = read_system(args.system)
    else:
        f = generate_system(_spec(args))
    newton = NewtonConfig.default(P, max_it=args.max_it, **({"eps": args.tol} if args.tol else {}))
    try:
        cfg = TrackerConfig(initial_step=args.initial_step, min_step=args.min_step, max_step=args.max_step,
                            max_corrections=args.max_corrections, newton=newton, predictor=args.predictor,
                            precision=P, workers=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _print_config(args, {"min_step": cfg.min_step, "tol": newton.eps, "start_seed": args.seed + 1,
                         "contraction": cfg.contraction, "expansion": cfg.expansion})
    z0 = random_point(f.n, args.seed + 1)
    r = track_path(newton_homotopy(f, z0, P), cfg)
    s = r.stats
    print(format_rows(("#succ.corrs", "#corrs", "time", "avg step", "min step"),
                      [[s.successful_corrections, s.total_corrections, s.wall, s.avg_step, s.min_step]],
                      args.format))
    record = {
        "fail": r.fail, "reason": r.reason, "reached_t": float(r.reached_t), "residual": float(r.residual),
        "successful_corrections": s.successful_corrections, "total_corrections": s.total_corrections,
        "newton_iterations": s.newton_iterations, "avg_step": s.avg_step, "min_step": s.min_step,
        "wall": s.wall, "stage_times": dict(s.wall_times),
        "endpoint": [[z.real, z.imag] for z in r.endpoint.tolist()],
    }
    print("result " + json.dumps(_finite_or_none(record)))
    if r.fail:
        print(f"tracking failed at t = {float(r.reached_t):.6g}: {r.reason}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _bench_newton(args) -> int:
    P = PrecisionLevel.parse(args.precision)
    spec = _spec(args)
    _print_config(args)
    try:
        bench = bench_newton(spec, args.repetitions, args.threads, P)
    except CrossWorkerMismatch as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"# hardware = {bench.hardware}")
    print(format_rows(bench.headers, bench.rows(), args.format))
    return EXIT_OK


def _bench_eval(args) -> int:
    P = PrecisionLevel.parse(args.precision)
    spec = _spec(args)
    _print_config(args)
    bench = bench_eval_old_vs_new(spec, args.repetitions, P)
    print(format_rows(bench.headers, bench.rows(), args.format))
    return EXIT_OK


def _quality_up(args) -> int:
    _print_config(args)
    q = quality_up(args.t_high, args.t_budget, args.cores)
    note = " (degenerate: one core suffices)" if q.degenerate else ""
    print(f"cores needed: {q.cores_needed}, quality up: {q.factor:.3f}{note}")
    return EXIT_OK


COMMANDS = {"generate": _generate, "track": _track, "bench-newton": _bench_newton,
            "bench-eval": _bench_eval, "quality-up": _quality_up}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SystemFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
