"""packlab command line: gen, solve, bench.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from .baselines import first_fit, first_fit_decreasing, karmarkar_karp, random_order
from .instance import GENERATORS, InstanceError, generate, read_instance, serialize_instance
from .lp import solve_gg_lp
from .params import SolveParams
from .pipeline import PipelineError, solve_paper, verify

ALGOS = ("paper", "kk", "ff", "ffd")
CSV_HEADER = ["instance", "n", "total_items", "opt_f", "algo", "bins", "gap", "seed", "time_ms"]


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("PACKLAB_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"PACKLAB_SEED={raw!r} is not an integer")


def gap_of(bins: int, opt_f: float) -> int:
    return bins - math.ceil(opt_f - 1e-7)


def build_params(args, seed: int) -> SolveParams:
    base = SolveParams.paper() if getattr(args, "paper_constants", False) else SolveParams()
    over = {"rng_seed": seed}
    if getattr(args, "sigma_small", None) is not None:
        over["sigma_small"] = Fraction(args.sigma_small)
    if getattr(args, "delta_large", None) is not None:
        over["delta_large"] = Fraction(args.delta_large)
    if getattr(args, "K", None) is not None:
        over["budget_K"] = args.K
    if getattr(args, "L", None) is not None:
        over["support_L"] = args.L
    try:
        return base.with_(**over)
    except ValueError as exc:
        raise UsageError(str(exc))


def run_algo(instance, algo: str, seed: int, params: SolveParams | None = None, opt_f: float | None = None):
    if algo == "paper":
        return solve_paper(instance, (params or SolveParams()).with_(rng_seed=seed), lp_value=opt_f)
    if algo == "kk":
        return karmarkar_karp(instance, params)
    if algo == "ff":
        return first_fit(instance, random_order(instance, seed))
    if algo == "ffd":
        return first_fit_decreasing(instance)
    raise UsageError(f"unknown algorithm {algo!r}")


# -- commands ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    try:
        inst = generate(args.kind, args.n, seed, lattice=args.lattice)
    except InstanceError as exc:
        raise UsageError(str(exc))
    text = serialize_instance(inst)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _load(path: str):
    try:
        return read_instance(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")
    except InstanceError as exc:
        raise UsageError(f"{path}: {exc}")


def cmd_solve(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    inst = _load(args.instance)
    params = build_params(args, seed)
    opt_f = solve_gg_lp(inst).objective
    t0 = time.perf_counter()
    try:
        sol = run_algo(inst, args.algo, seed, params, opt_f)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ms = 1000 * (time.perf_counter() - t0)
    sol.meta["opt_f"] = opt_f
    sol.meta["seed"] = seed
    rep = verify(inst, sol)
    if args.output:
        Path(args.output).write_text(sol.to_json() + "\n", encoding="utf-8")
    print(f"{args.algo} bins={sol.bins_used} opt_f={opt_f:.6f} gap={gap_of(sol.bins_used, opt_f)} "
          f"seed={seed} time_ms={ms:.1f}")
    if not rep.ok:
        print(f"verification failed: {rep.first}", file=sys.stderr)
        return 1
    return 0


def _bench_row(job):
    name, inst, opt_f, algo, seed, params, timing = job
    t0 = time.perf_counter()
    sol = run_algo(inst, algo, seed, params, opt_f)
    ms = 1000 * (time.perf_counter() - t0) if timing else 0.0
    ok = verify(inst, sol).ok
    row = [name, inst.n, inst.total_items, f"{opt_f:.6f}", algo, sol.bins_used,
           gap_of(sol.bins_used, opt_f), seed, f"{ms:.1f}"]
    return row, ok


def bench_rows(instances, algos, seeds, params, timing=False, jobs=1):
    """One row per (instance, algo, seed), in that nesting order."""
    work = []
    for name, inst in instances:
        opt_f = solve_gg_lp(inst).objective
        for algo in algos:
            for seed in seeds:
                work.append((name, inst, opt_f, algo, seed, params, timing))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_bench_row, work))
    return [_bench_row(w) for w in work]


def _csv_text(rows, header: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


def cmd_bench(args) -> int:
    algos = _split(args.algos)
    bad = [a for a in algos if a not in ALGOS]
    if bad:
        raise UsageError(f"unknown algorithm(s) {', '.join(bad)}; choose from {', '.join(ALGOS)}")
    seeds = [int(s) for s in _split(args.seeds)] if args.seeds else [default_seed()]
    instances = []
    for path in args.instances or []:
        instances.append((Path(path).stem, _load(path)))
    if args.kinds or args.sizes:
        if not (args.kinds and args.sizes):
            raise UsageError("--kinds and --sizes go together")
        for kind in _split(args.kinds):
            if kind not in GENERATORS:
                raise UsageError(f"unknown generator {kind!r}")
            for n in _split(args.sizes):
                inst = generate(kind, int(n), args.gen_seed)
                instances.append((inst.name, inst))
    if not instances:
        raise UsageError("nothing to run: give instance files or --kinds/--sizes")
    params = build_params(args, seeds[0])
    results = bench_rows(instances, algos, seeds, params, args.timing, args.jobs)
    rows = [r for r, _ in results]
    out = Path(args.output) if args.output else None
    if out is None:
        sys.stdout.write(_csv_text(rows, True))
    elif args.append and out.exists() and out.stat().st_size > 0:
        with out.open("a", encoding="utf-8", newline="") as fh:
            fh.write(_csv_text(rows, False))
    else:
        out.write_text(_csv_text(rows, True), encoding="utf-8")
    return 0 if all(ok for _, ok in results) else 1


def _split(s: str) -> list[str]:
    return [p for p in (s or "").split(",") if p]


# -- parser -----------------------------------------------------------------------------

def _add_param_flags(p):
    p.add_argument("--paper-constants", action="store_true",
                   help="use the asymptotic constants instead of the desk defaults")
    p.add_argument("--sigma-small", help="small/large class threshold, a power of two such as 1/16")
    p.add_argument("--delta-large", help="grouping weight for large classes")
    p.add_argument("--K", type=float, help="interval budget constant")
    p.add_argument("--L", type=float, help="support constant")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="packlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--kind", choices=GENERATORS, default="uniform")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--lattice", type=int, default=10000)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="pack one instance")
    s.add_argument("instance")
    s.add_argument("--algo", choices=ALGOS, default="paper")
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output", help="write the solution JSON here")
    _add_param_flags(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run algorithms over instances and write CSV")
    b.add_argument("instances", nargs="*")
    b.add_argument("--kinds")
    b.add_argument("--sizes")
    b.add_argument("--gen-seed", type=int, default=0)
    b.add_argument("--algos", default="ffd,kk,paper")
    b.add_argument("--seeds")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--timing", action="store_true",
                   help="record wall-clock time; without it time_ms is 0 so reruns are byte-identical")
    b.add_argument("--append", action="store_true")
    b.add_argument("-o", "--output")
    _add_param_flags(b)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"{ap.prog}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
