"""Command-line front end.

Exit codes: 0 success, 1 runtime or solver failure, 2 usage error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .checks import CHECKS, run_checks
from .errors import BudgetExceededError, InvalidInstanceError, MalformedFileError, RumdpError
from .instances import GenConfig, RumdpInstance, dumps_json, generate, load, save
from .nondominated import (
    BRUTE_FORCE_LIMIT,
    EnumerationBudget,
    NondominatedSet,
    brute_force_nondominated,
    enumerate_approx_gt,
    enumerate_gt,
    enumerate_pi_witness,
)
from .regret import DEFAULT_TOL, evaluate_regret, solve_icg_nd, solve_xu_mannor
from .reports import BenchRecord, bench_csv, load_gamma, save_gamma, save_regret, scatter_data

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3
ENUM_METHODS = ("gt", "pi-witness", "approx-gt")
REGRET_METHODS = ("icg-nd", "xu-mannor")
BENCH_METHODS = ("gt", "pi-witness", "approx-gt", "icg-nd", "xu-mannor", "brute-force")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _float_list(text: str) -> List[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not values or any(not 0 < v for v in values):
        raise argparse.ArgumentTypeError("expected a comma-separated list of positive numbers")
    return values


def _method_list(text: str) -> List[str]:
    methods = [x.strip() for x in text.split(",") if x.strip()]
    unknown = [m for m in methods if m not in BENCH_METHODS]
    if unknown or not methods:
        raise argparse.ArgumentTypeError(f"unknown methods {unknown}; choose from {', '.join(BENCH_METHODS)}")
    return methods


def _timing_flag(p: argparse.ArgumentParser):
    p.add_argument("--no-timing", action="store_true", help="write 0 for wall-clock fields so output is byte-stable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rumdp", description="Nondominated policies and minimax regret for reward-uncertain MDPs.")
    parser.add_argument("--version", action="version", version=f"rumdp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write random instances")
    g.add_argument("--states", type=_positive_int, required=True)
    g.add_argument("--actions", type=_positive_int, required=True)
    g.add_argument("--reward-dim", type=_positive_int, required=True)
    g.add_argument("--gamma", type=float, default=0.95)
    g.add_argument("--seed", type=_nonneg_int, default=0)
    g.add_argument("--count", type=_positive_int, default=1, help="with k > 1, -o is a directory receiving k files")
    g.add_argument("--transition-support", type=_positive_int, default=None)
    g.add_argument("--alpha-mode", choices=("uniform", "point-mass"), default="uniform")
    g.add_argument("--polytope-mode", choices=("box", "random-halfspaces"), default="box")
    g.add_argument("--box-halfwidth", type=_positive_float, default=1.0)
    g.add_argument("--base-reward-scale", type=float, default=0.0)
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--threads", type=_positive_int, default=1)

    e = sub.add_parser("enumerate", help="enumerate nondominated policies")
    e.add_argument("instance")
    e.add_argument("--method", choices=ENUM_METHODS, default="gt")
    e.add_argument("--max-lines", type=_nonneg_int, default=None)
    e.add_argument("--stall-lines", type=_positive_int, default=None)
    e.add_argument("--max-ms", type=_positive_float, default=None)
    e.add_argument("--max-policies", type=_positive_int, default=None)
    e.add_argument("--seed", type=_nonneg_int, default=0)
    e.add_argument("--threads", type=_positive_int, default=1)
    e.add_argument("-o", "--output", required=True)
    _timing_flag(e)

    r = sub.add_parser("regret", help="minimax regret over an enumerated set")
    r.add_argument("instance")
    r.add_argument("gamma_dump")
    r.add_argument("--method", choices=REGRET_METHODS, default="xu-mannor")
    r.add_argument("--tol", type=float, default=DEFAULT_TOL)
    r.add_argument("--threads", type=_positive_int, default=1)
    r.add_argument("-o", "--output", required=True)
    _timing_flag(r)

    v = sub.add_parser("verify", help="run the oracle checks on an instance")
    v.add_argument("instance")
    v.add_argument("--checks", default="all", help=f"comma list from: {', '.join(CHECKS)} (default all)")
    v.add_argument("--seed", type=_nonneg_int, default=0)
    v.add_argument("--threads", type=_positive_int, default=1)

    b = sub.add_parser("bench", help="benchmark a corpus directory")
    b.add_argument("corpus")
    b.add_argument("--methods", type=_method_list, default=["gt", "pi-witness"])
    b.add_argument("--error-thresholds", type=_float_list, default=[0.10, 0.05, 0.01])
    b.add_argument("--timeout-ms", type=_positive_float, default=20 * 60 * 1000.0)
    b.add_argument("--repeats", type=_positive_int, default=1, help="time exact enumerations as the best of k runs")
    b.add_argument("--seed", type=_nonneg_int, default=0)
    b.add_argument("--threads", type=_positive_int, default=1)
    b.add_argument("--scatter", default=None, help="scatter data path (default: <output>.scatter.json)")
    b.add_argument("-o", "--output", required=True)
    _timing_flag(b)
    return parser


# ---------------------------------------------------------------------------
# commands


def _gen_config(args) -> GenConfig:
    return GenConfig(
        n_states=args.states,
        n_actions=args.actions,
        reward_dim=args.reward_dim,
        gamma=args.gamma,
        seed=args.seed,
        transition_support=args.transition_support,
        alpha_mode=args.alpha_mode,
        polytope_mode=args.polytope_mode,
        box_halfwidth=args.box_halfwidth,
        base_reward_scale=args.base_reward_scale,
    )


def cmd_generate(args) -> int:
    try:
        base = _gen_config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.output)
    if args.count == 1:
        jobs = [(base, out)]
    else:
        out.mkdir(parents=True, exist_ok=True)
        jobs = [(replace(base, seed=args.seed + i), out / f"inst_{args.seed + i:06d}.json") for i in range(args.count)]

    def work(job):
        config, path = job
        save(generate(config), path)
        return path

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        written = list(pool.map(work, jobs))
    print(f"wrote {len(written)} instance file(s) to {out}")
    return EXIT_OK


def _enumerate(inst: RumdpInstance, args) -> NondominatedSet:
    budget = EnumerationBudget(
        max_policies=args.max_policies, max_lines=args.max_lines, max_millis=args.max_ms, stall_lines=args.stall_lines
    )
    if args.method == "gt":
        return enumerate_gt(inst.mdp, inst.polytope, threads=args.threads, budget=budget)
    if args.method == "pi-witness":
        return enumerate_pi_witness(inst.mdp, inst.polytope, budget=budget)
    if not budget.is_finite():
        raise UsageError("approx-gt needs --max-lines, --stall-lines, --max-ms or --max-policies")
    return enumerate_approx_gt(inst.mdp, inst.polytope, budget, seed=args.seed)


def cmd_enumerate(args) -> int:
    inst = load(args.instance)
    timing = not args.no_timing
    try:
        result = _enumerate(inst, args)
    except BudgetExceededError as exc:
        save_gamma(exc.partial, args.output, args.method, timing)
        print(f"error: {exc}; partial set of {len(exc.partial)} written to {args.output}", file=sys.stderr)
        return EXIT_FAIL
    save_gamma(result, args.output, args.method, timing)
    wall = result.stats.get("wall_ms", 0.0) if timing else 0.0
    print(f"|Gamma| = {len(result)}  wall_ms = {wall:.1f}")
    return EXIT_OK


def cmd_regret(args) -> int:
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    inst = load(args.instance)
    gamma_set = load_gamma(args.gamma_dump, inst.mdp, inst.polytope)
    if args.method == "xu-mannor":
        sol = solve_xu_mannor(inst.polytope, gamma_set)
    else:
        try:
            sol = solve_icg_nd(inst.mdp, inst.polytope, gamma_set, tol=args.tol, threads=args.threads)
        except BudgetExceededError as exc:
            save_regret(exc.partial, args.output, args.method, not args.no_timing)
            print(f"error: {exc}; best-so-far written to {args.output}", file=sys.stderr)
            return EXIT_FAIL
    save_regret(sol, args.output, args.method, not args.no_timing)
    print(f"minimax regret = {sol.regret:.10g}  (|Gamma| = {len(gamma_set)}, {sol.iterations} iteration(s))")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(CHECKS) if args.checks == "all" else [c.strip() for c in args.checks.split(",") if c.strip()]
    unknown = [n for n in names if n not in CHECKS]
    if unknown or not names:
        raise UsageError(f"unknown checks {unknown}; choose from {', '.join(CHECKS)}")
    try:
        inst = load(args.instance, validate=False)
    except (MalformedFileError, InvalidInstanceError) as exc:
        print(f"FAIL valid: {exc}")
        return EXIT_VERIFY
    if "valid" not in names:
        names = ["valid"] + names
    results = run_checks(inst, names, seed=args.seed)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"verification failed: first failing check is '{failed[0].name}'", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark


def _rel_error(value: float, exact: float) -> float:
    err = value - exact
    if exact < 1e-9:
        return max(err, 0.0)
    return max(err / exact, 0.0)


def _timed_enumeration(fn, repeats: int):
    """Run ``fn`` ``repeats`` times; keep the first result and the fastest wall time."""
    first, best = None, np.inf
    for _ in range(repeats):
        result = fn()
        first = result if first is None else first
        best = min(best, result.stats["wall_ms"])
    return first, best


def bench_instance(path: Path, methods, thresholds, timeout_ms: float, seed: int, repeats: int, timing: bool):
    inst = load(path)
    mdp, poly = inst.mdp, inst.polytope
    row = dict(instance_id=path.stem, n=mdp.n_states, m=mdp.n_actions, d=poly.dim, gamma=mdp.gamma)
    records: List[BenchRecord] = []
    budget = EnumerationBudget(max_millis=timeout_ms)

    def clock(ms):
        return float(ms) if timing else 0.0

    need_full = any(m in methods for m in ("gt", "icg-nd", "xu-mannor", "approx-gt"))
    full: Optional[NondominatedSet] = None
    if need_full:
        try:
            full, wall = _timed_enumeration(lambda: enumerate_gt(mdp, poly, budget=budget), repeats)
            if "gt" in methods:
                records.append(BenchRecord(**row, method="gt", gamma_size=len(full), wall_ms=clock(wall), lp_count=full.stats["lps"]))
        except BudgetExceededError as exc:
            if "gt" in methods:
                records.append(BenchRecord(**row, method="gt", gamma_size=len(exc.partial), wall_ms=clock(timeout_ms)))

    if "pi-witness" in methods:
        try:
            pw, wall = _timed_enumeration(lambda: enumerate_pi_witness(mdp, poly, budget=budget), repeats)
            records.append(BenchRecord(**row, method="pi-witness", gamma_size=len(pw), wall_ms=clock(wall), lp_count=pw.stats["lps"]))
        except BudgetExceededError as exc:
            records.append(BenchRecord(**row, method="pi-witness", gamma_size=len(exc.partial), wall_ms=clock(timeout_ms)))

    if "brute-force" in methods and mdp.n_actions**mdp.n_states <= BRUTE_FORCE_LIMIT:
        bf = brute_force_nondominated(mdp, poly)
        records.append(BenchRecord(**row, method="brute-force", gamma_size=len(bf), wall_ms=clock(bf.stats["wall_ms"]), lp_count=bf.stats["lps"]))

    exact = None
    if full is not None and any(m in methods for m in ("xu-mannor", "approx-gt")):
        xm = solve_xu_mannor(poly, full)
        exact = xm.regret
        if "xu-mannor" in methods:
            records.append(BenchRecord(**row, method="xu-mannor", gamma_size=len(full), wall_ms=clock(xm.wall_ms), mmr=xm.regret, lp_count=xm.lp_count))
    if full is not None and "icg-nd" in methods:
        ic = solve_icg_nd(mdp, poly, full)
        records.append(BenchRecord(**row, method="icg-nd", gamma_size=len(full), wall_ms=clock(ic.wall_ms), mmr=ic.regret, lp_count=ic.lp_count))

    if "approx-gt" in methods and exact is not None:
        records.extend(_bench_approx(inst, full, exact, thresholds, timeout_ms, seed, row, clock))
    return records


def _bench_approx(inst, full, exact, thresholds, timeout_ms, seed, row, clock):
    """One anytime run; each threshold records the first moment it is met."""
    mdp, poly = inst.mdp, inst.polytope
    pending = sorted(thresholds, reverse=True)
    hits = {}
    spent = {"eval": 0.0}
    t0 = time.perf_counter()
    last = {"size": 0, "mmr": None, "err": None}

    def stop_when(subset):
        t_eval = time.perf_counter()
        if len(subset) > last["size"]:
            sub = solve_xu_mannor(poly, subset)
            last.update(size=len(subset), mmr=sub.regret, err=_rel_error(evaluate_regret(sub, full, poly), exact))
        spent["eval"] += time.perf_counter() - t_eval
        elapsed = 1000.0 * (time.perf_counter() - t0 - spent["eval"])
        while pending and last["err"] is not None and last["err"] < pending[0]:
            hits[pending.pop(0)] = (last["size"], elapsed, last["mmr"], last["err"])
        return not pending

    result = enumerate_approx_gt(mdp, poly, EnumerationBudget(max_millis=timeout_ms), seed=seed, stop_when=stop_when)
    elapsed = 1000.0 * (time.perf_counter() - t0 - spent["eval"])
    out = []
    for thr in sorted(thresholds, reverse=True):
        size, wall, mmr, err = hits.get(thr, (len(result), elapsed, last["mmr"], last["err"]))
        out.append(BenchRecord(**row, method="approx-gt", gamma_size=size, wall_ms=clock(wall), mmr=mmr, rel_error=err, lp_count=0))
    return out


def cmd_bench(args) -> int:
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise UsageError(f"{corpus} is not a directory")
    files = sorted(corpus.glob("*.json"))
    if not files:
        raise UsageError(f"no instance files (*.json) in {corpus}")
    timing = not args.no_timing

    def work(path):
        return bench_instance(path, args.methods, args.error_thresholds, args.timeout_ms, args.seed, args.repeats, timing)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            per_instance = list(pool.map(work, files))
    else:
        per_instance = [work(p) for p in files]
    records = [rec for recs in per_instance for rec in recs]

    out = Path(args.output)
    out.write_text(bench_csv(records))
    scatter = Path(args.scatter) if args.scatter else out.with_suffix(".scatter.json")
    scatter.write_text(dumps_json(scatter_data(records)))
    for method in args.methods:
        times = [r.wall_ms for r in records if r.method == method]
        if times:
            print(f"{method:>12}: {len(times)} rows, median wall_ms {statistics.median(times):.1f}")
    print(f"wrote {len(records)} records to {out} and scatter data to {scatter}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "enumerate": cmd_enumerate,
    "regret": cmd_regret,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rumdp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInstanceError, MalformedFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (RumdpError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
