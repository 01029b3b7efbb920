"""Command-line interface: reproducible runs and benchmark sweeps.

Every solver subcommand prints one JSON report to stdout (and to --out when
given).  Exit codes: 0 when the optimized representation binarized to a
valid permutation (for align: nearest-neighbor accuracy 1.0), 2 when only
the greedy-rounded projection was valid, 1 on errors.
"""

import argparse
import concurrent.futures
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as pio
from .kissing import DEFAULT_TABLE, TABLE_VERSION, rank_for
from .lowrank import representation_size
from .optim import Schedule
from .oracle import brute_force_qap, hungarian, BRUTE_FORCE_QAP_MAX
from .solvers import (
    make_align_problem,
    make_feature_lap,
    make_sparse_lap,
    solve_alignment,
    solve_lap_dense,
    solve_lap_sparse,
    solve_qap,
)


def _emit(report, args) -> None:
    report.settings["cli"] = {k: v for k, v in vars(args).items() if k != "func"}
    text = pio.emit_report(report)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")


def _exit_code(report) -> int:
    if report.solver == "align":
        return 0 if report.metrics.get("nn_accuracy") == 1.0 else 2
    return 0 if report.is_valid else 2


def cmd_rank_for(args) -> int:
    m = rank_for(args.n)
    factor, dense = representation_size(args.n, m)
    print(json.dumps({"n": args.n, "m": m, "factor_elements": factor,
                      "dense_elements": dense, "ratio": dense / factor}))
    return 0


def cmd_table(args) -> int:
    print(json.dumps({"version": TABLE_VERSION,
                      "lower_bound": {str(m): b for m, b in DEFAULT_TABLE.as_dict().items()}}))
    return 0


def cmd_align(args) -> int:
    problem = make_align_problem(args.n, m=args.m, seed=args.seed)
    schedule = None
    if args.alpha is not None:
        if args.alpha_end is not None:
            schedule = Schedule.linear(args.alpha, args.alpha_end, args.steps)
        else:
            schedule = Schedule.constant(args.alpha)
    _, report = solve_alignment(
        problem,
        steps=args.steps,
        lr=args.lr,
        alpha_schedule=schedule,
        stochastic=args.stochastic,
        seed=args.seed,
        early_stop=not args.no_early_stop,
    )
    _emit(report, args)
    return _exit_code(report)


def _load_lap_instance(args):
    if args.synthetic is not None:
        if args.sparse_density is not None:
            return make_sparse_lap(args.synthetic, args.sparse_density, seed=args.seed,
                                   k=args.k)
        return make_feature_lap(args.synthetic, args.k, seed=args.seed)
    text = Path(args.instance).read_text()
    head = text.split("\n", 1)[0].split()
    if len(head) == 1:
        return pio.parse_triplets(text)
    from .solvers import LapInstance

    mat = pio.matrix_from_text(text)
    return LapInstance(n=mat.shape[0], dense=mat)


def cmd_lap(args) -> int:
    inst = _load_lap_instance(args)
    if inst.is_sparse:
        schedule = None
        if args.alpha is not None and args.alpha_end is not None:
            schedule = Schedule.linear(args.alpha, args.alpha_end, max(1, args.steps // 2))
        kwargs = dict(alpha_schedule=schedule, steps=args.steps, lr=args.lr, seed=args.seed,
                      threshold=args.threshold)
        if args.m is not None:
            kwargs["m"] = args.m
        if args.reg is not None:
            kwargs["reg_weight"] = args.reg
        _, report = solve_lap_sparse(inst, **kwargs)
    else:
        kwargs = dict(steps=args.steps, lr=args.lr, seed=args.seed,
                      threshold=args.threshold, maximize=args.maximize)
        if args.m is not None:
            kwargs["m"] = args.m
        if args.reg is not None:
            kwargs["reg_weight"] = args.reg
        if args.alpha is not None:
            kwargs["alpha"] = args.alpha
            if args.alpha_end is not None:
                kwargs["alpha_schedule"] = Schedule.linear(
                    args.alpha, args.alpha_end, max(1, args.steps // 2))
        _, report = solve_lap_dense(inst, **kwargs)
    _emit(report, args)
    return _exit_code(report)


def _load_qap_instance(path: str, sln: str | None):
    text = Path(path).read_text()
    inst = pio.parse_qaplib(text, name=Path(path).stem)
    if sln is None:
        candidate = Path(path).with_suffix(".sln")
        sln = str(candidate) if candidate.exists() else None
    if sln is not None:
        inst = pio.attach_solution(inst, Path(sln).read_text())
    return inst


def _qap_kwargs(args) -> dict:
    kwargs = dict(beta_stages=args.beta_stages, steps_per_stage=args.steps,
                  lr=args.lr, seed=args.seed, threshold=args.threshold)
    if args.m is not None:
        kwargs["m"] = args.m
    if args.alpha is not None:
        kwargs["alpha"] = args.alpha
    if args.reg is not None:
        kwargs["reg_weight"] = args.reg
    return kwargs


def cmd_qap(args) -> int:
    inst = _load_qap_instance(args.instance, args.sln)
    _, report = solve_qap(inst, **_qap_kwargs(args))
    _emit(report, args)
    return _exit_code(report)


def cmd_verify(args) -> int:
    if (args.lap is None) == (args.qap is None):
        print("verify: give exactly one of --lap or --qap", file=sys.stderr)
        return 1
    if args.lap:
        text = Path(args.lap).read_text()
        head = text.split("\n", 1)[0].split()
        if len(head) == 1:
            inst = pio.parse_triplets(text)
            mat = inst.dense_matrix()
        else:
            mat = pio.matrix_from_text(text)
        res = hungarian(mat)
    else:
        inst = _load_qap_instance(args.qap, None)
        if inst.n > BRUTE_FORCE_QAP_MAX:
            print(f"verify: exact QAP limited to n <= {BRUTE_FORCE_QAP_MAX}", file=sys.stderr)
            return 1
        res = brute_force_qap(inst.A, inst.B)
    print(json.dumps({"method": res.method, "objective": res.objective,
                      "assignment": res.assignment.target.tolist()}))
    return 0


def _bench_one(task):
    path, sln, kwargs = task
    inst = _load_qap_instance(path, sln)
    _, report = solve_qap(inst, **kwargs)
    doc = {"schema": pio.REPORT_SCHEMA, "instance": Path(path).name}
    doc.update(report.to_dict())
    return doc


def cmd_bench(args) -> int:
    files = sorted(Path(args.dir).glob("*.dat"))
    if not files:
        print(f"bench: no .dat instances under {args.dir}", file=sys.stderr)
        return 1
    kwargs = _qap_kwargs(args)
    tasks = []
    for f in files:
        sln = f.with_suffix(".sln")
        tasks.append((str(f), str(sln) if sln.exists() else None, kwargs))
    env_cap = os.environ.get("PERMKISS_THREADS")
    workers = min(len(tasks), os.cpu_count() or 1)
    if env_cap:
        workers = max(1, min(workers, int(env_cap)))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            docs = list(pool.map(_bench_one, tasks))
    else:
        docs = [_bench_one(t) for t in tasks]
    lines = [json.dumps(d) for d in docs]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"{'instance':<16} {'n':>4} {'valid':>6} {'gap':>10} {'objective':>14} {'seconds':>8}")
    for d in docs:
        gap = d.get("relative_gap")
        print(f"{d['instance']:<16} {d['n']:>4} {str(d['is_valid']):>6} "
              f"{('%.4f' % gap) if gap is not None else '-':>10} "
              f"{d['objective']:>14.2f} {d['wall_time_s']:>8.1f}")
    return 0


def _add_common(p, *, steps_default):
    p.add_argument("--seed", type=int, default=0, help="deterministic seed (default 0)")
    p.add_argument("--m", type=int, default=None, help="factor rank override")
    p.add_argument("--steps", type=int, default=steps_default)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--alpha", type=float, default=None, help="softmax temperature (start)")
    p.add_argument("--alpha-end", type=float, default=None, help="linear ramp end temperature")
    p.add_argument("--reg", type=float, default=None, help="column regularizer weight")
    p.add_argument("--threshold", type=float, default=0.5, help="binarization threshold")
    p.add_argument("--out", type=str, default=None, help="write the JSON report here too")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="permkiss",
                                 description="low-rank permutation representation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank-for", help="minimal factor rank for a permutation size")
    p.add_argument("n", type=int)
    p.set_defaults(func=cmd_rank_for)

    p = sub.add_parser("table", aliases=["kissing-table"],
                       help="dump the kissing-number lower-bound table as JSON")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("align", help="synthetic point-cloud alignment experiment")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--stochastic", action="store_true", help="two-entry stochastic training")
    p.add_argument("--no-early-stop", action="store_true")
    _add_common(p, steps_default=20000)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("lap", help="linear assignment over the factorized representation")
    p.add_argument("--instance", type=str, default=None,
                   help="matrix file (dense) or triplet file (sparse)")
    p.add_argument("--synthetic", type=int, default=None, metavar="N",
                   help="generate a synthetic feature-product instance of size N")
    p.add_argument("--k", type=int, default=453, help="synthetic feature width")
    p.add_argument("--sparse-density", type=float, default=None,
                   help="generate the synthetic instance sparse at this density")
    p.add_argument("--maximize", action="store_true", help="maximize instead of minimize")
    _add_common(p, steps_default=20000)
    p.set_defaults(func=cmd_lap)

    p = sub.add_parser("qap", help="quadratic assignment via the convex-concave sweep")
    p.add_argument("instance", type=str, help="QAPLIB-format .dat file")
    p.add_argument("--sln", type=str, default=None,
                   help="known-optimum .sln file (default: sibling of the instance)")
    p.add_argument("--beta-stages", type=int, default=10)
    _add_common(p, steps_default=2000)
    p.set_defaults(func=cmd_qap)

    p = sub.add_parser("verify", help="solve an instance exactly with the oracles")
    p.add_argument("--lap", type=str, default=None)
    p.add_argument("--qap", type=str, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run the QAP solver over a directory of instances")
    p.add_argument("--dir", type=str, required=True)
    p.add_argument("--beta-stages", type=int, default=10)
    _add_common(p, steps_default=2000)
    p.set_defaults(func=cmd_bench)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as e:
        print(f"permkiss: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
