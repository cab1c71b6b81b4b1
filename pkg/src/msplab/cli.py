"""Command-line surface for the laboratory.

Subcommands: simulate, estimate, hat, broom, partition, recurrence, bounds.
Exit codes: 0 success, 2 parameter/usage error, 3 algorithm fault. The
MSPLAB_SEED environment variable overrides --seed everywhere.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from fractions import Fraction

from .bounds import BoundParams, claw_inversion_check, minmax_scan
from .engine import draw_schedule, parse_threshold, run_trial
from .errors import AlgorithmFaultError, MSPLabError, ParameterError
from .experiments import (
    ExperimentConfig,
    broom_attack_experiment,
    deterministic_partition_experiment,
    estimate_competitiveness,
    estimate_trial_rows,
    hat_failure_experiment,
    make_algorithm,
    parse_instance,
)
from .reports import estimate_csv
from .hat import build_hat, kernel_trace_to_runtrace
from .partition import (
    all_edge_degrees,
    count_low_degree,
    find_shattered_triangle,
    parse_partition_file,
)
from .recurrence import recurrence_check
from .reports import stable_json_dumps
from .rng import TrialSeed
from . import _kernels


def _seed_from(args) -> int:
    env = os.environ.get("MSPLAB_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _emit(payload: dict, args) -> None:
    if getattr(args, "emit", "json") == "json":
        text = stable_json_dumps(payload) + "\n"
    else:
        text = _payload_csv(payload)
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _payload_csv(payload: dict) -> str:
    """Flatten a report into CSV; list-of-dict payloads become rows."""
    rows = payload.get("rows")
    if rows is None:
        rows = [payload]
    flat_rows = []
    for row in rows:
        flat = {}
        for key, value in row.items():
            if isinstance(value, dict):
                for k2, v2 in value.items():
                    flat[f"{key}.{k2}"] = v2
            elif isinstance(value, list):
                flat[key] = ";".join(str(v) for v in value)
            else:
                flat[key] = value
        flat_rows.append(flat)
    fields = sorted({k for row in flat_rows for k in row})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    writer.writerows(flat_rows)
    return buf.getvalue()


def cmd_simulate(args) -> int:
    seed = TrialSeed(_seed_from(args), args.trial)
    bundle = parse_instance(args.matroid, seed.master_seed)
    thr = parse_threshold(args.horizon)
    alg = make_algorithm(args.alg, bundle)
    schedule = draw_schedule(bundle.matroid.ground_size, seed)
    trace = run_trial(bundle.matroid, bundle.weights, schedule, alg, seed=seed, t_threshold=thr)
    if args.dump:
        trace.dump_jsonl(args.dump)
    accepted = sorted(trace.accepted)
    payload = {
        "instance": args.matroid,
        "algorithm": args.alg,
        "trial": args.trial,
        "accepted": accepted,
        "utility": float(sum(bundle.weights[e] for e in accepted)),
        "events": len(trace.events),
        "samples": len(trace.samples()),
    }
    _emit(payload, args)
    return 0


def cmd_estimate(args) -> int:
    cfg = ExperimentConfig(
        instance=args.matroid,
        algorithm=args.alg,
        metric=args.metric,
        trials=args.trials,
        master_seed=_seed_from(args),
        horizon=args.horizon,
    )
    if args.emit == "csv":
        rows = estimate_trial_rows(cfg)
        text = estimate_csv(rows)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    report = estimate_competitiveness(cfg)
    _emit(report.to_dict(), args)
    return 0


def cmd_hat(args) -> int:
    n_values = [int(tok) for tok in args.n.split(",") if tok]
    seed = _seed_from(args)
    thr = parse_threshold(args.horizon)
    rows = hat_failure_experiment(
        n_values, Fraction(args.alpha), args.policy, args.trials, seed,
        t_threshold=thr, audit_every=args.audit_every,
    )
    if args.trace_dir:
        os.makedirs(args.trace_dir, exist_ok=True)
        for n in n_values:
            matroid, weights, inst = build_hat(n, Fraction(args.alpha))
            for idx in range(min(args.trace_limit, args.trials)):
                raw = _kernels.hat_supergreedy_trace(n, seed, idx, thr)
                trace = kernel_trace_to_runtrace(inst, weights, raw, thr)
                trace.dump_jsonl(os.path.join(args.trace_dir, f"hat_n{n}_trial{idx}.jsonl"))
    payload = {"rows": [row.as_dict() for row in rows]}
    _emit(payload, args)
    return 0


def cmd_broom(args) -> int:
    report = broom_attack_experiment(
        args.n, args.dist, args.trials, _seed_from(args),
        t_threshold=parse_threshold(args.horizon),
    )
    _emit(report.as_dict(), args)
    return 0


def cmd_partition(args) -> int:
    if args.partition_cmd == "check":
        with open(args.file, "r", encoding="utf-8") as fh:
            p = parse_partition_file(fh.read())
        witness = find_shattered_triangle(p)
        if witness is None:
            print("valid")
        else:
            a, b, c = witness
            print(f"invalid: triangle {a}-{b}-{c} has its three edges in three parts")
        return 0
    if args.partition_cmd == "degrees":
        with open(args.file, "r", encoding="utf-8") as fh:
            p = parse_partition_file(fh.read())
        degrees = all_edge_degrees(p)
        payload = {
            "n": p.n,
            "edges": p.m,
            "cutoff": args.C,
            "low_degree": count_low_degree(p, args.C),
            "degree_min": int(degrees.min()),
            "degree_max": int(degrees.max()),
        }
        _emit(payload, args)
        return 0
    if args.partition_cmd == "attack":
        if args.dist != "korula-pal":
            raise ParameterError("the fixed-partition attack samples from korula-pal")
        report = deterministic_partition_experiment(
            args.n, args.trials, _seed_from(args), partition_seed=args.partition_seed,
            t_threshold=parse_threshold(args.horizon),
        )
        _emit(report.as_dict(), args)
        return 0
    raise ParameterError(f"unknown partition subcommand {args.partition_cmd!r}")


def cmd_recurrence(args) -> int:
    report = recurrence_check(args.N, Fraction(args.eps))
    _emit(report.as_dict(), args)
    return 0


def cmd_bounds(args) -> int:
    params = BoundParams(args.n, args.x, args.ell)
    scan = minmax_scan(params)
    payload = {
        "n": args.n,
        "x": params.x,
        "ell": params.ell,
        "minmax": scan.value,
        "y_at": scan.y_at,
        "f_nonincreasing": scan.f_nonincreasing,
        "g_nondecreasing": scan.g_nondecreasing,
    }
    if args.trials:
        rep = claw_inversion_check(
            args.n, args.x, args.ell, trials=args.trials, master_seed=_seed_from(args)
        )
        payload["claw_inversion"] = {
            "estimate": rep.estimate,
            "bound": rep.bound,
            "std_error": rep.std_error,
            "x_claws": rep.x_claws,
            "passes": rep.passes,
        }
    _emit(payload, args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msplab", description=__doc__)
    sub = parser.add_subparsers(dest="cmd")

    def common(p, trials_default=100_000):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=trials_default)
        p.add_argument("--horizon", default="1/e", help="sampling horizon (default 1/e)")
        p.add_argument("--emit", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="run and dump a single trial")
    p.add_argument("--matroid", required=True)
    p.add_argument("--alg", required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--dump", default=None, help="write the trace as JSON lines (.gz ok)")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("estimate", help="Monte Carlo competitiveness estimate")
    p.add_argument("--matroid", required=True)
    p.add_argument("--alg", required=True)
    p.add_argument("--metric", choices=("utility", "probability"), default="probability")
    common(p)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("hat", help="hat failure experiment")
    p.add_argument("--n", required=True, help="comma-separated hat sizes")
    p.add_argument("--alpha", default="5")
    p.add_argument("--policy", default="supergreedy")
    p.add_argument("--audit-every", type=int, default=64)
    p.add_argument("--trace-dir", default=None)
    p.add_argument("--trace-limit", type=int, default=10)
    common(p, trials_default=10_000)
    p.set_defaults(fn=cmd_hat)

    p = sub.add_parser("broom", help="broom attack on a partition distribution")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dist", choices=("korula-pal", "single-part"), default="korula-pal")
    common(p)
    p.set_defaults(fn=cmd_broom)

    p = sub.add_parser("partition", help="partition utilities")
    psub = p.add_subparsers(dest="partition_cmd")
    pc = psub.add_parser("check", help="validity check with witness")
    pc.add_argument("--file", required=True)
    pc.set_defaults(fn=cmd_partition)
    pa = psub.add_parser("attack", help="adversary weights vs a fixed sampled partition")
    pa.add_argument("--dist", default="korula-pal")
    pa.add_argument("--n", type=int, required=True)
    pa.add_argument("--partition-seed", type=int, default=0)
    common(pa)
    pa.set_defaults(fn=cmd_partition)
    pd = psub.add_parser("degrees", help="within-part edge degrees")
    pd.add_argument("--file", required=True)
    pd.add_argument("--C", type=float, required=True)
    pd.add_argument("--emit", choices=("json", "csv"), default="json")
    pd.add_argument("--out", default=None)
    pd.set_defaults(fn=cmd_partition)

    p = sub.add_parser("recurrence", help="induction condition scan")
    p.add_argument("--eps", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--emit", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_recurrence)

    p = sub.add_parser("bounds", help="failure-bound evaluation and checks")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--x", type=float, default=None)
    p.add_argument("--ell", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20_000)
    p.add_argument("--emit", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bounds)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.fn(args)
    except AlgorithmFaultError as exc:
        print(f"algorithm fault: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, MSPLabError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
