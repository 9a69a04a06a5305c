"""Command-line front end: ``tkflen <command> [options]``.

Output goes to ``--out`` or stdout.  Usage errors exit with status 2; model
or computation errors exit with status 1 and print a JSON object with keys
``error`` and ``message`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ._io import csv_text, json_text
from .analytics import joint_pair_law, leaf_length_pmf_given_root
from .estimator import LengthDistanceEstimator, read_pairs_csv, single_pair_thetas
from .exceptions import TKFError
from .experiments import proof_window_report, tv_curve
from .model import ModelParams, StarTree2, load_params, parse_newick, stationary_mean_length
from .simulate import (
    SimConfig,
    fasta_text,
    length_table_csv,
    pairs_csv,
    sample_leaf_pairs,
    simulate_trees,
)

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model and output")
    g.add_argument("--lambda", dest="lam", type=float, help="insertion rate")
    g.add_argument("--mu", type=float, help="deletion rate (default 1)")
    g.add_argument("--nu", type=float, help="substitution rate (default 0)")
    g.add_argument("--pi0", type=float, help="frequency of digit 0 (default 0.5)")
    g.add_argument("--config", type=Path, help="JSON file with lambda, mu, nu, pi0, pi1")
    g.add_argument("--out", type=Path, help="output file (default stdout)")
    g.add_argument("--format", choices=("csv", "json"), help="output format")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--threads", type=int,
                   help="worker threads (default $TKF_THREADS or all cores)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="tkflen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("simulate", parents=[common], help="simulate leaf sequences or lengths")
    where = p.add_mutually_exclusive_group(required=True)
    where.add_argument("--tree", help="Newick string or path to a Newick file")
    where.add_argument("--star-height", type=float, help="two-leaf star tree of this height")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--lengths-only", action="store_true",
                   help="simulate the length chain only (star trees)")
    p.add_argument("--stream-id", type=int, default=0)

    p = sub.add_parser("pmf", parents=[common], help="leaf length law given the root length")
    p.add_argument("--M", type=int, required=True, help="root length")
    p.add_argument("--t", type=float, required=True, help="edge length")
    p.add_argument("--with-immortal", action="store_true")
    p.add_argument("--method", choices=("dp", "mixture", "sweep"), default="dp")

    p = sub.add_parser("joint", parents=[common], help="joint law of star-tree leaf lengths")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--eps", type=float, default=1e-8)

    p = sub.add_parser("tv-curve", parents=[common], help="TV distance along a lambda grid")
    p.add_argument("--h1", type=float, required=True)
    p.add_argument("--h2", type=float, required=True)
    p.add_argument("--lambdas", type=_float_list, required=True)
    p.add_argument("--eps", type=float, default=1e-6)

    p = sub.add_parser("estimate", parents=[common], help="distance estimates from length pairs")
    p.add_argument("--pairs", required=True, help="CSV with n1,n2 or replicate,leaf,length")
    p.add_argument("--single", action="store_true", help="one estimate per pair")
    p.add_argument("--mean-length", type=float,
                   help="stationary mean length for --single (default from --lambda, else pooled)")

    p = sub.add_parser("certify", parents=[common], help="overlap certificate over the root window")
    p.add_argument("--h1", type=float, required=True)
    p.add_argument("--h2", type=float, required=True)
    p.add_argument("--c1", type=float, default=0.5)
    p.add_argument("--c2", type=float, default=2.0)
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--eps", type=float, default=1e-6)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    p.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")],
                   help="comma-separated criterion numbers")
    return parser


def _params(args, required: bool = True) -> ModelParams | None:
    base = load_params(args.config).to_dict() if args.config else {}
    for key, val in (("lambda", args.lam), ("mu", args.mu), ("nu", args.nu), ("pi0", args.pi0)):
        if val is not None:
            base[key] = val
    if "pi0" in base and args.pi0 is not None:
        base.pop("pi1", None)
    if "lambda" not in base:
        if required:
            raise UsageError("--lambda (or --config) is required")
        return None
    return ModelParams.from_dict(base)


def _threads(args) -> int | None:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return args.threads
    env = os.environ.get("TKF_THREADS")
    return int(env) if env else None


def _cmd_simulate(args) -> str:
    params = _params(args)
    if args.replicates < 0:
        raise UsageError("--replicates must be non-negative")
    cfg = SimConfig(seed=args.seed, stream_id=args.stream_id, threads=_threads(args))
    if args.lengths_only:
        if args.star_height is None:
            raise UsageError("--lengths-only needs --star-height")
        if args.replicates == 0:
            return csv_text(["replicate", "leaf", "length"], [])
        pairs = sample_leaf_pairs(params, StarTree2(args.star_height), args.replicates, cfg)
        return pairs_csv(pairs) if args.format != "json" else json_text(
            {"n1": pairs[:, 0].tolist(), "n2": pairs[:, 1].tolist()})
    if args.tree is not None:
        text = Path(args.tree).read_text() if Path(args.tree).is_file() else args.tree
        tree = parse_newick(text)
    else:
        tree = StarTree2(args.star_height).to_tree()
    reps = simulate_trees(params, tree, args.replicates, cfg)
    if args.format == "csv":
        return length_table_csv(reps)
    if args.format == "json":
        return json_text([{name: str(seq) for name, seq in leaves.items()} for leaves in reps])
    return fasta_text(reps)


def _cmd_pmf(args) -> str:
    law = leaf_length_pmf_given_root(_params(args), args.t, args.M,
                                     include_immortal=args.with_immortal, method=args.method)
    return law.to_json() if args.format == "json" else law.to_csv()


def _cmd_joint(args) -> str:
    law = joint_pair_law(_params(args), args.h, eps=args.eps)
    return law.to_json() if args.format == "json" else law.to_csv()


def _cmd_tv_curve(args) -> str:
    base = _params(args, required=False) or ModelParams(0.5, args.mu or 1.0)
    rep = tv_curve(base, args.h1, args.h2, args.lambdas, args.eps, threads=_threads(args) or 1)
    return rep.to_json() if args.format == "json" else rep.to_csv()


def _cmd_estimate(args) -> str:
    X = read_pairs_csv(args.pairs)
    if not args.single:
        est = LengthDistanceEstimator().fit(X).estimate_
        if args.format == "csv":
            d = est.to_dict()
            return csv_text(list(d), [list(d.values())])
        return json_text(est.to_dict())
    params = _params(args, required=False)
    if args.mean_length is not None:
        L = args.mean_length
    elif params is not None:
        L = stationary_mean_length(params)
    else:
        L = float(np.mean(X))
    thetas, failures = single_pair_thetas(X, L)
    if args.format == "csv":
        rows = ((i, int(a), int(b), float(th)) for i, ((a, b), th) in enumerate(zip(X, thetas)))
        return csv_text(["pair", "n1", "n2", "theta_hat"], rows)
    ok = thetas[~np.isnan(thetas)]
    summary = {"mean_length": L, "n_pairs": int(len(X)), "failures": failures}
    if len(ok):
        q1, med, q3 = np.percentile(ok, [25, 50, 75])
        summary.update(median=float(med), iqr=float(q3 - q1))
    summary["theta_hat"] = [None if np.isnan(v) else float(v) for v in thetas]
    return json_text(summary)


def _cmd_certify(args) -> str:
    params = _params(args)
    rep = proof_window_report(params, args.h1, args.h2, params.lam, args.c1, args.c2,
                              args.K, eps=args.eps)
    return rep.to_csv() if args.format == "csv" else rep.to_json()


def _cmd_verify(args):
    from .acceptance import run_criteria

    lines = []
    live = args.out is None and args.format != "json"
    results = run_criteria(args.only, echo=(lambda s: print(s, flush=True)) if live else None)
    for r in results:
        lines.append(r.line())
    if args.format == "json":
        text = json_text([{"number": r.number, "name": r.name, "passed": r.passed,
                           "detail": r.detail, "seconds": r.seconds, "limit": r.limit}
                          for r in results])
    else:
        text = "\n".join(lines) + "\n"
    return text, all(r.passed for r in results)


COMMANDS = {
    "simulate": _cmd_simulate,
    "pmf": _cmd_pmf,
    "joint": _cmd_joint,
    "tv-curve": _cmd_tv_curve,
    "estimate": _cmd_estimate,
    "certify": _cmd_certify,
    "verify": _cmd_verify,
}


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        out.write_bytes(text.encode())


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail("UsageError", str(exc), 2)
    except (TKFError, ValueError, ArithmeticError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    if args.command == "verify":
        text, ok = result
        if not (args.out is None and args.format != "json"):
            _emit(text, args.out)
        return 0 if ok else 1
    _emit(result, args.out)
    return 0


def run(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
