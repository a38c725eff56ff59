"""Command-line entry point.

Subcommands:
  run             execute a sweep from a JSON config
  oracle-check    certify the channel kernels against the quadrature oracle
  reduce-check    Gaussian-channel identity between the two-module solver
                  and plain AMP on the transformed model
  export-fixture  write a problem directory for cross-language regression
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

from .certify import REL_TOL, run_certification
from .errors import ConfigError, GuampError
from .harness import load_config, run_sweep
from .model import export_problem, generate_problem


def _cmd_run(args):
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    overrides = {}
    if args.out is not None:
        overrides["out_path"] = args.out
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if overrides:
        try:
            cfg = dataclasses.replace(cfg, **overrides)
            from .harness import validate_config

            validate_config(cfg)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2

    t0 = time.perf_counter()
    result = run_sweep(cfg)
    print(
        f"wrote {result.row_count} rows to {result.results_path} "
        f"(+ {result.summary_path}) in {time.perf_counter() - t0:.1f}s",
        flush=True,
    )
    return 0


def _cmd_oracle_check(args):
    t0 = time.perf_counter()
    report = run_certification()
    status = 0
    for op, (err, worst) in report.items():
        ok = err <= REL_TOL
        if not ok:
            status = 1
        print(f"{op}: max rel err {err:.3e} {'OK' if ok else 'FAIL'} (worst at {worst})")
    print(f"oracle-check finished in {time.perf_counter() - t0:.1f}s")
    return status


def _cmd_reduce_check(args):
    from .algorithms import reduction_check

    problem = generate_problem(
        m=256, n=64, rho=0.3, lam=0.1, snr_db=20.0, channel_kind="gaussian",
        seed_key=(args.seed,),
    )
    ext_mean_dev, ext_var_dev, traj_dev = reduction_check(problem, t_max=50)
    print(f"extrinsic mean deviation from U^T y : {ext_mean_dev:.3e}")
    print(f"extrinsic var deviation from sigma^2: {ext_var_dev:.3e}")
    print(f"x trajectory deviation vs transformed-model AMP: {traj_dev:.3e}")
    ok = ext_mean_dev <= 1e-10 and ext_var_dev <= 1e-10 and traj_dev <= 1e-8
    print("reduce-check OK" if ok else "reduce-check FAIL")
    return 0 if ok else 1


def _cmd_export_fixture(args):
    problem = generate_problem(
        m=args.m, n=args.n, rho=args.rho, lam=args.lam, snr_db=args.snr_db,
        channel_kind=args.channel, seed_key=(args.seed,),
    )
    export_problem(problem, args.out, rho=args.rho, snr_db=args.snr_db)
    print(f"wrote fixture to {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="guamp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a Monte Carlo sweep")
    p_run.add_argument("--config", required=True, help="JSON sweep config")
    p_run.add_argument("--out", help="override out_path")
    p_run.add_argument("--trials", type=int, help="override trials")
    p_run.add_argument("--seed", type=int, help="override master_seed")
    p_run.set_defaults(func=_cmd_run)

    p_oc = sub.add_parser("oracle-check", help="certify kernels against the oracle")
    p_oc.set_defaults(func=_cmd_oracle_check)

    p_rc = sub.add_parser("reduce-check", help="Gaussian-channel reduction identity")
    p_rc.add_argument("--seed", type=int, default=20260809)
    p_rc.set_defaults(func=_cmd_reduce_check)

    p_ef = sub.add_parser("export-fixture", help="write a problem directory")
    p_ef.add_argument("--seed", type=int, required=True)
    p_ef.add_argument("--out", required=True)
    p_ef.add_argument("--m", type=int, default=64)
    p_ef.add_argument("--n", type=int, default=16)
    p_ef.add_argument("--rho", type=float, default=0.3)
    p_ef.add_argument("--snr-db", type=float, default=20.0)
    p_ef.add_argument("--lam", type=float, default=0.1)
    p_ef.add_argument("--channel", default="onebit", choices=("onebit", "twobit", "gaussian"))
    p_ef.set_defaults(func=_cmd_export_fixture)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GuampError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
