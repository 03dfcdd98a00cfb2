"""Command line front end.

Exit codes: 0 on success, 1 when a requested bound check fails, 2 on bad
input (unreadable instance, malformed flags).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .adversary import MpcResponder, UniformResponder, optimal_witness, tree_adversary
from .ccfl import CcflInstance
from .core import violation
from .instances import OmpcInstance, ParseError, emit_instance, parse_instance
from .oracle import brute_force_zstar, ccfl_opt1, ompc_opt
from .rounding import z_epochs
from .runner import (
    ExperimentConfig,
    check_ompc_run,
    ompc_sigma,
    report_to_csv,
    run_experiment,
)
from .solver import OnlineOmpcSolver

_E = float(np.e)


def _load(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_instance(fh.read())
    except OSError as exc:
        raise SystemExit(f"cannot read {path}: {exc}") from None


def _cmd_solve_ompc(args) -> int:
    inst = _load(args.instance)
    if not isinstance(inst, OmpcInstance):
        print("solve-ompc needs a packing/covering instance", file=sys.stderr)
        return 2
    solver = OnlineOmpcSolver(inst.system)
    for row in inst.rows:
        solver.offer(row)
    sol = solver.finish()
    print(f"lambda {sol.lambda_value!r}")
    print(f"trials {len(sol.trials)}")
    print(f"phases {sum(rec.phases for rec in sol.trials)}")
    if args.bound_check:
        opt = ompc_opt(inst.system, list(inst.rows))
        sigma = ompc_sigma(inst)
        bound = 32.0 * sigma * math.log(_E * inst.system.m)
        print(f"oracle {opt.value!r}")
        print(f"bound {bound!r}")
        violations = check_ompc_run(inst, sol, opt.value, args.instance)
        for v in violations:
            print(f"VIOLATION {v}", file=sys.stderr)
        if violations:
            return 1
    return 0


def _cmd_adversary(args) -> int:
    if args.algorithm == "mpc":
        factory = MpcResponder
    else:
        factory = lambda system: UniformResponder(system.n)  # noqa: E731
    result = tree_adversary(args.m, args.d, factory)
    witness = optimal_witness(result)
    inst = OmpcInstance(result.system, result.transcript)
    lam = result.algorithm_value()
    print(f"lambda {lam!r}")
    print(f"lower_bound {result.lower_bound!r}")
    print(f"witness_violation {violation(result.system, witness)!r}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(emit_instance(inst))
        print(f"instance -> {args.out}")
    if args.bound_check and lam < result.lower_bound - 1e-9:
        print("VIOLATION algorithm value below the forced bound", file=sys.stderr)
        return 1
    return 0


def _cmd_solve_ccfl(args) -> int:
    inst = _load(args.instance)
    if not isinstance(inst, CcflInstance):
        print("solve-ccfl needs a facility/client instance", file=sys.stderr)
        return 2
    result = z_epochs(inst, seed=args.seed, epoch_constant=args.epoch_constant)
    print(f"epochs {len(result.epochs)}")
    print(f"final_z {result.final_z!r}")
    print(f"per_epoch_total {result.per_epoch_total!r}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for rec in result.decision_log:
                fh.write(json.dumps(rec) + "\n")
        print(f"decision log -> {args.out}")
    if args.bound_check:
        try:
            zstar = brute_force_zstar(inst)
        except ValueError:
            print("bound-check skipped: instance beyond brute-force guard")
            return 0
        cap = (
            args.epoch_constant
            * math.log(_E * inst.m * inst.n) ** 2
            * math.log(2.0 * inst.mu * inst.m * inst.n * inst.rho)
            * 4.0
            * zstar
        )
        print(f"zstar {zstar!r}")
        print(f"bound {cap!r}")
        if result.per_epoch_total > cap:
            print("VIOLATION integral cost above the epoch budget", file=sys.stderr)
            return 1
    return 0


def _cmd_round(args) -> int:
    inst = _load(args.instance)
    if not isinstance(inst, CcflInstance):
        print("round needs a facility/client instance", file=sys.stderr)
        return 2
    result = z_epochs(inst, seed=args.seed, epoch_constant=args.epoch_constant)
    for rec in result.decision_log:
        line = json.dumps(rec)
        print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for rec in result.decision_log:
                fh.write(json.dumps(rec) + "\n")
    return 0


def _cmd_oracle(args) -> int:
    inst = _load(args.instance)
    if isinstance(inst, OmpcInstance):
        opt = ompc_opt(inst.system, list(inst.rows))
        print(f"opt {opt.value!r}")
        print(f"dual {opt.dual_value!r}")
        return 0
    if args.brute:
        print(f"zstar {brute_force_zstar(inst)!r}")
        return 0
    if args.z is None:
        print("oracle on an assignment instance needs --z or --brute", file=sys.stderr)
        return 2
    sol = ccfl_opt1(inst, args.z)
    if sol.status != "optimal":
        print(f"status {sol.status}")
        return 0
    print(f"opt1 {sol.objective!r}")
    return 0


def _cmd_suite(args) -> int:
    config = ExperimentConfig(
        suite=args.name,
        seed=args.seed,
        count=args.count,
        reps=args.reps,
        out=args.out,
        bound_check=args.bound_check,
        epoch_constant=args.epoch_constant,
    )
    report = run_experiment(config)
    if not args.out:
        sys.stdout.write(report_to_csv(report))
    for v in report.violations:
        print(f"VIOLATION {v}", file=sys.stderr)
    return 0 if report.passed else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixpc",
        description="online packing/covering and fixed-charge assignment toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, instance=True):
        if instance:
            p.add_argument("--instance", required=True, help="instance file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output file")
        p.add_argument("--bound-check", action="store_true", dest="bound_check")
        p.add_argument(
            "--epoch-constant",
            type=float,
            default=512.0,
            dest="epoch_constant",
            help="budget constant K for the cost-guess doubling",
        )

    p = sub.add_parser("solve-ompc", help="stream covering rows through the solver")
    common(p)
    p.set_defaults(fn=_cmd_solve_ompc)

    p = sub.add_parser("adversary", help="generate and play a tree-adversary run")
    common(p, instance=False)
    p.add_argument("--m", type=int, required=True, help="leaves (power of two)")
    p.add_argument("--d", type=int, required=True, help="block size (power of two)")
    p.add_argument("--algorithm", choices=("mpc", "uniform"), default="mpc")
    p.set_defaults(fn=_cmd_adversary)

    p = sub.add_parser("solve-ccfl", help="full integral pipeline with Z doubling")
    common(p)
    p.set_defaults(fn=_cmd_solve_ccfl)

    p = sub.add_parser("round", help="emit the per-client rounding decision log")
    common(p)
    p.set_defaults(fn=_cmd_round)

    p = sub.add_parser("oracle", help="offline optimum of an instance")
    common(p)
    p.add_argument("--z", type=float, default=None, help="cost guess for opt1")
    p.add_argument("--brute", action="store_true", help="brute-force total cost")
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("suite", help="run a named experiment suite")
    common(p, instance=False)
    p.add_argument(
        "--name",
        required=True,
        choices=("ompc-adversary", "ompc-random", "ccfl-random", "ccfl-mc"),
    )
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.set_defaults(fn=_cmd_suite)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, SystemExit) as exc:
        if isinstance(exc, SystemExit):
            if isinstance(exc.code, int):
                return exc.code
            print(exc, file=sys.stderr)
            return 2
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
