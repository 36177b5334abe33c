"""Command line interface.

Subcommands:

* ``synth``    generate one random instance, solve it, report recovery;
* ``sweep``    success-count sweep over a rank range, emitted as CSV;
* ``solve``    complete a user-supplied triplet problem file;
* ``baseline`` like ``solve`` but with the nuclear-norm baseline.

Exit codes: 0 success, 1 solver did not converge, 2 bad input.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .solver import VARIANTS, SolverConfig, continuation_solve
from .spectral import rank_estimate

__all__ = ["cli_main", "main", "build_parser"]


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("solver")
    g.add_argument("--p", type=float, default=0.5, help="power of the singular value penalty")
    g.add_argument("--lam", type=float, default=1e-6, help="target regularization weight")
    g.add_argument("--lambda0", type=float, default=10.0, help="first continuation stage")
    g.add_argument("--lambda-decay", type=float, default=0.1, help="per-stage shrink factor")
    g.add_argument("--lambda-floor", type=float, default=1e-6, help="smallest stage value")
    g.add_argument("--eps-bar", type=float, default=1e-3, help="stationarity tolerance")
    g.add_argument("--max-outer", type=int, default=5000, help="outer iteration cap per stage")
    g.add_argument("--l-min", type=float, default=1e-2)
    g.add_argument("--l-max", type=float, default=1.0)
    g.add_argument("--tau", type=float, default=2.0, help="backtracking growth factor")
    g.add_argument("--c", type=float, default=1e-4, help="descent margin coefficient")
    g.add_argument("--window", type=int, default=10, help="nonmonotone history length")
    g.add_argument("--eps-tol", type=float, default=1e-6, help="smoothing-level bisection tol")
    parser.add_argument("--json-trace", metavar="PATH", default=None,
                        help="write per-iteration records as JSON lines")


def _config_from_args(args, method: str) -> SolverConfig:
    return SolverConfig(
        variant=method,
        p=args.p,
        lam=args.lam,
        l_min=args.l_min,
        l_max=args.l_max,
        tau=args.tau,
        c=args.c,
        window=args.window,
        eps_bar=args.eps_bar,
        max_outer=args.max_outer,
        eps_tol=args.eps_tol,
    )


def _parse_ranks(text: str) -> list[int]:
    """'start:step:stop' (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"rank range must be start:step:stop, got {text!r}")
        start, step, stop = (int(tok) for tok in parts)
        if step < 1:
            raise ValueError("rank range step must be positive")
        return list(range(start, stop + 1, step))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _cmd_synth(args) -> int:
    spec = harness.InstanceSpec(m=args.m, n=args.n, r=args.rank, sr=args.sr, seed=args.seed)
    problem, truth = harness.gen_instance(spec)
    config = _config_from_args(args, args.method)
    report = harness.run_recovery(
        problem, truth, args.method, config,
        lambda0=args.lambda0, decay=args.lambda_decay, floor=args.lambda_floor,
    )
    print(
        f"instance m={spec.m} n={spec.n} rank={spec.r} sr={spec.sr} "
        f"seed={spec.seed} observed={problem.n_observed}"
    )
    print(
        f"method={args.method} stages={len(report.traces)} iterations={report.iterations} "
        f"converged={report.converged} seconds={report.seconds:.3f}"
    )
    print(f"rel_err={report.rel_err:.17e} success={report.success} rank_estimate={report.rank}")
    if args.json_trace:
        harness.write_trace_jsonl(report.traces, args.json_trace)
    if args.out:
        harness.save_matrix(report.x_star, args.out)
    return 0 if report.converged else 1


def _cmd_sweep(args) -> int:
    ranks = _parse_ranks(args.ranks)
    if not ranks:
        raise ValueError("empty rank list")
    methods = [tok.strip() for tok in args.methods.split(",") if tok.strip()]
    for method in methods:
        if method not in VARIANTS:
            raise ValueError(f"unknown method {method!r}; choose from {VARIANTS}")
    config = _config_from_args(args, methods[0])
    rows = harness.recovery_sweep(
        m=args.m, n=args.n, sr=args.sr, rank_list=ranks, trials=args.trials,
        methods=methods, config=config, base_seed=args.seed,
        lambda0=args.lambda0, decay=args.lambda_decay, floor=args.lambda_floor,
    )
    if args.out:
        harness.write_sweep_csv(rows, args.out)
    else:
        harness.write_sweep_csv(rows, sys.stdout)
    return 0


def _solve_file(args, method: str) -> int:
    problem = harness.load_problem(args.input)
    config = _config_from_args(args, method)
    x0 = problem.masked_matrix()
    x, traces = continuation_solve(
        problem, x0, config,
        lambda0=args.lambda0, decay=args.lambda_decay, floor=args.lambda_floor,
    )
    converged = traces[-1].converged
    print(
        f"problem m={problem.rows} n={problem.cols} observed={problem.n_observed}"
    )
    print(
        f"method={method} stages={len(traces)} iterations={sum(t.iterations for t in traces)} "
        f"converged={converged} rank_estimate={rank_estimate(traces[-1].final_sigma)}"
    )
    harness.save_matrix(x, args.out)
    print(f"recovered matrix written to {args.out}")
    if args.json_trace:
        harness.write_trace_jsonl(traces, args.json_trace)
    return 0 if converged else 1


def _cmd_solve(args) -> int:
    return _solve_file(args, args.method)


def _cmd_baseline(args) -> int:
    return _solve_file(args, "nuclear")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irsvm",
        description="Low-rank matrix completion by iterative reweighted "
        "singular value minimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate and solve one random instance")
    p_synth.add_argument("--m", type=int, default=100)
    p_synth.add_argument("--n", type=int, default=100)
    p_synth.add_argument("--rank", type=int, required=True)
    p_synth.add_argument("--sr", type=float, required=True, help="sampling ratio in (0, 1]")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--method", choices=VARIANTS, default="irsvm1")
    p_synth.add_argument("--out", metavar="PATH", default=None,
                         help="write the recovered matrix as CSV")
    _add_solver_flags(p_synth)
    p_synth.set_defaults(func=_cmd_synth)

    p_sweep = sub.add_parser("sweep", help="recovery sweep over ranks, CSV output")
    p_sweep.add_argument("--m", type=int, default=100)
    p_sweep.add_argument("--n", type=int, default=100)
    p_sweep.add_argument("--sr", type=float, required=True)
    p_sweep.add_argument("--ranks", required=True,
                         help="start:step:stop (inclusive) or comma-separated list")
    p_sweep.add_argument("--trials", type=int, default=5)
    p_sweep.add_argument("--methods", default="irsvm1,irsvm2,nuclear")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--out", metavar="PATH", default=None, help="CSV path (default stdout)")
    _add_solver_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_solve = sub.add_parser("solve", help="complete a triplet problem file")
    p_solve.add_argument("--input", required=True, metavar="PATH")
    p_solve.add_argument("--method", choices=VARIANTS, default="irsvm1")
    p_solve.add_argument("--out", metavar="PATH", default="recovered.csv")
    _add_solver_flags(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_base = sub.add_parser("baseline", help="complete a problem file with the "
                            "nuclear-norm baseline")
    p_base.add_argument("--input", required=True, metavar="PATH")
    p_base.add_argument("--out", metavar="PATH", default="recovered.csv")
    _add_solver_flags(p_base)
    p_base.set_defaults(func=_cmd_baseline)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
