"""Command line entry point: ``pttc run``, ``pttc audit``, ``pttc oracle``."""

from __future__ import annotations

import argparse
import sys

from .engine import PttcConfig, format_trace, run_exact_ttc, run_pttc
from .harness import (
    DEFAULT_AUDIT_TRIALS,
    DEFAULT_SLACK,
    DEFAULT_TRIALS,
    ExperimentSpec,
    dp_audit,
    exact_ttc_mechanism,
    format_csv,
    pttc_mechanism,
    run_experiment,
    write_csv,
    zero_noise_from_env,
)
from .instances import parse_generator_spec
from .market import format_allocation, read_market
from .oracles import ip_allocate


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _add_budget(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta1", type=float, default=None, help="default 1/n^3")
    p.add_argument("--delta2", type=float, default=None, help="default 1/n^3")
    p.add_argument("--beta", type=float, default=None, help="default 1/n^3")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pttc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the private mechanism and score each trial")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--market", help="market file")
    src.add_argument("--gen", help="generator spec, e.g. random:n=30,k=4")
    _add_budget(run)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    run.add_argument("--out", help="CSV path (default: stdout)")
    sweep = run.add_mutually_exclusive_group()
    sweep.add_argument("--eps-grid", type=_floats, help="comma-separated epsilons")
    sweep.add_argument("--n-grid", type=_floats, help="comma-separated market sizes")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--trace", help="write the event trace of trial 0 here")

    audit = sub.add_parser("audit", help="Monte-Carlo marginal-DP audit on an attack pair")
    audit.add_argument("--gen", required=True, help="lb_marginal:... or lb_joint:...")
    audit.add_argument("--agent", type=int, required=True, help="0-based audited agent")
    audit.add_argument("--good", type=int, required=True, help="0-based good type")
    _add_budget(audit)
    audit.add_argument("--trials", type=int, default=DEFAULT_AUDIT_TRIALS)
    audit.add_argument("--slack", type=float, default=DEFAULT_SLACK)
    audit.add_argument("--seed", type=int, default=0)
    audit.add_argument("--mech", choices=("pttc", "ttc"), default="pttc")
    audit.add_argument("--workers", type=int, default=1)

    oracle = sub.add_parser("oracle", help="exact non-private allocation")
    oracle.add_argument("--market", required=True)
    oracle.add_argument("--method", choices=("ttc", "ip"), default="ttc")
    oracle.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    mode, grid = "single", ()
    if args.eps_grid:
        mode, grid = "eps-sweep", args.eps_grid
    elif args.n_grid:
        mode, grid = "n-sweep", args.n_grid
    spec = ExperimentSpec(
        epsilon=args.epsilon,
        market_path=args.market,
        generator=parse_generator_spec(args.gen) if args.gen else None,
        delta1=args.delta1,
        delta2=args.delta2,
        beta=args.beta,
        trials=args.trials,
        seed=args.seed,
        mode=mode,
        grid=grid,
        zero_noise=zero_noise_from_env(),
        workers=args.workers,
    )
    rows = run_experiment(spec)
    if args.out:
        write_csv(rows, args.out)
    else:
        sys.stdout.write(format_csv(rows))
    if args.trace:
        market = read_market(args.market) if args.market else spec.generator.build(spec.seed)
        budget = None if spec.zero_noise else spec.budget(args.epsilon, market.n, market.k)
        result = run_pttc(market, PttcConfig(budget, spec.seed, spec.zero_noise))
        with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_trace(result.trace))
    return 0


def _cmd_audit(args) -> int:
    gen = parse_generator_spec(args.gen)
    if gen.kind == "random":
        raise SystemExit("audit needs an attack generator (lb_marginal or lb_joint)")
    x, x_prime = gen.with_(b=1).build(args.seed), gen.with_(b=0).build(args.seed)
    spec = ExperimentSpec(
        epsilon=args.epsilon, generator=gen,
        delta1=args.delta1, delta2=args.delta2, beta=args.beta,
    )
    budget = spec.budget(args.epsilon, x.n, x.k)
    mech = pttc_mechanism(budget) if args.mech == "pttc" else exact_ttc_mechanism
    result = dp_audit(
        mech, x, x_prime, args.agent, args.good,
        trials=args.trials, epsilon=args.epsilon, delta=budget.total_delta,
        slack=args.slack, seed=args.seed, workers=args.workers,
    )
    print(result.summary())
    return 0 if result.passed else 1


def _cmd_oracle(args) -> int:
    market = read_market(args.market)
    allocation = ip_allocate(market) if args.method == "ip" else run_exact_ttc(market, args.seed)
    sys.stdout.write(format_allocation(allocation))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {"run": _cmd_run, "audit": _cmd_audit, "oracle": _cmd_oracle}[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"pttc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
