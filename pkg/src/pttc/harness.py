"""Experiment runner, CSV reporting, and the Monte-Carlo marginal-DP audit."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Sequence

from statsmodels.stats.proportion import proportion_confint

from .engine import PttcConfig, run_exact_ttc, run_pttc
from .instances import GeneratorSpec, gen_lb_marginal
from .market import Allocation, ExchangeMarket, dominance_gap, is_ir, read_market
from .privacy import PrivacyBudget

CSV_COLUMNS = (
    "row",
    "n",
    "k",
    "epsilon",
    "seed",
    "dominance_gap",
    "gap_fraction",
    "ir",
    "rounds",
    "cycles",
    "aborted",
    "max_abs_noise",
    "E",
    "noise_bound_held",
    "pareto_ceiling",
)

ZERO_NOISE_ENV = "PTTC_ZERO_NOISE"
DEFAULT_TRIALS = 1000
DEFAULT_AUDIT_TRIALS = 100_000
DEFAULT_SLACK = 0.05
# Additive (Laplace) smoothing applied to the reported audit ratio only.
AUDIT_SMOOTHING = 1


def zero_noise_from_env() -> bool:
    return os.environ.get(ZERO_NOISE_ENV, "") not in ("", "0")


def trial_seed(base_seed: int, trial: int) -> int:
    return base_seed ^ trial


def pareto_ceiling(k: int, E: float) -> float:
    """Worst-case dominance gap when all noise stays within ``E``.

    Each deletion strands fewer than ``D = k(3E + 1)`` agents, and the
    stranding compounds over ``k(k-1)/2 + k`` type-round pairs.
    """
    D = k * (3 * E + 1)
    return D * (k * (k - 1) / 2 + k)


# -- single trials ----------------------------------------------------------


def run_trial(
    market: ExchangeMarket, budget: PrivacyBudget | None, seed: int, zero_noise: bool = False
) -> dict:
    """One engine run scored against the exact Pareto verifier."""
    result = run_pttc(market, PttcConfig(budget, seed, zero_noise))
    trace = result.trace
    gap = dominance_gap(market, result.allocation)
    return {
        "n": market.n,
        "k": market.k,
        "epsilon": budget.epsilon if budget is not None else math.inf,
        "seed": seed,
        "dominance_gap": gap,
        "gap_fraction": gap / market.n,
        "ir": int(is_ir(market, result.allocation)),
        "rounds": trace.rounds,
        "cycles": len(trace.cycles),
        "aborted": int(trace.aborted),
        "max_abs_noise": trace.max_abs_noise,
        "E": trace.E,
        "noise_bound_held": int(trace.noise_bound_held),
        "pareto_ceiling": pareto_ceiling(market.k, trace.E),
    }


# -- experiments ------------------------------------------------------------


@dataclass
class ExperimentSpec:
    """What to run. Exactly one of ``market_path`` / ``generator`` is set.

    ``mode`` is ``single``, ``eps-sweep`` (``grid`` holds epsilons) or
    ``n-sweep`` (``grid`` holds market sizes; generator sources only). Unset
    deltas and beta default to ``1/n^3``. A random generator without a fixed
    seed draws a fresh market per trial from the trial seed.
    """

    epsilon: float = 1.0
    market_path: str | None = None
    generator: GeneratorSpec | None = None
    delta1: float | None = None
    delta2: float | None = None
    beta: float | None = None
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    mode: str = "single"
    grid: Sequence[float] = field(default_factory=tuple)
    zero_noise: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if (self.market_path is None) == (self.generator is None):
            raise ValueError("exactly one of market_path and generator must be given")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if self.mode not in ("single", "eps-sweep", "n-sweep"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode != "single" and not self.grid:
            raise ValueError(f"mode {self.mode} needs a nonempty grid")
        if self.mode == "n-sweep" and self.generator is None:
            raise ValueError("n-sweep needs a generator source")

    def budget(self, epsilon: float, n: int, k: int) -> PrivacyBudget:
        default = PrivacyBudget.default(epsilon, n, k)
        return PrivacyBudget(
            epsilon,
            self.delta1 if self.delta1 is not None else default.delta1,
            self.delta2 if self.delta2 is not None else default.delta2,
            self.beta if self.beta is not None else default.beta,
            k,
        )


def _trial_job(job: tuple) -> dict:
    source, epsilon, spec, seed = job
    market = source if isinstance(source, ExchangeMarket) else source.build(seed)
    budget = None if spec.zero_noise else spec.budget(epsilon, market.n, market.k)
    return run_trial(market, budget, seed, spec.zero_noise)


def _map(fn: Callable, jobs: Iterable, workers: int) -> list:
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=64))


def aggregate(rows: Sequence[dict]) -> dict:
    """Mean of every numeric column; ``row`` is labelled ``mean``."""
    out = {"row": "mean"}
    for col in CSV_COLUMNS[1:]:
        out[col] = sum(r[col] for r in rows) / len(rows)
    return out


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """Per-trial rows followed by one ``mean`` row per grid point."""
    fixed = read_market(spec.market_path) if spec.market_path else None
    if spec.generator is not None and (
        spec.generator.kind != "random" or spec.generator.seed is not None
    ):
        fixed = spec.generator.build()

    if spec.mode == "single":
        points = [(spec.epsilon, spec.generator)]
    elif spec.mode == "eps-sweep":
        points = [(float(e), spec.generator) for e in spec.grid]
    else:
        points = [(spec.epsilon, spec.generator.with_(n=int(n))) for n in spec.grid]

    rows: list[dict] = []
    for epsilon, gen in points:
        if spec.mode == "n-sweep":
            source = gen if gen.kind == "random" and gen.seed is None else gen.build()
        else:
            source = fixed if fixed is not None else gen
        jobs = [
            (source, epsilon, spec, trial_seed(spec.seed, t)) for t in range(spec.trials)
        ]
        block = _map(_trial_job, jobs, spec.workers)
        for t, row in enumerate(block):
            row["row"] = t
        rows += block
        rows.append(aggregate(block))
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(rows: Sequence[dict], path: str | Path) -> None:
    path = Path(path)
    try:
        path.write_text(format_csv(rows), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror}") from exc


# -- marginal-DP audit ------------------------------------------------------

Mechanism = Callable[[ExchangeMarket, int], Allocation]


def _pttc_mech(budget: PrivacyBudget, market: ExchangeMarket, seed: int) -> Allocation:
    return run_pttc(market, PttcConfig(budget, seed)).allocation


def _ttc_mech(market: ExchangeMarket, seed: int) -> Allocation:
    return run_exact_ttc(market, seed)


def _identity_mech(market: ExchangeMarket, seed: int) -> Allocation:
    return Allocation.identity(market)


def pttc_mechanism(budget: PrivacyBudget) -> Mechanism:
    return partial(_pttc_mech, budget)


exact_ttc_mechanism: Mechanism = _ttc_mech
identity_mechanism: Mechanism = _identity_mech


@dataclass(frozen=True)
class DpAuditResult:
    agent: int
    good: int
    trials: int
    epsilon: float
    delta: float
    slack: float
    count: int
    count_prime: int
    ci: tuple[float, float]
    ci_prime: tuple[float, float]
    passed: bool

    @property
    def p(self) -> float:
        return self.count / self.trials

    @property
    def p_prime(self) -> float:
        return self.count_prime / self.trials

    @property
    def smoothed_ratio(self) -> float:
        """``(c + s) / (c' + s)`` with additive smoothing ``s``; both sides share a denominator."""
        return (self.count + AUDIT_SMOOTHING) / (self.count_prime + AUDIT_SMOOTHING)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} agent={self.agent} good={self.good} trials={self.trials} "
            f"p={self.p:.6f} [{self.ci[0]:.6f}, {self.ci[1]:.6f}] "
            f"p'={self.p_prime:.6f} [{self.ci_prime[0]:.6f}, {self.ci_prime[1]:.6f}] "
            f"ratio={self.smoothed_ratio:.4f} (smoothing +{AUDIT_SMOOTHING}) "
            f"bound=e^{self.epsilon:g} delta={self.delta:.3g} slack={self.slack:g}"
        )


def _event_job(job: tuple) -> bool:
    mech, market, agent, good, seed = job
    return mech(market, seed)[agent] == good


def _count(mech, market, agent, good, seeds, workers) -> int:
    jobs = [(mech, market, agent, good, s) for s in seeds]
    return sum(_map(_event_job, jobs, workers))


def wilson(count: int, trials: int) -> tuple[float, float]:
    lo, hi = proportion_confint(count, trials, alpha=0.05, method="wilson")
    return float(lo), float(hi)


def dp_audit(
    mech: Mechanism,
    x: ExchangeMarket,
    x_prime: ExchangeMarket,
    agent: int,
    good: int,
    trials: int = DEFAULT_AUDIT_TRIALS,
    epsilon: float = 1.0,
    delta: float = 0.0,
    slack: float = DEFAULT_SLACK,
    seed: int = 0,
    workers: int = 1,
) -> DpAuditResult:
    """Estimate how often ``agent`` receives ``good`` on two neighbouring markets.

    The audit passes when neither estimate exceeds ``e^epsilon`` times the
    other by more than ``delta + slack``, comparing the lower Wilson bound of
    one side against the upper Wilson bound of the other. Passing is a
    necessary condition for marginal DP on this event, not a proof of it.
    """
    diff = x.neighbor_difference(x_prime)
    if len(diff) != 1:
        raise ValueError(f"markets must differ in exactly one agent, they differ in {diff}")
    if diff[0] == agent:
        raise ValueError(f"audited agent {agent} is the agent whose data changes")
    if trials < 1:
        raise ValueError("trials must be at least 1")

    c = _count(mech, x, agent, good, (trial_seed(seed, t) for t in range(trials)), workers)
    c_prime = _count(
        mech, x_prime, agent, good,
        (trial_seed(seed, t) for t in range(trials, 2 * trials)), workers,
    )
    ci, ci_prime = wilson(c, trials), wilson(c_prime, trials)
    scale = math.exp(epsilon)
    passed = (
        ci[0] <= scale * ci_prime[1] + delta + slack
        and ci_prime[0] <= scale * ci[1] + delta + slack
    )
    return DpAuditResult(
        agent, good, trials, epsilon, delta, slack, c, c_prime, ci, ci_prime, passed
    )


def lb_marginal_pair(n: int, k: int) -> tuple[ExchangeMarket, ExchangeMarket]:
    """Neighbouring attack markets ``(b=1, b=0)``."""
    return gen_lb_marginal(n, k, 1), gen_lb_marginal(n, k, 0)
