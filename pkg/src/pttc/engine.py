"""Private top trading cycles, end to end, plus the exact (noise-free) baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .market import Allocation, ExchangeMarket, check_market
from .privacy import PrivacyBudget, eps_prime, noise_bound_E
from .trading_graph import (
    ArcKey,
    NoiseDraw,
    Selection,
    apply_round_noise,
    build_graph,
    cycle_capacity,
    delete_node,
    execute_trade,
    find_cycle,
)


class InvariantViolation(AssertionError):
    """An engine invariant that must hold on every run was broken."""


@dataclass(frozen=True)
class PttcConfig:
    budget: PrivacyBudget | None
    seed: int = 0
    zero_noise: bool = False

    def __post_init__(self) -> None:
        if self.budget is None and not self.zero_noise:
            raise ValueError("a privacy budget is required unless zero_noise is set")


@dataclass(frozen=True)
class CycleRecord:
    round: int
    tau: int
    arcs: tuple[ArcKey, ...]
    capacity: int
    selections: tuple[Selection, ...]


@dataclass
class RunTrace:
    zero_noise: bool
    eps_prime: float
    E: float
    noise: list[NoiseDraw] = field(default_factory=list)
    cycles: list[CycleRecord] = field(default_factory=list)
    deletions: list[tuple[int, int]] = field(default_factory=list)
    aborted: bool = False
    noise_bound_violation: bool = False
    rounds: int = 0

    @property
    def max_abs_noise(self) -> float:
        return max((abs(d.value) for d in self.noise), default=0.0)

    @property
    def noise_bound_held(self) -> bool:
        """Whether every draw stayed within ``E`` (the high-probability event)."""
        return self.max_abs_noise <= self.E

    def cycles_per_round(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for c in self.cycles:
            out[c.round] = out.get(c.round, 0) + 1
        return out


@dataclass(frozen=True)
class PttcResult:
    allocation: Allocation
    trace: RunTrace


def _run(
    m: ExchangeMarket,
    rng: np.random.Generator,
    ep: float,
    E: float,
    zero_noise: bool,
) -> PttcResult:
    check_market(m)
    k = m.k
    trace = RunTrace(zero_noise=zero_noise, eps_prime=ep, E=0.0 if zero_noise else E)
    g = build_graph(m)
    goods: dict[int, int] = {}

    def abort() -> PttcResult:
        trace.aborted = True
        return PttcResult(Allocation.identity(m), trace)

    t = 0
    while g.remaining:
        t += 1
        if t > k:
            raise InvariantViolation(f"round {t} exceeds the bound of {k} rounds")
        trace.rounds = t
        trace.noise.extend(apply_round_noise(g, ep, E, rng, t, zero_noise))

        tau = 0
        while (cycle := find_cycle(g)) is not None:
            tau += 1
            if tau > k * k:
                raise InvariantViolation(f"round {t}: cycle {tau} exceeds {k * k} per round")
            W = cycle_capacity(g, cycle)
            outcome = execute_trade(g, cycle, W, rng)
            if outcome.aborted:
                return abort()
            trace.cycles.append(
                CycleRecord(t, tau, tuple(cycle), W, tuple(outcome.selections))
            )
            goods.update(outcome.assignments)

        deletion = delete_node(g)
        trace.deletions.append((t, deletion.node))
        if not deletion.noise_bound_ok:
            trace.noise_bound_violation = True
            return abort()
        goods.update(deletion.assignments)

    allocation = Allocation(tuple(goods.get(i, a.endowment) for i, a in enumerate(m.agents)))
    return PttcResult(allocation, trace)


def run_pttc(m: ExchangeMarket, cfg: PttcConfig) -> PttcResult:
    """Run private top trading cycles on ``m``.

    The returned allocation is always individually rational: whenever a
    cleared cycle asks more agents to trade than an arc holds, every
    assignment is undone and agents keep their endowments.
    """
    rng = np.random.default_rng(cfg.seed)
    if cfg.zero_noise:
        return _run(m, rng, float("inf"), 0.0, True)
    b = cfg.budget
    if b.k != m.k:
        raise ValueError(f"budget is for k={b.k}, market has k={m.k}")
    return _run(m, rng, eps_prime(b), noise_bound_E(b), False)


def run_exact_ttc(m: ExchangeMarket, rng: np.random.Generator | int | None = None) -> Allocation:
    """Classic grouped top trading cycles: the same loop with no noise.

    A node is deleted only once no agent holding its type is left, so the
    result is individually rational and Pareto optimal.
    """
    return _run(m, np.random.default_rng(rng), float("inf"), 0.0, True).allocation


def _arc(key: ArcKey) -> str:
    return f"{key[0]}>{key[1]}"


def format_trace(trace: RunTrace) -> str:
    """One event per line, in execution order.

    ``NOISE t arc z`` / ``CYCLE t tau arcs W`` / ``SELECT t tau arc agents`` /
    ``DELETE t node`` / ``ABORT``. Arcs are written ``u>v``; lists are
    comma-separated, ``-`` when empty.
    """
    lines = [f"# zero_noise={int(trace.zero_noise)} E={trace.E!r}"]
    cycles_by_round: dict[int, list[CycleRecord]] = {}
    for c in trace.cycles:
        cycles_by_round.setdefault(c.round, []).append(c)
    noise_by_round: dict[int, list[NoiseDraw]] = {}
    for d in trace.noise:
        noise_by_round.setdefault(d.round, []).append(d)
    deletions = dict(trace.deletions)
    for t in range(1, trace.rounds + 1):
        lines += [f"NOISE {t} {_arc(d.arc)} {d.value!r}" for d in noise_by_round.get(t, [])]
        for c in cycles_by_round.get(t, []):
            lines.append(f"CYCLE {t} {c.tau} {','.join(map(_arc, c.arcs))} {c.capacity}")
            for s in c.selections:
                agents = ",".join(map(str, s.agents)) or "-"
                lines.append(f"SELECT {t} {c.tau} {_arc(s.arc)} {agents}")
        if t in deletions:
            lines.append(f"DELETE {t} {deletions[t]}")
    if trace.aborted:
        lines.append("ABORT")
    return "\n".join(lines) + "\n"
