"""Exchange markets, allocations, and the IR / Pareto verifiers.

Good types are the integers ``0..k-1``. Each agent owns one copy of its
endowed type and holds a strict ranking over all ``k`` types (most preferred
first). An allocation hands every agent one good type while preserving the
number of copies of each type.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

BRUTE_FORCE_MAX_AGENTS = 8


@dataclass(frozen=True)
class Agent:
    index: int
    endowment: int
    ranking: tuple[int, ...]


@dataclass(frozen=True)
class ExchangeMarket:
    """An exchange market with ``k`` good types and one agent per good copy."""

    k: int
    agents: tuple[Agent, ...]

    @classmethod
    def from_lists(
        cls, k: int, endowments: Sequence[int], rankings: Sequence[Sequence[int]]
    ) -> ExchangeMarket:
        if len(endowments) != len(rankings):
            raise ValueError("endowments and rankings must have equal length")
        agents = tuple(
            Agent(i, int(g), tuple(int(r) for r in ranking))
            for i, (g, ranking) in enumerate(zip(endowments, rankings))
        )
        return cls(int(k), agents)

    @property
    def n(self) -> int:
        return len(self.agents)

    @cached_property
    def endowments(self) -> tuple[int, ...]:
        return tuple(a.endowment for a in self.agents)

    @cached_property
    def counts(self) -> tuple[int, ...]:
        """Number of copies ``n_j`` of each good type."""
        c = Counter(self.endowments)
        return tuple(c.get(j, 0) for j in range(self.k))

    @cached_property
    def rank(self) -> np.ndarray:
        """``rank[i, j]`` is the 0-based position of type ``j`` in agent ``i``'s ranking."""
        out = np.empty((self.n, self.k), dtype=np.int64)
        for a in self.agents:
            out[a.index, list(a.ranking)] = np.arange(self.k)
        return out

    def prefers(self, i: int, a: int, b: int) -> bool:
        """True iff agent ``i`` strictly prefers type ``a`` to type ``b``."""
        return bool(self.rank[i, a] < self.rank[i, b])

    def weakly_prefers(self, i: int, a: int, b: int) -> bool:
        return bool(self.rank[i, a] <= self.rank[i, b])

    def neighbor_difference(self, other: ExchangeMarket) -> list[int]:
        """Indices of agents whose (endowment, ranking) differ between the markets."""
        if self.k != other.k or self.n != other.n:
            raise ValueError("markets have different shapes")
        return [
            a.index
            for a, b in zip(self.agents, other.agents)
            if (a.endowment, a.ranking) != (b.endowment, b.ranking)
        ]

    def is_neighbor(self, other: ExchangeMarket) -> bool:
        return len(self.neighbor_difference(other)) == 1


@dataclass(frozen=True)
class Allocation:
    """``goods[i]`` is the good type handed to agent ``i``."""

    goods: tuple[int, ...]

    @classmethod
    def identity(cls, market: ExchangeMarket) -> Allocation:
        return cls(market.endowments)

    def __getitem__(self, i: int) -> int:
        return self.goods[i]

    def __len__(self) -> int:
        return len(self.goods)

    def as_dict(self) -> dict[int, int]:
        return dict(enumerate(self.goods))


def validate_market(m: ExchangeMarket) -> str | None:
    """Return ``None`` if the market is well formed, otherwise a description
    of the first violated invariant."""
    if m.k < 1:
        return f"k must be positive, got {m.k}"
    full = set(range(m.k))
    for pos, a in enumerate(m.agents):
        if a.index != pos:
            return f"agent at position {pos} has index {a.index}"
        if not 0 <= a.endowment < m.k:
            return f"agent {a.index}: endowment {a.endowment} outside [0, {m.k})"
        if len(a.ranking) != m.k or set(a.ranking) != full:
            return f"agent {a.index}: ranking {list(a.ranking)} is not a permutation of [0, {m.k})"
    if sum(m.counts) != m.n:
        return "per-type counts do not sum to n"
    return None


def check_market(m: ExchangeMarket) -> None:
    problem = validate_market(m)
    if problem is not None:
        raise ValueError(f"invalid market: {problem}")


def check_allocation(m: ExchangeMarket, a: Allocation) -> None:
    if len(a) != m.n:
        raise ValueError(f"allocation covers {len(a)} agents, market has {m.n}")
    if any(not 0 <= g < m.k for g in a.goods):
        raise ValueError("allocation uses an unknown good type")
    c = Counter(a.goods)
    for j, n_j in enumerate(m.counts):
        if c.get(j, 0) != n_j:
            raise ValueError(
                f"allocation hands out {c.get(j, 0)} copies of type {j}, market has {n_j}"
            )


def is_ir(m: ExchangeMarket, a: Allocation) -> bool:
    """Every agent weakly prefers what it receives to what it brought."""
    check_allocation(m, a)
    return all(m.weakly_prefers(i, a[i], g) for i, g in enumerate(m.endowments))


def _copy_types(m: ExchangeMarket) -> np.ndarray:
    return np.repeat(np.arange(m.k), m.counts)


def dominance_gap(m: ExchangeMarket, a: Allocation) -> int:
    """Largest number of agents that some allocation can strictly improve
    while leaving nobody worse off than under ``a``.

    Solved as an assignment of agents to individual good copies: an agent may
    take a copy only if it weakly prefers that type to its current good, and
    earns 1 when the preference is strict.
    """
    check_allocation(m, a)
    if m.n == 0:
        return 0
    copies = _copy_types(m)
    current = m.rank[np.arange(m.n), list(a.goods)][:, None]
    offered = m.rank[:, copies]
    weights = np.where(offered < current, 1.0, 0.0)
    weights[offered > current] = -np.inf
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return int(round(weights[rows, cols].sum()))


def _distinct_allocations(m: ExchangeMarket) -> Iterable[tuple[int, ...]]:
    return set(itertools.permutations(m.endowments))


def brute_force_po(m: ExchangeMarket, a: Allocation) -> bool:
    """Exact Pareto optimality by enumerating every allocation (small markets only)."""
    if m.n > BRUTE_FORCE_MAX_AGENTS:
        raise ValueError(
            f"brute force limited to {BRUTE_FORCE_MAX_AGENTS} agents, got {m.n}"
        )
    check_allocation(m, a)
    for other in _distinct_allocations(m):
        weakly = all(m.weakly_prefers(i, other[i], a[i]) for i in range(m.n))
        if weakly and any(m.prefers(i, other[i], a[i]) for i in range(m.n)):
            return False
    return True


def brute_force_gap(m: ExchangeMarket, a: Allocation) -> int:
    """Enumerative counterpart of :func:`dominance_gap` for small markets."""
    if m.n > BRUTE_FORCE_MAX_AGENTS:
        raise ValueError(
            f"brute force limited to {BRUTE_FORCE_MAX_AGENTS} agents, got {m.n}"
        )
    check_allocation(m, a)
    best = 0
    for other in _distinct_allocations(m):
        if all(m.weakly_prefers(i, other[i], a[i]) for i in range(m.n)):
            best = max(best, sum(m.prefers(i, other[i], a[i]) for i in range(m.n)))
    return best


# -- file formats -----------------------------------------------------------


def format_market(m: ExchangeMarket) -> str:
    lines = [f"{m.k} {m.n}"]
    lines += [" ".join(map(str, (a.endowment, *a.ranking))) for a in m.agents]
    return "\n".join(lines) + "\n"


def parse_market(text: str) -> ExchangeMarket:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise ValueError("empty market file")
    try:
        k, n = (int(x) for x in rows[0])
        body = [[int(x) for x in r] for r in rows[1:]]
    except ValueError as exc:
        raise ValueError(f"malformed market file: {exc}") from None
    if len(body) != n:
        raise ValueError(f"header declares {n} agents, found {len(body)}")
    for lineno, r in enumerate(body, start=2):
        if len(r) != k + 1:
            raise ValueError(f"line {lineno}: expected {k + 1} fields, got {len(r)}")
    return ExchangeMarket.from_lists(k, [r[0] for r in body], [r[1:] for r in body])


def read_market(path: str | Path) -> ExchangeMarket:
    path = Path(path)
    try:
        return parse_market(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_market(m: ExchangeMarket, path: str | Path) -> None:
    Path(path).write_text(format_market(m), encoding="utf-8")


def format_allocation(a: Allocation) -> str:
    return "".join(f"{i} {g}\n" for i, g in enumerate(a.goods))


def parse_allocation(text: str) -> Allocation:
    pairs = {}
    for lineno, ln in enumerate(text.splitlines(), start=1):
        if not ln.strip():
            continue
        fields = ln.split()
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected 'agent good'")
        i, g = int(fields[0]), int(fields[1])
        if i in pairs:
            raise ValueError(f"line {lineno}: agent {i} listed twice")
        pairs[i] = g
    if sorted(pairs) != list(range(len(pairs))):
        raise ValueError("allocation must list agents 0..n-1 exactly once")
    return Allocation(tuple(pairs[i] for i in range(len(pairs))))


def read_allocation(path: str | Path) -> Allocation:
    path = Path(path)
    try:
        return parse_allocation(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_allocation(a: Allocation, path: str | Path) -> None:
    Path(path).write_text(format_allocation(a), encoding="utf-8")
