"""The directed trade graph over the good types still on the market.

Every ordered pair of remaining types ``(u, v)``, self-loops included, is an
arc. Its members are the unassigned agents endowed with ``u`` whose favourite
remaining type is ``v``, kept in agent-index order. Exact weights are member
counts; noisy weights are redrawn once per round and decremented as cycles
clear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .market import ExchangeMarket
from .privacy import sample_laplace_array
from .selection import r_select

ArcKey = tuple[int, int]


@dataclass
class Arc:
    tail: int
    head: int
    members: list[int] = field(default_factory=list)
    noisy_weight: float = 0.0

    @property
    def key(self) -> ArcKey:
        return (self.tail, self.head)

    @property
    def exact_weight(self) -> int:
        return len(self.members)

    @property
    def eligible(self) -> bool:
        return math.floor(self.noisy_weight) >= 1


@dataclass(frozen=True)
class NoiseDraw:
    round: int
    arc: ArcKey
    value: float


@dataclass(frozen=True)
class Selection:
    arc: ArcKey
    shift: int | None
    agents: tuple[int, ...]


@dataclass
class TradeOutcome:
    aborted: bool
    assignments: dict[int, int] = field(default_factory=dict)
    selections: list[Selection] = field(default_factory=list)


@dataclass
class Deletion:
    node: int
    noisy_out_sum: float
    noise_bound_ok: bool
    assignments: dict[int, int]


@dataclass
class TradeGraph:
    market: ExchangeMarket
    remaining: list[int]
    arcs: dict[ArcKey, Arc]

    def favourite(self, agent: int) -> int:
        """Agent's most preferred type among the remaining ones."""
        ranking = self.market.agents[agent].ranking
        alive = set(self.remaining)
        return next(g for g in ranking if g in alive)

    def out_arcs(self, u: int) -> list[Arc]:
        return [self.arcs[(u, v)] for v in self.remaining]

    def unassigned(self) -> list[int]:
        return sorted(i for arc in self.arcs.values() for i in arc.members)

    def __len__(self) -> int:
        return len(self.remaining)


def build_graph(m: ExchangeMarket) -> TradeGraph:
    """Complete graph on all ``k`` types with every agent on its favourite arc."""
    nodes = list(range(m.k))
    arcs = {(u, v): Arc(u, v) for u in nodes for v in nodes}
    g = TradeGraph(m, nodes, arcs)
    for a in m.agents:
        arcs[(a.endowment, a.ranking[0])].members.append(a.index)
    return g


def noisy_weight(w: float, z: float, E: float) -> float:
    """Noise-shifted weight ``max(w + z - 2E, 0)``; underestimates ``w`` when ``|z| <= E``."""
    return max(w + z - 2.0 * E, 0.0)


def apply_round_noise(
    g: TradeGraph,
    eps_prime: float,
    E: float,
    rng: np.random.Generator,
    round_index: int,
    zero_noise: bool = False,
) -> list[NoiseDraw]:
    """Draw one fresh Laplace term per arc and reset every noisy weight.

    Arcs are visited in ``(tail, head)`` order so the draws are replayable from
    the generator state. In ``zero_noise`` mode nothing is drawn and the noisy
    weights equal the exact ones.
    """
    keys = sorted(g.arcs)
    if zero_noise:
        z = np.zeros(len(keys))
        E = 0.0
    else:
        z = sample_laplace_array(1.0 / eps_prime, len(keys), rng)
    draws = []
    for key, zi in zip(keys, z):
        arc = g.arcs[key]
        arc.noisy_weight = noisy_weight(arc.exact_weight, float(zi), E)
        draws.append(NoiseDraw(round_index, key, float(zi)))
    return draws


def find_cycle(g: TradeGraph) -> list[ArcKey] | None:
    """First directed cycle of eligible arcs (``floor(noisy) >= 1``) found by
    DFS from the lowest remaining node, trying successors in ascending order.
    Self-loops count as cycles of length one."""
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {u: WHITE for u in g.remaining}
    for root in g.remaining:
        if colour[root] != WHITE:
            continue
        stack = [root]
        iters = {root: iter(g.remaining)}
        colour[root] = GREY
        while stack:
            u = stack[-1]
            for v in iters[u]:
                if not g.arcs[(u, v)].eligible:
                    continue
                if colour[v] == GREY:
                    path = stack[stack.index(v):] + [v]
                    return list(zip(path[:-1], path[1:]))
                if colour[v] == WHITE:
                    colour[v] = GREY
                    stack.append(v)
                    iters[v] = iter(g.remaining)
                    break
            else:
                colour[u] = BLACK
                stack.pop()
    return None


def cycle_capacity(g: TradeGraph, cycle: list[ArcKey]) -> int:
    """Smallest rounded-down noisy weight along the cycle."""
    caps = [math.floor(g.arcs[e].noisy_weight) for e in cycle]
    if not caps or min(caps) < 1:
        raise ValueError(f"cycle {cycle} has an arc with rounded noisy weight below 1")
    return min(caps)


def execute_trade(
    g: TradeGraph, cycle: list[ArcKey], W: int, rng: np.random.Generator
) -> TradeOutcome:
    """Move ``W`` randomly chosen agents along every arc of ``cycle``.

    If some arc has fewer than ``W`` members the trade is refused and the
    outcome is flagged ``aborted``; the graph is left untouched so the caller
    can fall back to the identity allocation.
    """
    if any(W > g.arcs[e].exact_weight for e in cycle):
        return TradeOutcome(aborted=True)
    out = TradeOutcome(aborted=False)
    for key in cycle:
        arc = g.arcs[key]
        chosen, shift = r_select(W, arc.members, rng)
        picked = set(chosen)
        arc.members = [i for i in arc.members if i not in picked]
        arc.noisy_weight -= W
        for i in chosen:
            out.assignments[i] = arc.head
        out.selections.append(Selection(key, shift, tuple(chosen)))
    return out


def delete_node(g: TradeGraph) -> Deletion:
    """Remove the node with the smallest noisy out-weight (lowest id on ties).

    Agents still holding the deleted type keep it. Agents who wanted it are
    moved to the arc toward their favourite surviving type. Noisy weights are
    not touched; the next round redraws them.
    """
    if not g.remaining:
        raise ValueError("no node left to delete")
    sums = {u: sum(a.noisy_weight for a in g.out_arcs(u)) for u in g.remaining}
    v = min(g.remaining, key=lambda u: (sums[u], u))
    k = g.market.k

    kept: dict[int, int] = {}
    for arc in g.out_arcs(v):
        for i in arc.members:
            kept[i] = v
    displaced = [i for u in g.remaining if u != v for i in g.arcs[(u, v)].members]

    for u in g.remaining:
        del g.arcs[(v, u)]
        if u != v:
            del g.arcs[(u, v)]
    g.remaining = [u for u in g.remaining if u != v]

    moved: dict[ArcKey, list[int]] = {}
    for i in displaced:
        key = (g.market.agents[i].endowment, g.favourite(i))
        moved.setdefault(key, []).append(i)
    for key, agents in moved.items():
        arc = g.arcs[key]
        arc.members = sorted(arc.members + agents)

    return Deletion(v, sums[v], sums[v] < k, kept)
