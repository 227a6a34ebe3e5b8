"""Market generators: uniformly random markets and the lower-bound attack markets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import ExchangeMarket

KINDS = ("random", "lb_joint", "lb_marginal")


def _completed(first: list[int], k: int) -> list[int]:
    """``first`` followed by the remaining types in ascending order."""
    return first + [g for g in range(k) if g not in first]


def gen_random(n: int, k: int, seed: int | None) -> ExchangeMarket:
    """Uniform endowments and independent uniform rankings."""
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    endowments = rng.integers(k, size=n)
    rankings = [rng.permutation(k) for _ in range(n)]
    return ExchangeMarket.from_lists(k, endowments, rankings)


def lb_joint_target(n: int, seed: int | None) -> int:
    """Index of the distinguished agent in :func:`gen_lb_joint`."""
    return int(np.random.default_rng(seed).integers(n))


def gen_lb_joint(n: int, b: int, seed: int | None = 0) -> ExchangeMarket:
    """Two goods, ``2n`` agents, one of whose willingness to trade is the bit ``b``.

    Agents ``0..n-1`` hold good 0 and want good 1, except a distinguished one
    (uniform position, see :func:`lb_joint_target`) whose favourite is good
    ``b``. Agents ``n..2n-1`` hold good 1 and want good 0.
    """
    if n < 1 or b not in (0, 1):
        raise ValueError(f"need n >= 1 and b in {{0, 1}}, got n={n}, b={b}")
    target = lb_joint_target(n, seed)
    endowments = [0] * n + [1] * n
    rankings = [[1, 0]] * n + [[0, 1]] * n
    rankings[target] = [b, 1 - b]
    return ExchangeMarket.from_lists(2, endowments, rankings)


def gen_lb_marginal(n: int, k: int, b: int) -> ExchangeMarket:
    """The chain market whose ``k``-cycle exists only when ``b = 1``.

    Agent ``i < k-1`` holds ``i`` and ranks ``i+1`` then ``i``. Agent ``k-1``
    holds ``k-1`` and ranks ``0`` first if ``b = 1``, else its own good.
    Agents ``k..n-1`` hold ``k-1`` and rank it first. Unconstrained tails are
    filled in ascending order.
    """
    if not (k >= 2 and n >= k) or b not in (0, 1):
        raise ValueError(f"need n >= k >= 2 and b in {{0, 1}}, got n={n}, k={k}, b={b}")
    last = k - 1
    endowments = list(range(k - 1)) + [last] * (n - k + 1)
    rankings = [_completed([i + 1, i], k) for i in range(k - 1)]
    rankings.append(_completed([0, last] if b else [last], k))
    rankings += [_completed([last], k)] * (n - k)
    return ExchangeMarket.from_lists(k, endowments, rankings)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int
    k: int = 2
    b: int = 1
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator {self.kind!r}; expected one of {KINDS}")

    def build(self, seed: int | None = None) -> ExchangeMarket:
        """Generate the market; ``seed`` is used only when the spec fixes none."""
        s = self.seed if self.seed is not None else seed
        if self.kind == "random":
            return gen_random(self.n, self.k, s)
        if self.kind == "lb_joint":
            return gen_lb_joint(self.n, self.b, 0 if s is None else s)
        return gen_lb_marginal(self.n, self.k, self.b)

    def with_(self, **changes) -> GeneratorSpec:
        fields = {"kind": self.kind, "n": self.n, "k": self.k, "b": self.b, "seed": self.seed}
        fields.update(changes)
        return GeneratorSpec(**fields)


def parse_generator_spec(text: str) -> GeneratorSpec:
    """Parse ``kind:key=value,...`` such as ``lb_marginal:k=3,n=12``.

    Keys are ``n``, ``k``, ``b`` and ``seed``. For ``lb_joint`` ``n`` is the
    size of each group (``2n`` agents in total).
    """
    kind, _, rest = text.partition(":")
    values: dict[str, int] = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in ("n", "k", "b", "seed"):
            raise ValueError(f"bad generator option {item!r} in {text!r}")
        values[key] = int(value)
    if "n" not in values:
        raise ValueError(f"generator spec {text!r} must set n")
    if kind.strip() == "lb_joint":
        values.setdefault("k", 2)
    return GeneratorSpec(kind=kind.strip(), **values)
