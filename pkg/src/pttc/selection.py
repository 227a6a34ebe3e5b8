"""Random cyclic-window selection of the agents who trade along an arc."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def cyclic_window(members: Sequence[int], W: int, shift: int) -> list[int]:
    """The ``W`` members starting at position ``shift``, wrapping around."""
    size = len(members)
    return [members[(shift + i) % size] for i in range(W)]


def r_select(
    W: int, members: Sequence[int], rng: np.random.Generator
) -> tuple[list[int], int | None]:
    """Pick ``W`` of ``members`` as a uniformly shifted cyclic window.

    Every member is chosen with probability exactly ``W / len(members)``.

    Returns:
        The selected agents (in window order) and the shift that was drawn, or
        ``None`` when ``members`` is empty and nothing was drawn.
    """
    if W < 0:
        raise ValueError(f"cannot select a negative number of agents ({W})")
    if W > len(members):
        raise ValueError(f"cannot select {W} agents from {len(members)}")
    if not members:
        return [], None
    shift = int(rng.integers(len(members)))
    return cyclic_window(members, W, shift), shift
