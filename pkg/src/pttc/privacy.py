"""Laplace noise and privacy-budget arithmetic for the private trading engine.

Natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Smallest uniform fed to the Laplace quantile; keeps log() finite when the
# generator returns exactly 0.
_U_FLOOR = 2.0**-60


@dataclass(frozen=True)
class PrivacyBudget:
    """Top-level privacy parameters for one run over ``k`` good types.

    ``delta1`` covers the noisy arc weights, ``delta2`` the random selection of
    traders, and ``beta`` the probability that some noise draw exceeds the
    high-probability bound ``E``.
    """

    epsilon: float
    delta1: float
    delta2: float
    beta: float
    k: int

    def __post_init__(self) -> None:
        if not self.epsilon > 0 or not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        for name in ("delta1", "delta2", "beta"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.k**3 / self.beta <= 1:
            raise ValueError("k^3 / beta must exceed 1")

    @classmethod
    def default(cls, epsilon: float, n: int, k: int) -> PrivacyBudget:
        """Budget with ``beta = delta1 = delta2 = 1/n^3`` (capped below 1 for tiny n)."""
        small = min(1.0 / max(n, 1) ** 3, 0.5)
        return cls(epsilon, small, small, small, k)

    @property
    def log_term(self) -> float:
        """``log(k^3 / beta)``, the tail multiplier shared by both derived quantities."""
        return math.log(self.k**3 / self.beta)

    @property
    def total_delta(self) -> float:
        """Additive slack of the marginal-DP guarantee: ``delta1 + delta2 + beta``."""
        return self.delta1 + self.delta2 + self.beta


def eps_prime(b: PrivacyBudget) -> float:
    """Per-round Laplace privacy parameter; noise is drawn at scale ``1/eps_prime``."""
    L = b.log_term
    k = b.k
    denom = 2 * math.sqrt(8) * (
        L * math.sqrt(k * math.log(1 / b.delta1))
        + k * math.sqrt(k * math.log(1 / b.delta2))
    )
    return b.epsilon * L / denom


def noise_bound_E(b: PrivacyBudget) -> float:
    """High-probability bound on every noise draw of a run."""
    return b.log_term / eps_prime(b)


def advanced_composition_eps(per_step_eps: float, m: int, delta: float) -> float:
    """Privacy loss of ``m`` adaptively composed ``per_step_eps``-DP steps, failing w.p. ``delta``."""
    if not per_step_eps > 0:
        raise ValueError(f"per-step epsilon must be positive, got {per_step_eps}")
    if m < 1:
        raise ValueError(f"step count must be at least 1, got {m}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return per_step_eps * math.sqrt(8 * m * math.log(1 / delta))


def composed_budget(b: PrivacyBudget) -> tuple[float, float]:
    """Recompose the engine's per-step losses into ``(eps_weights, eps_selection)``.

    Noisy weights: ``k`` rounds of a ``2 eps'``-DP Laplace release.
    Selection: ``k^3`` cycle clearings, each shifting an agent's inclusion odds
    by at most ``2/E``. The two parts sum back to ``b.epsilon``.
    """
    ep = eps_prime(b)
    eps1 = advanced_composition_eps(2 * ep, b.k, b.delta1)
    eps2 = advanced_composition_eps(2 / noise_bound_E(b), b.k**3, b.delta2)
    return eps1, eps2


def laplace_quantile(u: float | np.ndarray, scale: float) -> float | np.ndarray:
    """Inverse CDF of the zero-mean Laplace distribution with the given scale."""
    u = np.maximum(u, _U_FLOOR)
    lower = np.minimum(u, 0.5)
    upper = np.maximum(1.0 - u, _U_FLOOR)
    z = np.where(u < 0.5, scale * np.log(2.0 * lower), -scale * np.log(np.minimum(2.0 * upper, 1.0)))
    return z if np.ndim(z) else float(z)


def sample_laplace(scale: float, rng: np.random.Generator) -> float:
    """One Laplace draw at ``scale``, consuming exactly one uniform from ``rng``."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return float(laplace_quantile(rng.random(), scale))


def sample_laplace_array(scale: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent draws; consumes ``size`` uniforms in order."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return laplace_quantile(rng.random(size), scale)
