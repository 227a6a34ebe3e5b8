"""Private top trading cycles for barter markets, with exact oracles and audits."""

from .engine import PttcConfig, PttcResult, RunTrace, format_trace, run_exact_ttc, run_pttc
from .instances import gen_lb_joint, gen_lb_marginal, gen_random
from .market import (
    Agent,
    Allocation,
    ExchangeMarket,
    brute_force_po,
    dominance_gap,
    is_ir,
    validate_market,
)
from .oracles import ip_allocate
from .privacy import PrivacyBudget, eps_prime, noise_bound_E

__all__ = [
    "Agent",
    "Allocation",
    "ExchangeMarket",
    "PrivacyBudget",
    "PttcConfig",
    "PttcResult",
    "RunTrace",
    "brute_force_po",
    "dominance_gap",
    "eps_prime",
    "format_trace",
    "gen_lb_joint",
    "gen_lb_marginal",
    "gen_random",
    "ip_allocate",
    "is_ir",
    "noise_bound_E",
    "run_exact_ttc",
    "run_pttc",
    "validate_market",
]
