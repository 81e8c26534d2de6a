"""Closed-form next-block probability models.

Two competing models for the probability that a miner holding ``alpha`` of
``beta`` total stake mints the next block:

* the auction-style model, which jumps to certainty at the majority
  threshold (a holder of half the stake or more always wins), and
* the proportional model, which is simply ``alpha / beta``.

All arithmetic here is exact rational; callers convert to float only at the
reporting edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .stake import Mechanism, Scenario, Weighting, ZeroTotalWeight, stake_weights


@dataclass(frozen=True)
class StakeQuery:
    """A miner's stake ``alpha`` against the total stake ``beta``."""

    alpha: int
    beta: int

    def __post_init__(self) -> None:
        if not isinstance(self.alpha, int) or not isinstance(self.beta, int):
            raise ValueError("alpha and beta must be integers")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not 0 <= self.alpha <= self.beta:
            raise ValueError("alpha must satisfy 0 <= alpha <= beta")


def saad_next_block_probability(q: StakeQuery) -> Fraction:
    """Auction-style model: alpha/beta below the majority threshold, else 1.

    The branch condition is evaluated exactly as ``2*alpha < beta``, so the
    boundary alpha/beta == 1/2 falls on the certain branch.
    """
    if 2 * q.alpha < q.beta:
        return Fraction(q.alpha, q.beta)
    return Fraction(1)


def proportional_next_block_probability(q: StakeQuery) -> Fraction:
    """Proportional model: exactly alpha/beta, always in [0, 1]."""
    return Fraction(q.alpha, q.beta)


def theoretical_selection_probabilities(scenario: Scenario) -> list[Fraction]:
    """Per-miner selection probabilities for the scenario's mechanism.

    Stake-times-age weighting for the coin-age lottery, plain stake
    weighting for every other mechanism.  For the auction-style model the
    vector is the per-miner model value, which can sum to more than 1 when a
    majority staker is present; for all other mechanisms the vector sums to
    exactly 1.
    """
    beta = scenario.total_stake
    if scenario.mechanism is Mechanism.SAAD_MODEL:
        if beta == 0:
            raise ZeroTotalWeight("total stake is zero")
        return [saad_next_block_probability(StakeQuery(m.stake, beta)) for m in scenario.miners]

    weighting = (
        Weighting.STAKE_TIMES_AGE
        if scenario.mechanism is Mechanism.PEERCOIN_AGE
        else Weighting.STAKE_ONLY
    )
    weights = stake_weights(scenario.miners, weighting)
    total = sum(weights)
    if total == 0:
        raise ZeroTotalWeight(f"total weight is zero under {weighting.value}")
    return [Fraction(w, total) for w in weights]
