"""Direct leader selection: weighted election and lowest-hash sortition.

Two mechanisms that pick a leader without tick scanning:

* inverse-CDF election: one uniform draw lands in a miner's cumulative
  weight interval, realizing stake-proportional selection exactly;
* lowest-hash sortition: every participating account hashes the slot salt
  and the account with the smallest hash wins.  Because each account is
  equally likely to hold the minimum, a staker maximizes its chance by
  splitting stake into minimum-size accounts, and its aggregate win
  probability is then exactly stake-proportional.
"""

from __future__ import annotations

from dataclasses import dataclass

from .prf import prf64
from .stake import MinerAccount, ScenarioError

#: Tolerance on the sum of a normalized weight vector.
WEIGHT_SUM_TOL = 2.0 ** -40


class MalformedWeights(ValueError):
    pass


class EmptyParticipantSet(ValueError):
    pass


class IndivisibleStake(ValueError):
    pass


@dataclass(frozen=True)
class UnitAccountSet:
    """One miner's stake split into equal-stake sortition accounts."""

    owner_id: int
    accounts: tuple[tuple[int, int], ...]  # (account_seed, stake)

    def __post_init__(self) -> None:
        seeds = [seed for seed, _ in self.accounts]
        if len(set(seeds)) != len(seeds):
            raise ValueError("account seeds must be pairwise distinct")
        if any(stake < 1 for _, stake in self.accounts):
            raise ValueError("account stakes must be positive")

    @property
    def total_stake(self) -> int:
        return sum(stake for _, stake in self.accounts)


def ouroboros_select(weights, draw) -> int:
    """Index whose cumulative weight interval [sum(<i), sum(<=i)) holds the draw.

    Works on floats or exact rationals alike.  Zero-weight entries have empty
    intervals and are never selected.  Draws at or beyond the accumulated
    total (possible through float rounding) fall to the last positive-weight
    index, keeping the map total on [0, 1).
    """
    if len(weights) == 0:
        raise MalformedWeights("empty weight vector")
    if any(w < 0 for w in weights):
        raise MalformedWeights("weights must be non-negative")
    total = sum(weights)
    if abs(total - 1) > WEIGHT_SUM_TOL:
        raise MalformedWeights(f"weights sum to {total!r}, expected 1")
    if not 0 <= draw < 1:
        raise ValueError(f"draw must lie in [0, 1), got {draw!r}")
    cumulative = 0
    last_positive = -1
    for index, weight in enumerate(weights):
        cumulative = cumulative + weight
        if weight > 0:
            last_positive = index
            if draw < cumulative:
                return index
    return last_positive


def algorand_select(accounts, slot_salt: int) -> int:
    """Index of the account with the minimal per-slot hash.

    ``accounts`` is a sequence of (account_seed, stake) pairs; entries with
    stake below one token cannot participate.  Hash ties break toward the
    lowest account seed.
    """
    best_index = -1
    best_key: tuple[int, int] | None = None
    for index, (seed, stake) in enumerate(accounts):
        if stake < 1:
            continue
        key = (prf64(seed, slot_salt, 0), seed)
        if best_key is None or key < best_key:
            best_key = key
            best_index = index
    if best_index < 0:
        raise EmptyParticipantSet("no account with stake >= 1")
    return best_index


def algorand_slot_winner(account_sets, slot_salt: int) -> int:
    """Owner id of the winning account across several miners' account sets."""
    flat: list[tuple[int, int]] = []
    owners: list[int] = []
    for account_set in account_sets:
        for account in account_set.accounts:
            flat.append(account)
            owners.append(account_set.owner_id)
    return owners[algorand_select(flat, slot_salt)]


def split_stake(miner: MinerAccount, unit: int) -> UnitAccountSet:
    """Split a miner's stake into accounts of ``unit`` tokens each.

    Account seeds are derived from the miner's seed, so the split is
    reproducible.  Raises IndivisibleStake when the stake is not a multiple
    of the unit.
    """
    if unit < 1:
        raise ValueError("unit must be a positive integer")
    if miner.seed is None:
        raise ScenarioError(f"miner {miner.id} has no seed")
    if miner.stake % unit != 0:
        raise IndivisibleStake(
            f"stake {miner.stake} of miner {miner.id} is not divisible by unit {unit}"
        )
    count = miner.stake // unit
    accounts = tuple((prf64(miner.seed, j, 1), unit) for j in range(count))
    return UnitAccountSet(owner_id=miner.id, accounts=accounts)
