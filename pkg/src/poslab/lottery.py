"""Threshold hash lotteries.

A miner is eligible at a tick when its per-tick proofhash falls strictly
below a difficulty-scaled threshold: difficulty times stake for the plain
stake lottery, difficulty times stake times coin age for the coin-age
lottery.  A slot is resolved at the first tick where at least one miner is
eligible; the winner is the eligible miner with the lowest proofhash, ties
broken by the lowest miner id.

The threshold product is capped at the hash range (2**64) so an oversized
threshold means "eligible for every possible hash".  Slot evaluation is a
pure function of (scenario, slot): each slot derives its own salt from the
master seed, so slots are independent and can be computed in any order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .prf import HASH_RANGE, MASK64, absorb, np_absorb, np_prf64, prf64
from .stake import (
    HASH_LOTTERY_MECHANISMS,
    LotteryParams,
    Mechanism,
    MinerAccount,
    Scenario,
    ScenarioError,
    Weighting,
    ZeroTotalWeight,
    stake_weights,
)

#: Default calibration target: expected eligible miners per tick.
DEFAULT_TARGET_RATE = 0.01
#: Default maximum ticks scanned per slot before declaring it empty.
DEFAULT_TICK_LIMIT = 10_000


@dataclass(frozen=True)
class TickEligibility:
    """Result of one miner's eligibility test at one tick."""

    miner_id: int
    tick: int
    proofhash: int
    eligible: bool


@dataclass(frozen=True)
class SlotOutcome:
    """Winner of one leader-election slot, or an empty slot."""

    slot: int
    winner: int | None = None
    winning_tick: int | None = None
    winning_hash: int | None = None

    def __post_init__(self) -> None:
        present = (self.winner is not None, self.winning_tick is not None, self.winning_hash is not None)
        if any(present) and not all(present):
            raise ValueError("winner, winning_tick and winning_hash must be set together")

    @property
    def empty(self) -> bool:
        return self.winner is None


def _weighting_for(mode: Mechanism) -> Weighting:
    if mode is Mechanism.PEERCOIN_AGE:
        return Weighting.STAKE_TIMES_AGE
    if mode is Mechanism.BLACKCOIN_NXT:
        return Weighting.STAKE_ONLY
    raise ScenarioError(f"{mode.value} is not a hash-lottery mechanism")


def threshold(miner: MinerAccount, params: LotteryParams, mode: Mechanism) -> int:
    """Eligibility threshold for one miner, capped at the hash range."""
    weight = miner.stake if mode is Mechanism.BLACKCOIN_NXT else miner.stake * miner.coin_age
    return min(params.hash_range, params.difficulty * weight)


def slot_salt(master_seed: int, slot: int) -> int:
    """Per-slot salt; makes slots independent hash streams."""
    return prf64(master_seed, slot, 0)


def eligibility(
    miner: MinerAccount,
    tick: int,
    params: LotteryParams,
    mode: Mechanism,
    salt: int = 0,
) -> TickEligibility:
    """Test one miner at one tick of one slot (identified by its salt).

    The comparison is strict: a proofhash exactly equal to the threshold is
    not eligible.
    """
    if tick < 0:
        raise ValueError("tick must be non-negative")
    if miner.seed is None:
        raise ScenarioError(f"miner {miner.id} has no seed")
    proofhash = prf64(miner.seed, salt, tick)
    return TickEligibility(
        miner_id=miner.id,
        tick=tick,
        proofhash=proofhash,
        eligible=proofhash < threshold(miner, params, mode),
    )


def run_lottery_slot(scenario: Scenario, slot: int, mode: Mechanism | None = None) -> SlotOutcome:
    """Resolve one slot by scanning ticks until a miner is eligible.

    Reference scalar implementation; the Monte Carlo engine uses
    :func:`run_lottery_slots`, which is property-tested to agree with this
    function bit for bit.
    """
    mode = mode or scenario.mechanism
    params = scenario.lottery
    if params is None:
        raise ScenarioError("scenario has no lottery parameters")
    salt = slot_salt(scenario.master_seed, slot)
    for tick in range(params.tick_limit):
        best: tuple[int, int] | None = None
        for miner in scenario.miners:
            e = eligibility(miner, tick, params, mode, salt)
            if e.eligible and (best is None or (e.proofhash, e.miner_id) < best):
                best = (e.proofhash, e.miner_id)
        if best is not None:
            return SlotOutcome(slot=slot, winner=best[1], winning_tick=tick, winning_hash=best[0])
    return SlotOutcome(slot=slot)


def run_lottery_slots(
    scenario: Scenario,
    start_slot: int,
    count: int,
    mode: Mechanism | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized slot resolution for a contiguous slot range.

    Returns (winner_ids, winning_ticks, winning_hashes) arrays of length
    ``count``; empty slots carry winner -1 and tick/hash 0.  Memory is
    O(count * miners); callers batch large ranges.
    """
    mode = mode or scenario.mechanism
    params = scenario.lottery
    if params is None:
        raise ScenarioError("scenario has no lottery parameters")

    # Columns ordered by miner id so argmin tie-breaking selects the lowest id.
    miners = sorted(scenario.miners, key=lambda m: m.id)
    ids = np.array([m.id for m in miners], dtype=np.int64)
    thresholds = [threshold(m, params, mode) for m in miners]
    always = np.array([t >= HASH_RANGE for t in thresholds], dtype=bool)
    thr64 = np.array([t if t < HASH_RANGE else 0 for t in thresholds], dtype=np.uint64)
    acc1 = np.array([absorb(0, m.seed) for m in miners], dtype=np.uint64)

    slots = np.arange(start_slot, start_slot + count, dtype=np.uint64)
    salts = np_prf64(scenario.master_seed, slots, 0)
    state = np_absorb(acc1[None, :], salts[:, None])  # (count, n)

    winners = np.full(count, -1, dtype=np.int64)
    ticks = np.zeros(count, dtype=np.int64)
    hashes = np.zeros(count, dtype=np.uint64)
    active = np.arange(count)
    sentinel = np.uint64(MASK64)

    for tick in range(params.tick_limit):
        h = np_absorb(state, np.full(1, tick, dtype=np.uint64))
        elig = always[None, :] | (h < thr64[None, :])
        hit = elig.any(axis=1)
        if hit.any():
            rows = np.nonzero(hit)[0]
            hrow = h[rows]
            erow = elig[rows]
            masked = np.where(erow, hrow, sentinel)
            col = np.argmin(masked, axis=1)
            picked = masked[np.arange(len(rows)), col]
            # If the winning masked value is the sentinel, every eligible hash
            # in the row equals 2**64-1; fall back to the first eligible
            # column, which is the lowest miner id.
            bad = picked == sentinel
            if bad.any():
                col[bad] = np.argmax(erow[bad], axis=1)
            resolved = active[rows]
            winners[resolved] = ids[col]
            ticks[resolved] = tick
            hashes[resolved] = hrow[np.arange(len(rows)), col]
            keep = ~hit
            active = active[keep]
            state = state[keep]
            if active.size == 0:
                break
    return winners, ticks, hashes


def calibrate_difficulty(
    scenario: Scenario,
    target_rate: float | Fraction,
    mode: Mechanism | None = None,
) -> int:
    """Largest difficulty keeping expected eligible miners per tick <= rate.

    The expected count is sum(min(1, D*w/2**64)) over miner weights w; the
    search is additionally confined to difficulties where no threshold
    exceeds the hash range, since beyond that point raising D changes
    nothing.  A small rate makes per-tick eligibility rare, which is what
    drives the first-success winner distribution to stake proportionality.
    """
    mode = mode or scenario.mechanism
    if mode not in HASH_LOTTERY_MECHANISMS:
        raise ScenarioError(f"{mode.value} is not a hash-lottery mechanism")
    rate = Fraction(target_rate)
    if not 0 < rate <= 1:
        raise ValueError("target_rate must be in (0, 1]")
    weights = [w for w in stake_weights(scenario.miners, _weighting_for(mode)) if w > 0]
    if not weights:
        raise ZeroTotalWeight(f"no miner has positive weight under {mode.value}")
    w_max = max(weights)

    def ok(difficulty: int) -> bool:
        if difficulty * w_max > HASH_RANGE:
            return False
        expected = sum(Fraction(difficulty * w, HASH_RANGE) for w in weights)
        return expected <= rate

    if not ok(1):
        raise ValueError("target_rate unattainable even at difficulty 1")
    lo, hi = 1, MASK64
    if ok(hi):
        return hi
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def default_lottery_params(
    scenario: Scenario,
    mode: Mechanism | None = None,
    target_rate: float | Fraction = DEFAULT_TARGET_RATE,
    tick_limit: int = DEFAULT_TICK_LIMIT,
) -> LotteryParams:
    """LotteryParams calibrated to the default rare-eligibility regime."""
    return LotteryParams(
        difficulty=calibrate_difficulty(scenario, target_rate, mode),
        tick_limit=tick_limit,
    )
