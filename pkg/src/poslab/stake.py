"""Stake distributions, scenario validation, and normalized selection weights.

A :class:`Scenario` bundles a named set of miner accounts with the leader
selection mechanism under study.  All types are frozen after construction, so
scenarios can be shared freely across worker threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .prf import HASH_RANGE, MASK64, prf64


class Mechanism(enum.Enum):
    """Leader-selection mechanisms and closed-form probability models."""

    PEERCOIN_AGE = "PeercoinAge"
    BLACKCOIN_NXT = "BlackcoinNxt"
    OUROBOROS = "Ouroboros"
    ALGORAND = "Algorand"
    SAAD_MODEL = "SaadModel"
    PROPORTIONAL_MODEL = "ProportionalModel"


#: Mechanisms that resolve a slot through a threshold hash lottery and
#: therefore require LotteryParams.
HASH_LOTTERY_MECHANISMS = frozenset({Mechanism.PEERCOIN_AGE, Mechanism.BLACKCOIN_NXT})


class Weighting(enum.Enum):
    STAKE_ONLY = "StakeOnly"
    STAKE_TIMES_AGE = "StakeTimesAge"


class ScenarioError(ValueError):
    """Base class for scenario construction and validation failures."""


class DuplicateMinerId(ScenarioError):
    pass


class ZeroTotalStake(ScenarioError):
    pass


class MissingLotteryParams(ScenarioError):
    pass


class ZeroTotalWeight(ScenarioError):
    pass


def _check_u64(value: int, name: str) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ScenarioError(f"{name} must be an integer, got {value!r}")
    if not 0 <= value <= MASK64:
        raise ScenarioError(f"{name} must fit in 64 unsigned bits, got {value}")


@dataclass(frozen=True)
class MinerAccount:
    """One staker: identifier, stake in token units, coin age in age units.

    ``seed`` is the miner's unique hash-lottery seed; when omitted it is
    derived from the scenario's master seed at scenario construction.
    The default ``coin_age`` of 1 makes stake-times-age weighting degenerate
    to plain stake weighting when ages are not specified.
    """

    id: int
    stake: int
    coin_age: int = 1
    seed: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, int) or isinstance(self.id, bool) or self.id < 0:
            raise ScenarioError(f"miner id must be a non-negative integer, got {self.id!r}")
        if not isinstance(self.stake, int) or isinstance(self.stake, bool) or self.stake < 0:
            raise ScenarioError(f"miner {self.id}: stake must be a non-negative integer")
        if not isinstance(self.coin_age, int) or isinstance(self.coin_age, bool) or self.coin_age < 0:
            raise ScenarioError(f"miner {self.id}: coin_age must be a non-negative integer")
        if self.seed is not None:
            _check_u64(self.seed, f"miner {self.id}: seed")


@dataclass(frozen=True)
class LotteryParams:
    """Parameters of a threshold hash lottery.

    ``difficulty`` scales the per-tick eligibility threshold; ``tick_limit``
    bounds how many ticks a slot is scanned before it is declared empty.
    The hash domain is fixed at 2**64.
    """

    difficulty: int
    tick_limit: int
    hash_range: int = HASH_RANGE

    def __post_init__(self) -> None:
        _check_u64(self.difficulty, "difficulty")
        if self.difficulty == 0:
            raise ScenarioError("difficulty must be positive")
        if not isinstance(self.tick_limit, int) or isinstance(self.tick_limit, bool) or self.tick_limit < 1:
            raise ScenarioError("tick_limit must be a positive integer")
        if self.hash_range != HASH_RANGE:
            raise ScenarioError("hash_range is fixed at 2**64")


@dataclass(frozen=True)
class Scenario:
    """A named stake distribution plus mechanism parameters.

    Miners missing an explicit seed get one derived as
    ``prf64(master_seed, id, 1)``, so a scenario is fully reproducible from
    its master seed alone.
    """

    name: str
    miners: tuple[MinerAccount, ...]
    mechanism: Mechanism
    lottery: LotteryParams | None = None
    master_seed: int = 0

    def __post_init__(self) -> None:
        _check_u64(self.master_seed, "master_seed")
        if not isinstance(self.mechanism, Mechanism):
            raise ScenarioError(f"unknown mechanism {self.mechanism!r}")
        miners = tuple(
            m if m.seed is not None
            else MinerAccount(m.id, m.stake, m.coin_age, prf64(self.master_seed, m.id, 1))
            for m in self.miners
        )
        object.__setattr__(self, "miners", miners)

    @property
    def total_stake(self) -> int:
        return sum(m.stake for m in self.miners)


def validate_scenario(scenario: Scenario) -> Scenario:
    """Check cross-field invariants; return the scenario unchanged if valid.

    Raises DuplicateMinerId, ZeroTotalStake, or MissingLotteryParams.
    """
    seen: set[int] = set()
    for m in scenario.miners:
        if m.id in seen:
            raise DuplicateMinerId(f"miner id {m.id} appears more than once")
        seen.add(m.id)
    if scenario.total_stake == 0:
        raise ZeroTotalStake("at least one miner must have stake > 0")
    if scenario.mechanism in HASH_LOTTERY_MECHANISMS and scenario.lottery is None:
        raise MissingLotteryParams(
            f"mechanism {scenario.mechanism.value} requires lottery parameters"
        )
    return scenario


def stake_weights(miners, weighting: Weighting) -> list[int]:
    """Raw integer selection weights: stake, or stake times coin age."""
    if weighting is Weighting.STAKE_ONLY:
        return [m.stake for m in miners]
    return [m.stake * m.coin_age for m in miners]


def normalize_stakes(miners, weighting: Weighting = Weighting.STAKE_ONLY) -> list[float]:
    """Normalized selection probabilities, one per miner.

    Each weight is divided by the exact integer total in a single float
    division, so scaling every stake by the same positive integer leaves the
    output bit-for-bit unchanged.  Raises ZeroTotalWeight when no miner has
    positive weight under the chosen weighting.
    """
    weights = stake_weights(miners, weighting)
    total = sum(weights)
    if total == 0:
        raise ZeroTotalWeight(f"total weight is zero under {weighting.value}")
    return [w / total for w in weights]
