"""Shared scenario builders for the test suite."""

from poslab.lottery import calibrate_difficulty
from poslab.stake import (
    HASH_LOTTERY_MECHANISMS,
    LotteryParams,
    Mechanism,
    MinerAccount,
    Scenario,
)


def make_miners(stakes, ages=None, ids=None):
    ids = ids if ids is not None else range(len(stakes))
    ages = ages if ages is not None else [1] * len(stakes)
    return tuple(MinerAccount(i, s, a) for i, s, a in zip(ids, stakes, ages))


def make_scenario(
    stakes,
    mechanism,
    ages=None,
    master_seed=1,
    name="test",
    target_rate=0.01,
    tick_limit=10_000,
    difficulty=None,
):
    """Scenario with auto-calibrated lottery parameters where needed."""
    miners = make_miners(stakes, ages)
    lottery = None
    if mechanism in HASH_LOTTERY_MECHANISMS:
        bare = Scenario(name, miners, mechanism, None, master_seed)
        d = difficulty if difficulty is not None else calibrate_difficulty(bare, target_rate)
        lottery = LotteryParams(difficulty=d, tick_limit=tick_limit)
    return Scenario(name, miners, mechanism, lottery, master_seed)
