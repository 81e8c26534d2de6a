import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_miners
from poslab.prf import prf64
from poslab.stake import (
    DuplicateMinerId,
    LotteryParams,
    Mechanism,
    MinerAccount,
    MissingLotteryParams,
    Scenario,
    ScenarioError,
    Weighting,
    ZeroTotalStake,
    ZeroTotalWeight,
    normalize_stakes,
    validate_scenario,
)

SUM_TOL = 2.0**-40


def scenario_of(miners, mechanism=Mechanism.OUROBOROS, lottery=None, master_seed=1):
    return Scenario("s", tuple(miners), mechanism, lottery, master_seed)


def test_validate_accepts_valid_scenario():
    s = scenario_of(make_miners([51, 49]))
    assert validate_scenario(s) is s


def test_validate_rejects_zero_total_stake():
    with pytest.raises(ZeroTotalStake):
        validate_scenario(scenario_of(make_miners([0, 0])))


def test_validate_rejects_duplicate_ids():
    miners = (MinerAccount(3, 1), MinerAccount(3, 2))
    with pytest.raises(DuplicateMinerId):
        validate_scenario(scenario_of(miners))


def test_validate_requires_lottery_params_for_hash_lotteries():
    for mech in (Mechanism.PEERCOIN_AGE, Mechanism.BLACKCOIN_NXT):
        with pytest.raises(MissingLotteryParams):
            validate_scenario(scenario_of(make_miners([1, 1]), mech))
        ok = scenario_of(make_miners([1, 1]), mech, LotteryParams(10, 100))
        assert validate_scenario(ok) is ok


def test_miner_account_rejects_negative_fields():
    with pytest.raises(ScenarioError):
        MinerAccount(-1, 5)
    with pytest.raises(ScenarioError):
        MinerAccount(0, -5)
    with pytest.raises(ScenarioError):
        MinerAccount(0, 5, -1)
    with pytest.raises(ScenarioError):
        MinerAccount(0, 5, 1, -3)


def test_lottery_params_invariants():
    with pytest.raises(ScenarioError):
        LotteryParams(0, 10)
    with pytest.raises(ScenarioError):
        LotteryParams(10, 0)
    with pytest.raises(ScenarioError):
        LotteryParams(10, 10, hash_range=2**32)
    assert LotteryParams(10, 10).hash_range == 2**64


def test_default_coin_age_is_one():
    assert MinerAccount(0, 5).coin_age == 1


def test_missing_seed_derived_from_master_seed():
    s = scenario_of([MinerAccount(7, 5), MinerAccount(9, 5, 2, 1234)], master_seed=99)
    assert s.miners[0].seed == prf64(99, 7, 1)
    assert s.miners[1].seed == 1234  # explicit seeds are kept


def test_normalize_stake_only():
    assert normalize_stakes(make_miners([1, 2, 3])) == [1 / 6, 1 / 3, 1 / 2]


def test_normalize_stake_times_age():
    miners = make_miners([1, 2], ages=[2, 1])
    assert normalize_stakes(miners, Weighting.STAKE_TIMES_AGE) == [0.5, 0.5]


def test_normalize_single_miner():
    assert normalize_stakes(make_miners([7])) == [1.0]


def test_normalize_zero_total_weight():
    with pytest.raises(ZeroTotalWeight):
        normalize_stakes(make_miners([0, 0]))
    with pytest.raises(ZeroTotalWeight):
        normalize_stakes(make_miners([1, 1], ages=[0, 0]), Weighting.STAKE_TIMES_AGE)


def test_zero_stake_miner_gets_weight_zero():
    weights = normalize_stakes(make_miners([0, 5, 3]))
    assert weights[0] == 0.0


stake_lists = st.lists(st.integers(min_value=0, max_value=10**9), min_size=1, max_size=20)


@given(stake_lists)
@settings(max_examples=200)
def test_normalize_is_a_distribution(stakes):
    if sum(stakes) == 0:
        return
    weights = normalize_stakes(make_miners(stakes))
    assert all(0.0 <= w <= 1.0 for w in weights)
    assert abs(sum(weights) - 1.0) <= SUM_TOL


@given(stake_lists, st.integers(min_value=1, max_value=10**6))
@settings(max_examples=200)
def test_normalize_scale_invariance_bitwise(stakes, scale):
    if sum(stakes) == 0:
        return
    base = normalize_stakes(make_miners(stakes))
    scaled = normalize_stakes(make_miners([s * scale for s in stakes]))
    assert base == scaled  # identical floats, not merely close
