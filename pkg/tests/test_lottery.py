import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import make_miners, make_scenario
from poslab.lottery import (
    DEFAULT_TARGET_RATE,
    calibrate_difficulty,
    eligibility,
    run_lottery_slot,
    run_lottery_slots,
    slot_salt,
    threshold,
)
from poslab.prf import HASH_RANGE, MASK64, prf64
from poslab.stake import (
    LotteryParams,
    Mechanism,
    MinerAccount,
    Scenario,
    ScenarioError,
    ZeroTotalWeight,
)


def miner(seed, stake, age=1, mid=0):
    return MinerAccount(mid, stake, age, seed)


class TestEligibility:
    def test_saturated_threshold_always_eligible(self):
        params = LotteryParams(difficulty=MASK64, tick_limit=10)
        m = miner(seed=5, stake=10**6)
        assert threshold(m, params, Mechanism.BLACKCOIN_NXT) == HASH_RANGE
        for tick in range(50):
            assert eligibility(m, tick, params, Mechanism.BLACKCOIN_NXT, salt=9).eligible

    def test_zero_stake_never_eligible(self):
        params = LotteryParams(difficulty=MASK64, tick_limit=10)
        m = miner(seed=5, stake=0)
        for tick in range(50):
            assert not eligibility(m, tick, params, Mechanism.PEERCOIN_AGE, salt=9).eligible

    def test_peercoin_threshold_is_difficulty_stake_age(self):
        # stake 5 and age 2 give a threshold of 10 * difficulty
        difficulty = 123_456_789
        params = LotteryParams(difficulty=difficulty, tick_limit=10)
        m = miner(seed=77, stake=5, age=2)
        salt = 31337
        for tick in (0, 1, 9):
            e = eligibility(m, tick, params, Mechanism.PEERCOIN_AGE, salt)
            assert e.proofhash == prf64(77, salt, tick)
            assert e.eligible == (e.proofhash < 10 * difficulty)

    def test_comparison_is_strict_at_the_threshold(self):
        # Choose the difficulty so the threshold equals the proofhash exactly:
        # with stake 1 the miner must NOT be eligible.
        h = prf64(42, 7, 3)
        assert 0 < h < MASK64
        m = miner(seed=42, stake=1)
        at = eligibility(m, 3, LotteryParams(h, 10), Mechanism.BLACKCOIN_NXT, salt=7)
        assert at.proofhash == h and not at.eligible
        above = eligibility(m, 3, LotteryParams(h + 1, 10), Mechanism.BLACKCOIN_NXT, salt=7)
        assert above.eligible


class TestRunLotterySlot:
    def test_single_saturated_miner_wins_tick_zero(self):
        s = Scenario(
            "one", (miner(3, 10),), Mechanism.BLACKCOIN_NXT,
            LotteryParams(MASK64, 100), master_seed=5,
        )
        outcome = run_lottery_slot(s, 0)
        assert outcome.winner == 0
        assert outcome.winning_tick == 0
        assert outcome.winning_hash == prf64(3, slot_salt(5, 0), 0)

    def test_all_zero_stakes_give_empty_slot(self):
        s = Scenario(
            "zero", (miner(3, 0), miner(4, 0, mid=1)), Mechanism.BLACKCOIN_NXT,
            LotteryParams(MASK64, 50), master_seed=5,
        )
        outcome = run_lottery_slot(s, 7)
        assert outcome.empty
        assert outcome.winner is None and outcome.winning_tick is None

    def test_winner_is_lowest_hash_among_eligible(self):
        s = Scenario(
            "two", (miner(11, 1), miner(13, 1, mid=1)), Mechanism.BLACKCOIN_NXT,
            LotteryParams(MASK64, 10), master_seed=2,
        )
        outcome = run_lottery_slot(s, 4)
        salt = slot_salt(2, 4)
        h0, h1 = prf64(11, salt, 0), prf64(13, salt, 0)
        assert outcome.winning_tick == 0
        assert outcome.winner == (0 if h0 < h1 else 1)
        assert outcome.winning_hash == min(h0, h1)

    def test_slots_are_independent_streams(self):
        s = Scenario(
            "one", (miner(3, 10),), Mechanism.BLACKCOIN_NXT,
            LotteryParams(MASK64, 10), master_seed=5,
        )
        hashes = {run_lottery_slot(s, slot).winning_hash for slot in range(64)}
        assert len(hashes) == 64


class TestVectorizedAgreesWithScalar:
    @pytest.mark.parametrize("mech,stakes,ages", [
        (Mechanism.BLACKCOIN_NXT, [1], [1]),
        (Mechanism.BLACKCOIN_NXT, [1, 3], [1, 1]),
        (Mechanism.BLACKCOIN_NXT, [2, 0, 5], [1, 1, 1]),
        (Mechanism.PEERCOIN_AGE, [1, 2], [2, 1]),
        (Mechanism.PEERCOIN_AGE, [3, 1, 2], [1, 4, 0]),
    ])
    def test_batch_matches_reference_including_empty_slots(self, mech, stakes, ages):
        # High per-tick rate and a tiny tick limit: resolutions at various
        # ticks plus a healthy share of empty slots.
        total_w = sum(s * a for s, a in zip(stakes, ages))
        difficulty = max(1, int(0.4 * HASH_RANGE) // max(1, total_w))
        s = make_scenario(stakes, mech, ages=ages, master_seed=77,
                          difficulty=difficulty, tick_limit=2)
        count = 400
        winners, ticks, hashes = run_lottery_slots(s, 0, count)
        saw_empty = False
        for slot in range(count):
            ref = run_lottery_slot(s, slot)
            if ref.empty:
                saw_empty = True
                assert winners[slot] == -1
            else:
                assert winners[slot] == ref.winner
                assert ticks[slot] == ref.winning_tick
                assert int(hashes[slot]) == ref.winning_hash
        if mech is Mechanism.BLACKCOIN_NXT and stakes == [1, 3]:
            assert saw_empty  # the regime actually exercises empties

    def test_batch_start_offset(self):
        s = make_scenario([1, 2], Mechanism.BLACKCOIN_NXT, master_seed=3,
                          difficulty=int(0.3 * HASH_RANGE) // 3, tick_limit=4)
        full_w, full_t, full_h = run_lottery_slots(s, 0, 200)
        part_w, part_t, part_h = run_lottery_slots(s, 150, 50)
        assert np.array_equal(full_w[150:], part_w)
        assert np.array_equal(full_t[150:], part_t)
        assert np.array_equal(full_h[150:], part_h)


def test_equal_stakes_win_equally_often():
    # Two identical-weight miners split wins evenly within 3 binomial sigma.
    n = 100_000
    s = make_scenario([1, 1], Mechanism.BLACKCOIN_NXT, master_seed=404, target_rate=0.05)
    winners, _, _ = run_lottery_slots(s, 0, n)
    nonempty = int((winners >= 0).sum())
    share = int((winners == 0).sum()) / nonempty
    sigma = math.sqrt(0.25 / nonempty)
    assert abs(share - 0.5) < 3 * sigma


class TestCalibrateDifficulty:
    def test_equal_stake_closed_form(self):
        n, stake, rate = 4, 25, 0.01
        s = make_scenario([stake] * n, Mechanism.BLACKCOIN_NXT, difficulty=1)
        expected = int(Fraction(rate) * HASH_RANGE / (n * stake))
        assert calibrate_difficulty(s, rate) == expected

    def test_single_miner_full_rate_closed_form(self):
        for stake in (2, 3, 7, 1000):
            s = make_scenario([stake], Mechanism.BLACKCOIN_NXT, difficulty=1)
            assert calibrate_difficulty(s, 1.0) == HASH_RANGE // stake

    def test_monotone_in_target_rate(self):
        s = make_scenario([10, 20, 30], Mechanism.BLACKCOIN_NXT, difficulty=1)
        rates = [1.0, 0.5, 0.1, 0.01, 0.001]
        diffs = [calibrate_difficulty(s, r) for r in rates]
        assert diffs == sorted(diffs, reverse=True)

    def test_result_meets_rate_and_next_value_does_not(self):
        s = make_scenario([7, 11], Mechanism.PEERCOIN_AGE, ages=[2, 3], difficulty=1)
        rate = Fraction(1, 250)
        d = calibrate_difficulty(s, rate)
        weights = [7 * 2, 11 * 3]
        expected = sum(Fraction(d * w, HASH_RANGE) for w in weights)
        assert expected <= rate
        above = sum(Fraction((d + 1) * w, HASH_RANGE) for w in weights)
        assert above > rate

    def test_zero_weights_rejected(self):
        s = Scenario("z", make_miners([0, 0]), Mechanism.BLACKCOIN_NXT, LotteryParams(1, 1))
        with pytest.raises(ZeroTotalWeight):
            calibrate_difficulty(s, 0.01)

    def test_non_lottery_mechanism_rejected(self):
        s = make_scenario([1, 2], Mechanism.OUROBOROS)
        with pytest.raises(ScenarioError):
            calibrate_difficulty(s, 0.01)

    def test_peercoin_weighting_differs_from_stake_only(self):
        # Uniform age 10 scales total weight by 10: the calibrated difficulty
        # shrinks tenfold (up to flooring).
        s = make_scenario([1, 2], Mechanism.PEERCOIN_AGE, ages=[10, 10], difficulty=1)
        d_age = calibrate_difficulty(s, 0.01, Mechanism.PEERCOIN_AGE)
        d_plain = calibrate_difficulty(s, 0.01, Mechanism.BLACKCOIN_NXT)
        assert d_age == d_plain // 10
