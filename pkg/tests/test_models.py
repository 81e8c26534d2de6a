from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_miners, make_scenario
from poslab.models import (
    StakeQuery,
    proportional_next_block_probability,
    saad_next_block_probability,
    theoretical_selection_probabilities,
)
from poslab.stake import Mechanism, Scenario, ZeroTotalWeight


def test_stake_query_invariants():
    with pytest.raises(ValueError):
        StakeQuery(-1, 10)
    with pytest.raises(ValueError):
        StakeQuery(11, 10)
    with pytest.raises(ValueError):
        StakeQuery(0, 0)


def test_saad_model_values():
    assert saad_next_block_probability(StakeQuery(30, 100)) == Fraction(3, 10)
    assert saad_next_block_probability(StakeQuery(51, 100)) == 1
    # the boundary ratio of exactly one half falls on the certain branch
    assert saad_next_block_probability(StakeQuery(50, 100)) == 1
    assert saad_next_block_probability(StakeQuery(0, 100)) == 0


def test_proportional_model_values():
    assert proportional_next_block_probability(StakeQuery(51, 100)) == Fraction(51, 100)
    assert proportional_next_block_probability(StakeQuery(100, 100)) == 1
    assert proportional_next_block_probability(StakeQuery(25, 100)) == Fraction(1, 4)


queries = st.tuples(
    st.integers(min_value=0, max_value=10**9), st.integers(min_value=1, max_value=10**9)
).filter(lambda ab: ab[0] <= ab[1])


@given(queries)
@settings(max_examples=300)
def test_models_agree_below_half_and_diverge_above(ab):
    alpha, beta = ab
    q = StakeQuery(alpha, beta)
    saad = saad_next_block_probability(q)
    prop = proportional_next_block_probability(q)
    if 2 * alpha < beta:
        assert saad == prop
    else:
        assert saad == 1
        assert saad - prop == 1 - Fraction(alpha, beta)


def test_theoretical_blackcoin_equal_stakes():
    s = make_scenario([1, 1, 1, 1], Mechanism.BLACKCOIN_NXT)
    assert theoretical_selection_probabilities(s) == [Fraction(1, 4)] * 4


def test_theoretical_peercoin_uses_stake_times_age():
    s = make_scenario([1, 2], Mechanism.PEERCOIN_AGE, ages=[2, 1])
    assert theoretical_selection_probabilities(s) == [Fraction(1, 2), Fraction(1, 2)]


def test_theoretical_ouroboros():
    s = make_scenario([1, 2, 3], Mechanism.OUROBOROS)
    assert theoretical_selection_probabilities(s) == [
        Fraction(1, 6),
        Fraction(1, 3),
        Fraction(1, 2),
    ]


def test_stake_weighted_mechanisms_share_one_formula():
    vectors = [
        theoretical_selection_probabilities(make_scenario([5, 7, 11], mech))
        for mech in (
            Mechanism.BLACKCOIN_NXT,
            Mechanism.OUROBOROS,
            Mechanism.ALGORAND,
            Mechanism.PROPORTIONAL_MODEL,
        )
    ]
    assert all(v == vectors[0] for v in vectors)


def test_non_saad_vectors_sum_to_one_exactly():
    for mech in (Mechanism.PEERCOIN_AGE, Mechanism.BLACKCOIN_NXT, Mechanism.ALGORAND):
        s = make_scenario([3, 0, 9], mech, ages=[1, 5, 2])
        vector = theoretical_selection_probabilities(s)
        assert sum(vector) == 1
        assert all(0 <= p <= 1 for p in vector)


def test_saad_vector_can_exceed_one_with_majority_staker():
    s = make_scenario([51, 49], Mechanism.SAAD_MODEL)
    vector = theoretical_selection_probabilities(s)
    assert vector == [Fraction(1), Fraction(49, 100)]
    assert sum(vector) > 1


def test_theoretical_zero_weight_error():
    s = Scenario("s", make_miners([1, 1], ages=[0, 0]), Mechanism.PEERCOIN_AGE)
    with pytest.raises(ZeroTotalWeight):
        theoretical_selection_probabilities(s)


@given(st.lists(st.integers(min_value=0, max_value=10**6), min_size=1, max_size=10),
       st.integers(min_value=2, max_value=1000))
@settings(max_examples=100)
def test_exact_rational_scale_invariance(stakes, scale):
    if sum(stakes) == 0:
        return
    base = theoretical_selection_probabilities(make_scenario(stakes, Mechanism.OUROBOROS))
    scaled = theoretical_selection_probabilities(
        make_scenario([s * scale for s in stakes], Mechanism.OUROBOROS)
    )
    assert base == scaled
