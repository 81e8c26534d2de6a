"""Monte Carlo engine and statistical verification.

Runs a scenario's mechanism over many independent slots, tallies per-miner
win frequencies, and tests them against the mechanism's selection
probabilities with a chi-square goodness-of-fit test.  Also quantifies the
contrast between the auction-style and proportional next-block models via
:func:`attacker_dominance`, and summarizes concentration of block production
with Gini and Nakamoto-coefficient metrics.

Trials are partitioned into fixed-size slot batches; batches are pure
functions of (scenario, slot range) and merge by addition, so results are
bit-identical for any worker count (``POS_LAB_THREADS`` caps the pool).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .lottery import run_lottery_slots
from .models import theoretical_selection_probabilities
from .prf import absorb, np_absorb, np_prf64
from .sortition import split_stake
from .stake import (
    Mechanism,
    Scenario,
    Weighting,
    normalize_stakes,
    validate_scenario,
)

#: Slots per work batch.  Fixed so that batch boundaries, and therefore the
#: merged tallies, never depend on the worker count.
BATCH_SLOTS = 1 << 16

#: Significance level for goodness-of-fit acceptance.
GOF_SIGNIFICANCE = 0.01

#: Categories with expected count below this are pooled before the test.
POOL_MIN_EXPECTED = 5

#: Normal quantile used for the 99% binomial confidence interval.
Z99 = 2.576


class DegenerateTest(ValueError):
    pass


class UnknownAttackerId(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalResult:
    """Win tallies of one experiment plus the statistics derived from them.

    ``wins`` pairs each miner id with its win count, in scenario order;
    ``frequencies`` are counts over non-empty slots.  ``stakes``,
    ``coin_ages`` and ``master_seed`` echo the inputs so a result is
    self-contained for reporting.
    """

    scenario_name: str
    mechanism: Mechanism
    trials: int
    empty_slots: int
    wins: tuple[tuple[int, int], ...]
    frequencies: tuple[float, ...]
    theoretical: tuple[float, ...]
    ci99: tuple[tuple[float, float], ...]
    chi_square: float
    chi_square_df: int
    p_value: float
    gof_pass: bool
    stakes: tuple[int, ...]
    coin_ages: tuple[int, ...]
    master_seed: int

    def __post_init__(self) -> None:
        if sum(c for _, c in self.wins) + self.empty_slots != self.trials:
            raise ValueError("win counts plus empty slots must equal trials")

    @property
    def nonempty_slots(self) -> int:
        return self.trials - self.empty_slots


@dataclass(frozen=True)
class AttackReport:
    """Win fraction of one miner under both next-block models."""

    attacker_id: int
    stake_ratio: float
    dominance_eq1: float
    dominance_mechanism: float
    mechanism: Mechanism


class FairnessReport(NamedTuple):
    max_abs_deviation: float
    gini_stake: float
    gini_wins: float
    nakamoto_coefficient: int


# ---------------------------------------------------------------------------
# Chi-square machinery
# ---------------------------------------------------------------------------


def _gamma_series_p(s: float, x: float) -> float:
    # Lower regularized gamma P(s, x) by power series; converges for x < s+1.
    ap = s
    term = 1.0 / s
    total = term
    for _ in range(500):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _gamma_cf_q(s: float, x: float) -> float:
    # Upper regularized gamma Q(s, x) by modified Lentz continued fraction.
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, 500):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + s * math.log(x) - math.lgamma(s))


def regularized_upper_gamma(s: float, x: float) -> float:
    """Q(s, x) = Gamma(s, x) / Gamma(s) for s > 0, x >= 0."""
    if s <= 0:
        raise ValueError("s must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 1.0
    if x < s + 1.0:
        return 1.0 - _gamma_series_p(s, x)
    return _gamma_cf_q(s, x)


def chi2_sf(statistic: float, df: int) -> float:
    """Chi-square survival function: P(X >= statistic) at df degrees."""
    if df < 1:
        raise ValueError("df must be positive")
    if statistic <= 0.0:
        return 1.0
    if math.isinf(statistic):
        return 0.0
    return regularized_upper_gamma(df / 2.0, statistic / 2.0)


def chi_square_gof(
    counts: Sequence[int],
    expected_probs: Sequence,
    n: int,
) -> tuple[float, int, float]:
    """Pearson chi-square test of counts against an expected distribution.

    Expected probabilities are taken as exact rationals (floats convert
    exactly); categories with expected count below 5 are pooled into one
    residual category.  Returns (statistic, degrees of freedom, p-value).
    Raises DegenerateTest when fewer than two categories survive pooling.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if len(counts) != len(expected_probs):
        raise ValueError("counts and expected_probs must have equal length")
    if sum(counts) != n:
        raise ValueError(f"counts sum to {sum(counts)}, expected n={n}")
    probs = [Fraction(p) for p in expected_probs]
    if any(p < 0 for p in probs):
        raise ValueError("expected probabilities must be non-negative")
    if abs(sum(probs) - 1) > Fraction(1, 2**40):
        raise ValueError("expected probabilities must sum to 1")

    categories: list[tuple[int, Fraction]] = []
    pooled_obs = 0
    pooled_exp = Fraction(0)
    pooled_any = False
    for observed, p in zip(counts, probs):
        expected = p * n
        if expected < POOL_MIN_EXPECTED:
            pooled_obs += observed
            pooled_exp += expected
            pooled_any = True
        else:
            categories.append((observed, expected))
    if pooled_any:
        categories.append((pooled_obs, pooled_exp))
    if len(categories) < 2:
        raise DegenerateTest("fewer than 2 categories after pooling")

    statistic = 0.0
    for observed, expected in categories:
        e = float(expected)
        if e == 0.0:
            if observed:
                statistic = math.inf
                break
            continue
        statistic += (observed - e) ** 2 / e
    df = len(categories) - 1
    return statistic, df, chi2_sf(statistic, df)


def binomial_ci99(count: int, n: int) -> tuple[float, float]:
    """99% confidence interval for a binomial proportion.

    Normal approximation p +- 2.576 * sqrt(p(1-p)/n) clamped to [0, 1]; at
    the boundaries (count 0 or n) the exact one-sided Clopper-Pearson bound
    at the 1% level is used instead.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= count <= n:
        raise ValueError("count must satisfy 0 <= count <= n")
    if count == 0:
        return 0.0, min(1.0, 1.0 - 0.01 ** (1.0 / n))
    if count == n:
        return max(0.0, 0.01 ** (1.0 / n)), 1.0
    p = count / n
    half = Z99 * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


# ---------------------------------------------------------------------------
# Monte Carlo engine
# ---------------------------------------------------------------------------


def resolve_worker_count() -> int:
    """Worker count: available parallelism, capped by POS_LAB_THREADS."""
    available = os.cpu_count() or 1
    raw = os.environ.get("POS_LAB_THREADS")
    if raw is None:
        return available
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"POS_LAB_THREADS must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"POS_LAB_THREADS must be a positive integer, got {raw!r}")
    return min(available, cap)


def _saad_winner_position(scenario: Scenario) -> int | None:
    """Position of the miner the auction-style model makes certain, if any.

    When several miners sit exactly at half the total stake, the lowest id
    wins every slot; certainty for more than one miner is unrealizable.
    """
    beta = scenario.total_stake
    qualifiers = [
        (m.id, pos) for pos, m in enumerate(scenario.miners) if 2 * m.stake >= beta
    ]
    if not qualifiers:
        return None
    return min(qualifiers)[1]


def effective_selection_probabilities(scenario: Scenario) -> list[Fraction]:
    """The distribution the simulation actually targets, as exact rationals.

    Identical to the theoretical vector except for the auction-style model
    with a majority staker, whose per-miner vector is not a distribution;
    there the simulated behavior is degenerate: the majority miner wins
    every slot.
    """
    if scenario.mechanism is Mechanism.SAAD_MODEL:
        winner = _saad_winner_position(scenario)
        if winner is not None:
            return [Fraction(1) if pos == winner else Fraction(0) for pos in range(len(scenario.miners))]
        beta = scenario.total_stake
        return [Fraction(m.stake, beta) for m in scenario.miners]
    return theoretical_selection_probabilities(scenario)


class _Engine:
    """Prepared per-mechanism state for batched slot evaluation."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.n = len(scenario.miners)
        mech = scenario.mechanism
        if mech in (Mechanism.PEERCOIN_AGE, Mechanism.BLACKCOIN_NXT):
            self.kind = "lottery"
            self.position_of = {m.id: pos for pos, m in enumerate(scenario.miners)}
        elif mech is Mechanism.ALGORAND:
            self.kind = "argmin"
            unit = math.gcd(*(m.stake for m in scenario.miners))
            sets = [split_stake(m, unit) for m in scenario.miners if m.stake > 0]
            seeds: list[int] = []
            owner_pos: list[int] = []
            positions = {m.id: pos for pos, m in enumerate(scenario.miners)}
            for account_set in sets:
                for seed, _ in account_set.accounts:
                    seeds.append(seed)
                    owner_pos.append(positions[account_set.owner_id])
            # prf64(seed, salt, 0) evaluated in stages: the key absorption is
            # salt-independent, so precompute it once per account.
            self.account_acc1 = np.array([absorb(0, s) for s in seeds], dtype=np.uint64)
            self.owner_pos = np.array(owner_pos, dtype=np.int64)
        elif mech is Mechanism.SAAD_MODEL and _saad_winner_position(scenario) is not None:
            self.kind = "fixed"
            self.fixed_winner = _saad_winner_position(scenario)
        else:
            # Ouroboros, ProportionalModel, and the sub-majority auction model
            # all sample the stake-proportional distribution with one draw.
            self.kind = "weighted"
            weights = normalize_stakes(scenario.miners, Weighting.STAKE_ONLY)
            self.cum = np.cumsum(np.array(weights, dtype=np.float64))
            self.last_positive = max(i for i, w in enumerate(weights) if w > 0)

    def run(self, start: int, count: int) -> tuple[np.ndarray, int]:
        """Tally winners for slots [start, start+count)."""
        scenario = self.scenario
        if self.kind == "fixed":
            counts = np.zeros(self.n, dtype=np.int64)
            counts[self.fixed_winner] = count
            return counts, 0
        if self.kind == "weighted":
            slots = np.arange(start, start + count, dtype=np.uint64)
            draws = np_prf64(scenario.master_seed, slots, 2).astype(np.float64) * 2.0**-64
            idx = np.searchsorted(self.cum, draws, side="right")
            idx[idx >= self.n] = self.last_positive
            return np.bincount(idx, minlength=self.n), 0
        if self.kind == "argmin":
            slots = np.arange(start, start + count, dtype=np.uint64)
            salts = np_prf64(scenario.master_seed, slots, 0)
            state = np_absorb(self.account_acc1[None, :], salts[:, None])
            h = np_absorb(state, np.zeros(1, dtype=np.uint64))
            col = np.argmin(h, axis=1)
            minima = h[np.arange(count), col]
            tie_rows = np.nonzero((h == minima[:, None]).sum(axis=1) > 1)[0]
            for row in tie_rows:
                # Hash tie: lowest account seed wins (then list order).
                candidates = np.nonzero(h[row] == minima[row])[0]
                col[row] = min(candidates, key=lambda c: int(self.account_acc1[c]))
            winners = self.owner_pos[col]
            return np.bincount(winners, minlength=self.n), 0
        # lottery
        winner_ids, _, _ = run_lottery_slots(scenario, start, count)
        valid = winner_ids >= 0
        empties = int(count - valid.sum())
        pos = np.fromiter(
            (self.position_of[i] for i in winner_ids[valid].tolist()),
            dtype=np.int64,
            count=int(valid.sum()),
        )
        return np.bincount(pos, minlength=self.n), empties


def run_experiment(scenario: Scenario, trials: int) -> EmpiricalResult:
    """Evaluate ``trials`` independent slots and fill an EmpiricalResult.

    Reproducible: the result is a pure function of (scenario, trials),
    independent of worker count and scheduling.
    """
    validate_scenario(scenario)
    if trials < 1:
        raise ValueError("trials must be positive")
    engine = _Engine(scenario)
    batches = [(start, min(BATCH_SLOTS, trials - start)) for start in range(0, trials, BATCH_SLOTS)]
    workers = resolve_worker_count()
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: engine.run(*b), batches))
    else:
        parts = [engine.run(*b) for b in batches]
    counts = np.zeros(len(scenario.miners), dtype=np.int64)
    empty_slots = 0
    for part_counts, part_empty in parts:
        counts += part_counts
        empty_slots += part_empty
    return _build_result(scenario, trials, counts, empty_slots)


def _build_result(
    scenario: Scenario, trials: int, counts: np.ndarray, empty_slots: int
) -> EmpiricalResult:
    nonempty = trials - empty_slots
    count_list = [int(c) for c in counts]
    theoretical = theoretical_selection_probabilities(scenario)
    if nonempty > 0:
        frequencies = tuple(c / nonempty for c in count_list)
        ci99 = tuple(binomial_ci99(c, nonempty) for c in count_list)
        try:
            statistic, df, p_value = chi_square_gof(
                count_list, effective_selection_probabilities(scenario), nonempty
            )
        except DegenerateTest:
            # One category (e.g. a single miner): trivially consistent.
            statistic, df, p_value = 0.0, 1, 1.0
        gof_pass = p_value >= GOF_SIGNIFICANCE
    else:
        # No slot produced a winner; report no fit rather than a fake one.
        frequencies = tuple(0.0 for _ in count_list)
        ci99 = tuple((0.0, 1.0) for _ in count_list)
        statistic, df, p_value, gof_pass = 0.0, 1, 0.0, False
    return EmpiricalResult(
        scenario_name=scenario.name,
        mechanism=scenario.mechanism,
        trials=trials,
        empty_slots=empty_slots,
        wins=tuple((m.id, c) for m, c in zip(scenario.miners, count_list)),
        frequencies=frequencies,
        theoretical=tuple(float(p) for p in theoretical),
        ci99=ci99,
        chi_square=statistic,
        chi_square_df=df,
        p_value=p_value,
        gof_pass=gof_pass,
        stakes=tuple(m.stake for m in scenario.miners),
        coin_ages=tuple(m.coin_age for m in scenario.miners),
        master_seed=scenario.master_seed,
    )


def attacker_dominance(scenario: Scenario, attacker_id: int, trials: int) -> AttackReport:
    """Win fraction of one miner under the auction-style model and under the
    scenario's own mechanism, over the same number of slots.

    Whenever the attacker holds at least half the stake, the auction-style
    dominance is exactly 1.0.
    """
    validate_scenario(scenario)
    by_id = {m.id: m for m in scenario.miners}
    if attacker_id not in by_id:
        raise UnknownAttackerId(f"no miner with id {attacker_id}")
    attacker = by_id[attacker_id]

    def fraction(result: EmpiricalResult) -> float:
        wins = dict(result.wins)[attacker_id]
        return wins / result.nonempty_slots if result.nonempty_slots else 0.0

    eq1 = run_experiment(replace(scenario, mechanism=Mechanism.SAAD_MODEL), trials)
    own = run_experiment(scenario, trials)
    return AttackReport(
        attacker_id=attacker_id,
        stake_ratio=attacker.stake / scenario.total_stake,
        dominance_eq1=fraction(eq1),
        dominance_mechanism=fraction(own),
        mechanism=scenario.mechanism,
    )


# ---------------------------------------------------------------------------
# Fairness metrics
# ---------------------------------------------------------------------------


def gini(values: Sequence[int | float]) -> float:
    """Gini coefficient by the sorted cumulative formula; 0 for equal shares."""
    n = len(values)
    total = sum(values)
    if n == 0 or total == 0:
        return 0.0
    ordered = sorted(values)
    weighted = sum((rank + 1) * v for rank, v in enumerate(ordered))
    return 2.0 * weighted / (n * total) - (n + 1) / n


def nakamoto_coefficient(win_counts: Sequence[int]) -> int:
    """Minimum number of miners jointly exceeding half the wins."""
    total = sum(win_counts)
    if total == 0:
        raise ValueError("no wins recorded")
    cumulative = 0
    for k, c in enumerate(sorted(win_counts, reverse=True), start=1):
        cumulative += c
        if 2 * cumulative > total:
            return k
    return len(win_counts)


def fairness_report(result: EmpiricalResult) -> FairnessReport:
    """Deviation-from-model and concentration metrics for one result."""
    if result.nonempty_slots < 1:
        raise ValueError("fairness metrics need at least one non-empty slot")
    counts = [c for _, c in result.wins]
    max_dev = max(
        abs(f - t) for f, t in zip(result.frequencies, result.theoretical)
    )
    return FairnessReport(
        max_abs_deviation=max_dev,
        gini_stake=gini(result.stakes),
        gini_wins=gini(counts),
        nakamoto_coefficient=nakamoto_coefficient(counts),
    )
