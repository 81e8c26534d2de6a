"""poslab: a proof-of-stake leader-election simulation lab.

Implements the leader-selection rules of the early and modern PoS families
(coin-age and plain-stake threshold hash lotteries, stake-weighted election,
lowest-hash sortition with stake splitting) next to two closed-form
next-block probability models, and provides a Monte Carlo engine with
goodness-of-fit statistics to measure which model each mechanism obeys.
"""

from .experiment import (
    AttackReport,
    EmpiricalResult,
    FairnessReport,
    attacker_dominance,
    binomial_ci99,
    chi_square_gof,
    fairness_report,
    run_experiment,
)
from .lottery import (
    LotteryParams,
    SlotOutcome,
    TickEligibility,
    calibrate_difficulty,
    eligibility,
    run_lottery_slot,
)
from .models import (
    StakeQuery,
    proportional_next_block_probability,
    saad_next_block_probability,
    theoretical_selection_probabilities,
)
from .prf import prf64
from .sortition import UnitAccountSet, algorand_select, ouroboros_select, split_stake
from .stake import (
    Mechanism,
    MinerAccount,
    Scenario,
    Weighting,
    normalize_stakes,
    validate_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AttackReport",
    "EmpiricalResult",
    "FairnessReport",
    "LotteryParams",
    "Mechanism",
    "MinerAccount",
    "Scenario",
    "SlotOutcome",
    "StakeQuery",
    "TickEligibility",
    "UnitAccountSet",
    "Weighting",
    "algorand_select",
    "attacker_dominance",
    "binomial_ci99",
    "calibrate_difficulty",
    "chi_square_gof",
    "eligibility",
    "fairness_report",
    "normalize_stakes",
    "ouroboros_select",
    "prf64",
    "proportional_next_block_probability",
    "run_experiment",
    "run_lottery_slot",
    "saad_next_block_probability",
    "split_stake",
    "theoretical_selection_probabilities",
    "validate_scenario",
    "__version__",
]
