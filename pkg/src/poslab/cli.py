"""Command-line surface: scenario files, experiment runs, result output.

Scenario files are strict JSON: unknown fields are rejected so typos fail
loudly.  Results are written as CSV (plot-friendly, the default) or JSON
(mirrors the result fields).  Identical inputs, flags and seed produce
byte-identical output files regardless of ``POS_LAB_THREADS``.

Exit codes: 0 success, 1 scenario/flag validation errors, 2 internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .experiment import (
    AttackReport,
    EmpiricalResult,
    attacker_dominance,
    run_experiment,
)
from .lottery import DEFAULT_TARGET_RATE, calibrate_difficulty, default_lottery_params
from .stake import (
    HASH_LOTTERY_MECHANISMS,
    LotteryParams,
    Mechanism,
    MinerAccount,
    Scenario,
    ScenarioError,
    validate_scenario,
)

DEFAULT_TRIALS = 1_000_000


class ParseError(ValueError):
    """Malformed scenario file or command line."""


class ValidationError(ValueError):
    """Scenario content violates a model invariant."""


@dataclass
class RunConfig:
    """Options of one CLI run."""

    scenario_path: str | Path
    trials: int = DEFAULT_TRIALS
    seed_override: int | None = None
    output_path: str | Path | None = None
    output_format: str = "csv"

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.output_format not in ("csv", "json"):
            raise ParseError(f"unknown output format {self.output_format!r}")


# ---------------------------------------------------------------------------
# Scenario loading
# ---------------------------------------------------------------------------

_MECHANISMS = {m.value: m for m in Mechanism}


def _require_keys(obj: dict, allowed: dict, where: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ParseError(f"unknown field {key!r} in {where}")
    for key, required in allowed.items():
        if required and key not in obj:
            raise ParseError(f"missing required field {key!r} in {where}")


def _as_int(value, name: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ParseError(f"field {name!r} must be an integer, got {value!r}")
    return value


def load_scenario(path: str | Path, seed_override: int | None = None) -> Scenario:
    """Parse and validate a scenario file.

    ``seed_override`` replaces the file's master seed before any derived
    miner seeds are computed, so an override re-seeds the whole scenario.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: scenario document must be a JSON object")

    _require_keys(
        raw,
        {"name": True, "mechanism": True, "master_seed": True, "miners": True, "lottery": False},
        "scenario",
    )
    if not isinstance(raw["name"], str):
        raise ParseError("field 'name' must be a string")
    mechanism_name = raw["mechanism"]
    if mechanism_name not in _MECHANISMS:
        raise ParseError(
            f"unknown mechanism {mechanism_name!r}; expected one of {sorted(_MECHANISMS)}"
        )
    master_seed = seed_override if seed_override is not None else _as_int(raw["master_seed"], "master_seed")

    if not isinstance(raw["miners"], list) or not raw["miners"]:
        raise ParseError("field 'miners' must be a non-empty array")
    miners = []
    for i, entry in enumerate(raw["miners"]):
        if not isinstance(entry, dict):
            raise ParseError(f"miners[{i}] must be an object")
        _require_keys(
            entry,
            {"id": True, "stake": True, "coin_age": False, "seed": False},
            f"miners[{i}]",
        )
        miners.append(
            dict(
                id=_as_int(entry["id"], f"miners[{i}].id"),
                stake=_as_int(entry["stake"], f"miners[{i}].stake"),
                coin_age=_as_int(entry.get("coin_age", 1), f"miners[{i}].coin_age"),
                seed=None if "seed" not in entry else _as_int(entry["seed"], f"miners[{i}].seed"),
            )
        )

    lottery = None
    if "lottery" in raw and raw["lottery"] is not None:
        entry = raw["lottery"]
        if not isinstance(entry, dict):
            raise ParseError("field 'lottery' must be an object")
        _require_keys(entry, {"difficulty": True, "tick_limit": True}, "lottery")
        lottery = dict(
            difficulty=_as_int(entry["difficulty"], "lottery.difficulty"),
            tick_limit=_as_int(entry["tick_limit"], "lottery.tick_limit"),
        )

    try:
        scenario = Scenario(
            name=raw["name"],
            miners=tuple(MinerAccount(**m) for m in miners),
            mechanism=_MECHANISMS[mechanism_name],
            lottery=LotteryParams(**lottery) if lottery else None,
            master_seed=master_seed,
        )
        return validate_scenario(scenario)
    except ScenarioError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Result serialization
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    """Numbers at 12 significant digits with a '.' decimal separator."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return f"{x:.12g}"


def _round12(x: float) -> float:
    return float(f"{x:.12g}")


def result_to_dict(result: EmpiricalResult) -> dict:
    """JSON-ready mapping mirroring the result fields."""
    return {
        "scenario_name": result.scenario_name,
        "mechanism": result.mechanism.value,
        "trials": result.trials,
        "empty_slots": result.empty_slots,
        "wins": [[mid, c] for mid, c in result.wins],
        "frequencies": [_round12(f) for f in result.frequencies],
        "theoretical": [_round12(t) for t in result.theoretical],
        "ci99": [[_round12(lo), _round12(hi)] for lo, hi in result.ci99],
        "chi_square": _round12(result.chi_square),
        "chi_square_df": result.chi_square_df,
        "p_value": _round12(result.p_value),
        "gof_pass": result.gof_pass,
        "stakes": list(result.stakes),
        "coin_ages": list(result.coin_ages),
        "master_seed": result.master_seed,
    }


def _result_rows(result: EmpiricalResult) -> list[str]:
    rows = ["miner_id,stake,coin_age,theoretical_p,empirical_p,wins,ci99_low,ci99_high"]
    for (mid, count), stake, age, theo, freq, (lo, hi) in zip(
        result.wins, result.stakes, result.coin_ages, result.theoretical,
        result.frequencies, result.ci99,
    ):
        rows.append(
            f"{mid},{stake},{age},{_fmt(theo)},{_fmt(freq)},{count},{_fmt(lo)},{_fmt(hi)}"
        )
    rows.append(
        f"# chi_square={_fmt(result.chi_square)} df={result.chi_square_df}"
        f" p_value={_fmt(result.p_value)} gof_pass={_fmt(result.gof_pass)}"
        f" trials={result.trials} empty_slots={result.empty_slots}"
        f" seed={result.master_seed}"
    )
    return rows


def _emit(text: str, output_path) -> None:
    if output_path is None:
        sys.stdout.write(text)
    else:
        with open(output_path, "w", newline="") as fh:
            fh.write(text)


def write_results(result: EmpiricalResult, config: RunConfig) -> None:
    """Serialize one experiment result per the configured format."""
    if config.output_format == "json":
        text = json.dumps(result_to_dict(result), indent=2) + "\n"
    else:
        text = "\n".join(_result_rows(result)) + "\n"
    _emit(text, config.output_path)


def attack_report_to_dict(report: AttackReport) -> dict:
    return {
        "attacker_id": report.attacker_id,
        "stake_ratio": _round12(report.stake_ratio),
        "dominance_eq1": _round12(report.dominance_eq1),
        "dominance_mechanism": _round12(report.dominance_mechanism),
        "mechanism": report.mechanism.value,
    }


def write_attack_report(report: AttackReport, config: RunConfig) -> None:
    if config.output_format == "json":
        text = json.dumps(attack_report_to_dict(report), indent=2) + "\n"
    else:
        text = (
            "attacker_id,stake_ratio,dominance_eq1,dominance_mechanism,mechanism\n"
            f"{report.attacker_id},{_fmt(report.stake_ratio)},{_fmt(report.dominance_eq1)},"
            f"{_fmt(report.dominance_mechanism)},{report.mechanism.value}\n"
        )
    _emit(text, config.output_path)


def write_comparison(results: list[EmpiricalResult], config: RunConfig) -> None:
    """Merged per-mechanism table for one stake distribution."""
    if config.output_format == "json":
        text = json.dumps([result_to_dict(r) for r in results], indent=2) + "\n"
    else:
        rows = ["mechanism,miner_id,stake,coin_age,theoretical_p,empirical_p,wins"]
        for result in results:
            for (mid, count), stake, age, theo, freq in zip(
                result.wins, result.stakes, result.coin_ages,
                result.theoretical, result.frequencies,
            ):
                rows.append(
                    f"{result.mechanism.value},{mid},{stake},{age},"
                    f"{_fmt(theo)},{_fmt(freq)},{count}"
                )
        text = "\n".join(rows) + "\n"
    _emit(text, config.output_path)


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # The CLI contract reserves exit code 2 for internal errors, so usage
    # problems surface as ParseError (exit 1) instead of argparse's default.
    def error(self, message):
        raise ParseError(f"{message}\n{self.format_usage()}")


def _add_common(parser: argparse.ArgumentParser, scenario_required: bool = True) -> None:
    parser.add_argument("--scenario", required=scenario_required, help="scenario JSON file")
    parser.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help="slots to simulate")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario master seed")
    parser.add_argument("--out", default=None, help="output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="poslab", description="Proof-of-stake leader-election simulation lab")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("simulate", parents=[], help="run one scenario and emit its result")
    _add_common(p)

    p = sub.add_parser(
        "compare",
        help="run one stake distribution under every mechanism and both probability models",
    )
    _add_common(p)

    p = sub.add_parser("attack", help="report a staker's dominance under both next-block models")
    _add_common(p, scenario_required=False)
    p.add_argument("--ratio", type=float, default=None, help="attacker stake ratio for a synthetic two-miner scenario")
    p.add_argument("--beta", type=int, default=100, help="total stake of the synthetic scenario")
    p.add_argument("--attacker-id", type=int, default=None, help="attacker miner id (with --scenario)")
    p.add_argument(
        "--mechanism",
        choices=sorted(_MECHANISMS),
        default=Mechanism.BLACKCOIN_NXT.value,
        help="mechanism for the synthetic scenario",
    )

    p = sub.add_parser("calibrate", help="emit the lottery difficulty for a target eligibility rate")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--rate", type=float, default=DEFAULT_TARGET_RATE, help="target eligible miners per tick")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    return parser


def _ensure_lottery(scenario: Scenario) -> Scenario:
    if scenario.mechanism in HASH_LOTTERY_MECHANISMS and scenario.lottery is None:
        return replace(scenario, lottery=default_lottery_params(scenario))
    return scenario


def _cmd_simulate(args) -> int:
    config = RunConfig(args.scenario, args.trials, args.seed, args.out, args.format)
    scenario = load_scenario(config.scenario_path, config.seed_override)
    write_results(run_experiment(scenario, config.trials), config)
    return 0


def _cmd_compare(args) -> int:
    config = RunConfig(args.scenario, args.trials, args.seed, args.out, args.format)
    base = load_scenario(config.scenario_path, config.seed_override)
    results = []
    for mechanism in Mechanism:
        variant = _ensure_lottery(replace(base, mechanism=mechanism))
        results.append(run_experiment(variant, config.trials))
    write_comparison(results, config)
    return 0


def _cmd_attack(args) -> int:
    if (args.ratio is None) == (args.scenario is None):
        raise ParseError("attack needs exactly one of --ratio or --scenario")
    if args.scenario is not None:
        config = RunConfig(args.scenario, args.trials, args.seed, args.out, args.format)
        scenario = load_scenario(config.scenario_path, config.seed_override)
        attacker_id = args.attacker_id if args.attacker_id is not None else scenario.miners[0].id
    else:
        if not 0.0 <= args.ratio <= 1.0:
            raise ValidationError(f"--ratio must lie in [0, 1], got {args.ratio}")
        if args.beta < 1:
            raise ValidationError("--beta must be a positive integer")
        config = RunConfig("<synthetic>", args.trials, args.seed, args.out, args.format)
        attacker_stake = round(args.ratio * args.beta)
        # Split the remaining stake across two miners so that no bystander
        # holds a majority; otherwise the auction-style model would hand it
        # every slot and mask the attacker's own dominance.
        rest = args.beta - attacker_stake
        scenario = Scenario(
            name=f"attack-ratio-{args.ratio}",
            miners=(
                MinerAccount(0, attacker_stake),
                MinerAccount(1, rest - rest // 2),
                MinerAccount(2, rest // 2),
            ),
            mechanism=_MECHANISMS[args.mechanism],
            master_seed=args.seed if args.seed is not None else 0,
        )
        scenario = _ensure_lottery(scenario)
        attacker_id = 0
    report = attacker_dominance(scenario, attacker_id, config.trials)
    write_attack_report(report, config)
    return 0


def _cmd_calibrate(args) -> int:
    scenario = load_scenario(args.scenario)
    difficulty = calibrate_difficulty(scenario, args.rate)
    _emit(f"{difficulty}\n", args.out)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "attack": _cmd_attack,
    "calibrate": _cmd_calibrate,
}


def cli_main(argv) -> int:
    """Run the CLI; returns the process exit code instead of raising."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ParseError(f"a command is required\n{parser.format_usage()}")
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except (ParseError, ValidationError, ScenarioError, ValueError) as exc:
        print(f"poslab: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"poslab: i/o error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"poslab: internal error: {exc!r}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
