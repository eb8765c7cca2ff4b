"""Command-line interface.

Subcommands: ``simulate``, ``compare``, ``scenario generate`` and
``scenario eval``. Exit codes: 0 on success, 1 for usage or config
errors, 2 for runtime faults.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import runner, scenario
from .alloc import POLICIES
from .config import load_config, load_scenario_config
from .errors import (
    ComponentFault,
    EdgefedError,
    MismatchedScenarios,
    ParseError,
    UnknownKey,
    ValidationError,
)

USAGE_EXIT = 1
FAULT_EXIT = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="edgefed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one federation experiment")
    sim.add_argument("--config", required=True, help="experiment config (YAML)")
    sim.add_argument("--out", required=True, help="output directory for run CSVs")
    sim.add_argument("--seed", type=int, default=None, help="override kernel seed")
    sim.add_argument("--policy", choices=POLICIES, default=None, help="override policy")

    cmp_ = sub.add_parser("compare", help="baseline-vs-candidate summary deltas")
    cmp_.add_argument("baseline_summary", help="path to the baseline summary.csv")
    cmp_.add_argument("candidate_summary", help="path to the candidate summary.csv")

    scen = sub.add_parser("scenario", help="synthetic sensor-window tooling")
    scen_sub = scen.add_subparsers(dest="scenario_command", required=True)

    gen = scen_sub.add_parser("generate", help="generate a sensor-window dataset")
    gen.add_argument("--config", required=True, help="scenario config (YAML)")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument(
        "--anomaly-rate", type=float, default=None,
        help="override the anomalous-window fraction",
    )

    ev = scen_sub.add_parser("eval", help="train on one dataset, report MSE on another")
    ev.add_argument("--train", required=True, help="training dataset directory")
    ev.add_argument("--test", required=True, help="test dataset directory")
    return parser


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, kernel=replace(config.kernel, seed=args.seed))
    if args.policy is not None:
        config = replace(config, policy=args.policy)
    summary = runner.run_experiment(config, args.out)
    fed = summary.federation
    print(f"policy={summary.policy} seed={summary.seed}")
    print(
        f"it_energy_kwh={fed.it_energy_kwh:.6g} cooling_energy_kwh={fed.cooling_energy_kwh:.6g} "
        f"grid_energy_kwh={fed.grid_energy_kwh:.6g} cost_eur={fed.cost_eur:.6g}"
    )
    print(
        f"sessions_served={fed.sessions_served} sessions_blocked={fed.sessions_blocked} "
        f"mean_pue={fed.mean_pue:.6g}"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_compare(args) -> int:
    baseline = runner.read_summary(args.baseline_summary)
    candidate = runner.read_summary(args.candidate_summary)
    report = runner.compare(baseline, candidate)
    for line in report.lines():
        print(line)
    return 0


def _cmd_scenario_generate(args) -> int:
    sconfig = load_scenario_config(args.config)
    fraction = sconfig.anomaly_fraction if args.anomaly_rate is None else args.anomaly_rate
    windows = scenario.generate_dataset(
        sconfig.generator,
        sconfig.n_windows,
        sconfig.seed,
        sconfig.anomaly,
        fraction,
        start_time=sconfig.start_time,
    )
    scenario.write_windows_csv(
        args.out, windows, sconfig.generator, seed=sconfig.seed, anomaly=sconfig.anomaly
    )
    n_anom = sum(1 for w in windows if w.anomaly is not None)
    print(f"windows={len(windows)} anomalous={n_anom} wrote {args.out}")
    return 0


def _cmd_scenario_eval(args) -> int:
    train = scenario.read_windows_csv(args.train)
    test = scenario.read_windows_csv(args.test)
    predictor = scenario.train_predictor(train)
    temp_mse, hum_mse = scenario.evaluate(predictor, test)
    print(f"train_windows={len(train)} test_windows={len(test)}")
    print(f"temp_mse={temp_mse:.6g} hum_mse={hum_mse:.6g}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "scenario":
            if args.scenario_command == "generate":
                return _cmd_scenario_generate(args)
            return _cmd_scenario_eval(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ParseError, ValidationError, UnknownKey, MismatchedScenarios) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ComponentFault, EdgefedError, OSError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return FAULT_EXIT


if __name__ == "__main__":
    sys.exit(main())
