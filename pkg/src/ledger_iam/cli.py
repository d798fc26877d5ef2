"""Command line: run scenarios, evaluate the throughput bound, verify reports."""
from __future__ import annotations

import argparse
import sys

from .harness import builtin_scenarios, load_scenario, run_scenario, verify_report, write_report
from .harness.scenario import ScenarioConfig
from .ledger import InvalidParams, LedgerParams, theoretical_upper_bound
from .netsim import ScheduleConflict


def _run(args) -> int:
    scenario = load_scenario(args.scenario).with_seed(args.seed)
    report = run_scenario(scenario)
    path = write_report(report, args.out)
    print("\n".join(report.summary_lines()))
    print(f"report written to {path}")
    return 0 if report.passed else 1


def _bound(args) -> int:
    params = LedgerParams(block_size_bytes=args.block_size, tx_size_bytes=args.tx_size,
                          avg_mining_time_min=args.mining_time)
    print(f"{theoretical_upper_bound(params):g} enrolments/minute")
    return 0


def _verify(args) -> int:
    ok, messages = verify_report(args.report)
    for m in messages:
        print(m)
    print("OK" if ok else "FAILED")
    return 0 if ok else 1


def _list(args) -> int:
    for name in builtin_scenarios():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ledger-iam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or built-in scenario name")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", required=True, help="directory for report.json and logs")
    run.set_defaults(func=_run)

    bound = sub.add_parser("bound", help="theoretical enrolment ceiling of a ledger")
    bound.add_argument("--block-size", type=int, required=True, help="bytes per block")
    bound.add_argument("--tx-size", type=int, required=True, help="bytes per transaction")
    bound.add_argument("--mining-time", type=float, required=True, help="minutes per block")
    bound.set_defaults(func=_bound)

    verify = sub.add_parser("verify", help="re-run a report's scenario and compare")
    verify.add_argument("report")
    verify.set_defaults(func=_verify)

    ls = sub.add_parser("list", help="list built-in scenarios")
    ls.set_defaults(func=_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioConfig, ScheduleConflict, InvalidParams, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
