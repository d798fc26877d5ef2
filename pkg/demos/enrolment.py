"""Enrol 1000 devices through a channel-capped imprinter, then raise the cap.

Run with: python3 demos/enrolment.py [seed]
"""
from __future__ import annotations

import sys

from ledger_iam.harness import load_scenario, run_scenario
from ledger_iam.ledger import LedgerParams, theoretical_upper_bound


def describe(label: str, run: dict) -> None:
    gen, ann, imp = run["stages"]
    print(f"{label}: cap {run['cap']}, {run['imprinted']} imprinted in {run['total_min']:.1f} min "
          f"({run['rate_per_min']:.2f}/min)")
    print(f"  generation {gen['mean']:.2f} ms, announce {ann['mean']:.2f} min, "
          f"imprint {imp['mean']:.2f} min (means)")


def main() -> None:
    scenario = load_scenario("enrolment")
    if len(sys.argv) > 1:
        scenario = scenario.with_seed(int(sys.argv[1]))
    print(f"ledger ceiling: {theoretical_upper_bound(LedgerParams()):g} enrolments/minute")
    report = run_scenario(scenario)
    describe("baseline", report.results["base"])
    describe("wider channel", report.results["compare"])
    print("all checks passed" if report.passed else "some checks FAILED")


if __name__ == "__main__":
    main()
