"""Unlocking a car from a phone, with and without the cloud, against a token flow.

Run with: python3 demos/smart_vehicle.py
"""
from __future__ import annotations

from ledger_iam.harness import load_scenario, run_scenario


def main() -> None:
    report = run_scenario(load_scenario("smart-vehicle"))
    for a in report.results["attempts"]:
        ours, theirs = a["ledger_iam"], a["traditional"]
        where = "cloud cut" if a["cloud_cut"] else "online"
        print(f"t={a['time_ms'] / 60_000:5.1f} min ({where:9s}) ledger: {ours['outcome']}"
              f"({ours['basis']}) in {ours['messages_sent']} msgs; token flow: "
              f"{theirs['outcome']} in {theirs['messages_sent']} msgs")


if __name__ == "__main__":
    main()
