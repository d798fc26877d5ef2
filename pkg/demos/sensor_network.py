"""Offline sensors updated by a visiting operator, and a rogue that forges blocks.

Run with: python3 demos/sensor_network.py
"""
from __future__ import annotations

from ledger_iam.harness import load_scenario, run_scenario


def main() -> None:
    report = run_scenario(load_scenario("sensor-network"))
    r = report.results
    print(f"operator carried {r['chain_height']} blocks")
    for name, d in r["dispatches"].items():
        print(f"  {name}: {d['accepted']}/{d['offered']} accepted, pulls {r['pulls'][name]}")
    f = r["forgery"]
    print(f"rogue forged block {f['at']}: {f['accepted']} accepted, {f['rejected']} rejected; "
          f"honest catch-up then accepted {f['honest_after']['accepted']}")
    print("all checks passed" if report.passed else "some checks FAILED")


if __name__ == "__main__":
    main()
