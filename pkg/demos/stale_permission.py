"""A revoked requestor keeps getting in while the door cannot reach the ledger.

Run with: python3 demos/stale_permission.py
"""
from __future__ import annotations

from ledger_iam.harness import load_scenario, run_scenario


def main() -> None:
    report = run_scenario(load_scenario("stale-permission"))
    rev = report.results["revocation"]
    print(f"revocation mined in block {rev['height']} at {rev['time'] / 60_000:.2f} min")
    for name, row in report.results["providers"].items():
        window = row["stale_window_min"]
        print(f"{name}: threshold {row['threshold_ms']:g} ms, "
              f"{len(row['stale_grants'])} stale grants, window "
              f"{'n/a' if window is None else f'{window:.2f} min'}, "
              f"{row['grants_after_sync']} grants after resync")


if __name__ == "__main__":
    main()
