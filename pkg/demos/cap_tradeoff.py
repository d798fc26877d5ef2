"""Four providers with different freshness thresholds behind the same partition.

Run with: python3 demos/cap_tradeoff.py
"""
from __future__ import annotations

from ledger_iam.harness import load_scenario, run_scenario


def main() -> None:
    report = run_scenario(load_scenario("cap-dichotomy"))
    print(f"{'provider':8s} {'threshold':>10s} {'fresh':>6s} {'cache':>6s} {'timeouts':>9s} "
          f"{'max wait':>9s}")
    for name, row in report.results["providers"].items():
        print(f"{name:8s} {row['threshold_ms']:>10g} {row['granted_fresh']:>6d} "
              f"{row['granted_cache']:>6d} {row['requestor_timeouts']:>9d} "
              f"{row['max_wait_ms']:>9g}")
    for c in report.checks:
        print(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}")


if __name__ == "__main__":
    main()
