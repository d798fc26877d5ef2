"""Scenario runners, reports and the command-line entry point."""
from __future__ import annotations

from pathlib import Path

from .attack import run_stale_permission_attack
from .cap import run_cap_dichotomy
from .casestudies import run_sensor_network, run_smart_vehicle
from .enrolment import fit_service_time, run_enrolment, simulate_enrolment
from .report import Check, Report, read_report, write_report
from .scenario import Scenario, ScenarioConfig, builtin_scenarios, load_scenario
from .stats import EmptyStats, StageStats, Summary, summarize

RUNNERS = {
    "enrolment": run_enrolment,
    "stale_permission": run_stale_permission_attack,
    "cap_dichotomy": run_cap_dichotomy,
    "smart_vehicle": run_smart_vehicle,
    "sensor_network": run_sensor_network,
}


def run_scenario(scenario: Scenario) -> Report:
    return RUNNERS[scenario.kind](scenario)


def verify_report(path: str | Path) -> tuple[bool, list[str]]:
    """Re-run the scenario embedded in a report and compare byte for byte.

    Returns (ok, messages); ok needs an identical regeneration and every
    recorded check passing.
    """
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    stored = path.read_text()
    data = read_report(path)
    fresh = run_scenario(Scenario.from_dict(data["scenario"]))
    messages = []
    identical = fresh.to_json() == stored
    messages.append("regeneration byte-identical" if identical
                    else "regeneration differs from stored report")
    if fresh.trace_digest != data.get("trace_digest"):
        messages.append(f"trace digest {fresh.trace_digest} != {data.get('trace_digest')}")
    failed = [c["name"] for c in data.get("checks", []) if not c["passed"]]
    messages += [f"failed check: {name}" for name in failed]
    return identical and not failed, messages


__all__ = [
    "Check", "EmptyStats", "RUNNERS", "Report", "Scenario", "ScenarioConfig", "StageStats",
    "Summary", "builtin_scenarios", "fit_service_time", "load_scenario", "read_report",
    "run_cap_dichotomy", "run_enrolment", "run_scenario", "run_sensor_network",
    "run_smart_vehicle", "run_stale_permission_attack", "simulate_enrolment", "summarize",
    "verify_report", "write_report",
]
