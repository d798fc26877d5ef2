"""Versioned JSON reports; regeneration from the embedded scenario is byte-identical."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .. import crypto
from ..merkle import HASH_NAME
from .scenario import Scenario

REPORT_FORMAT = "ledger-iam-report"
REPORT_VERSION = 1


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def check(name: str, passed, detail: str = "") -> Check:
    return Check(name, bool(passed), detail)


def _clean(value):
    """Make floats JSON-safe: infinities become strings."""
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


@dataclass
class Report:
    scenario: Scenario
    results: dict
    checks: list[Check]
    trace_digest: str
    decisions: list[dict] = field(default_factory=list)
    chain_text: str | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def header(self) -> dict:
        return {"format": REPORT_FORMAT, "version": REPORT_VERSION, "hash": HASH_NAME,
                "signature": crypto.SIGNATURE_SCHEME}

    def to_dict(self) -> dict:
        return {
            "header": self.header(),
            "scenario": self.scenario.to_dict(),
            "results": _clean(self.results),
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
            "trace_digest": self.trace_digest,
            "decision_count": len(self.decisions),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def decisions_jsonl(self) -> str:
        return "".join(json.dumps(_clean(d), sort_keys=True, allow_nan=False) + "\n"
                       for d in self.decisions)

    def summary_lines(self) -> list[str]:
        lines = [f"scenario {self.scenario.name} ({self.scenario.kind}) seed={self.scenario.seed}"]
        lines += [f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.checks]
        lines.append(f"  trace {self.trace_digest}")
        return lines


def write_report(report: Report, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(report.to_json())
    (out / "decisions.jsonl").write_text(report.decisions_jsonl())
    if report.chain_text is not None:
        (out / "chain.txt").write_text(report.chain_text)
    return path


def read_report(path: str | Path) -> dict:
    data = json.loads(Path(path).read_text())
    header = data.get("header", {})
    if header.get("format") != REPORT_FORMAT or header.get("version") != REPORT_VERSION:
        raise ValueError(f"{path} is not a version-{REPORT_VERSION} {REPORT_FORMAT}")
    return data
