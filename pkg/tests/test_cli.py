from __future__ import annotations

import json
import subprocess

from ledger_iam.cli import main
from ledger_iam.harness import load_scenario


def test_bound_prints_eq(capsys):
    assert main(["bound", "--block-size", "1000000", "--tx-size", "400",
                 "--mining-time", "2.5"]) == 0
    assert capsys.readouterr().out.strip() == "1000 enrolments/minute"


def test_bound_invalid_params(capsys):
    assert main(["bound", "--block-size", "0", "--tx-size", "400", "--mining-time", "2.5"]) == 2
    assert "error" in capsys.readouterr().err


def test_run_and_verify(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "smart-vehicle", "--seed", "17", "--out", str(out)]) == 0
    data = json.loads((out / "report.json").read_text())
    assert data["scenario"]["seed"] == 17 and data["passed"]
    assert main(["verify", str(out / "report.json")]) == 0
    assert "OK" in capsys.readouterr().out


def test_run_failing_scenario_exits_nonzero(tmp_path):
    enrol = load_scenario("enrolment-internal").to_dict()
    enrol["workload"].update(identities=50, min_rate_per_min=10_000)
    path = tmp_path / "e.json"
    path.write_text(json.dumps(enrol))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 1
    assert not json.loads((tmp_path / "o" / "report.json").read_text())["passed"]


def test_bad_scenario_exit_code(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_console_entry_point(tmp_path):
    r = subprocess.run(["ledger-iam", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "enrolment" in r.stdout.split()
