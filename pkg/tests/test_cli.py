import json
from pathlib import Path

import pytest

from crackenergy import __version__
from crackenergy.cli import EXIT_NUMERIC, EXIT_OK, EXIT_SCENARIO, EXIT_USAGE, emit_report, main

ROOT = Path(__file__).resolve().parents[1]
EDGE = str(ROOT / "scenarios" / "edge_mode3.yaml")

FLAT = """
name: flat
domain:
  outer: [[0, 0], [1, 0], [1, 1], [0, 1]]
  crack: []
boundary: {type: linear, A: [[1.0, 0.0]]}
mesh: {h: 0.125}
"""


@pytest.fixture
def flat(tmp_path):
    p = tmp_path / "flat.yaml"
    p.write_text(FLAT)
    return str(p)


def _load(path):
    return json.loads(Path(path).read_text())


def test_solve_uncracked(flat, tmp_path):
    out = tmp_path / "run"
    assert main(["solve", "--scenario", flat, "--out", str(out)]) == EXIT_OK
    rec = _load(out / "solve.json")
    assert rec["results"]["energy"] == pytest.approx(0.5, rel=1e-12)
    assert rec["version"] == __version__ and len(rec["scenario_digest"]) == 16
    assert all(c["passed"] for c in rec["checks"])
    assert (out / "field.csv").exists() and (out / "mesh.txt").exists() and (out / "run_meta.json").exists()


def test_cli_k2_concentration_command_edge(tmp_path):
    out = tmp_path / "run"
    assert main(["verify-thm61", "--scenario", EDGE, "--out", str(out)]) == EXIT_OK
    tip = _load(out / "verify-thm61.json")["results"]["reports"][0]
    assert tip["lhs"] == pytest.approx(tip["rhs"], rel=0.05)


def test_propagate_without_growth(tmp_path):
    out = tmp_path / "run"
    args = ["propagate", "--scenario", str(ROOT / "scenarios" / "propagate.yaml"), "--out", str(out),
            "--mesh-h", "0.0625", "--set", "griffith.G=1e12", "--set", "schedule.steps=3"]
    assert main(args) == EXIT_OK
    rows = (out / "trajectory.jsonl").read_text().splitlines()
    assert len(rows) == 4 and not any(json.loads(r)["grew"] for r in rows)
    assert _load(out / "propagate.json")["results"]["length_increase"] == 0.0


def test_usage_errors_exit_1(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["solve"]) == EXIT_USAGE
    assert main(["solve", "--scenario", EDGE, "--convention", "other"]) == EXIT_USAGE


def test_scenario_errors_exit_2(flat, tmp_path):
    assert main(["solve", "--scenario", str(tmp_path / "missing.yaml")]) == EXIT_SCENARIO
    assert main(["solve", "--scenario", flat, "--set", "mesh.h=0", "--out", str(tmp_path)]) == EXIT_SCENARIO


def test_numeric_failure_exit_3(tmp_path):
    # at h = 1/8 the tip concentration has too few radii: a numerical failure
    out = tmp_path / "run"
    assert main(["concentration", "--scenario", EDGE, "--out", str(out), "--mesh-h", "0.125"]) == EXIT_NUMERIC
    rec = _load(out / "concentration.json")
    assert rec["error"]["type"] == "ConcentrationError" and rec["exit_status"] == EXIT_NUMERIC


def test_report_empty_dir(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == EXIT_USAGE


def test_report_single_run(flat, tmp_path):
    main(["solve", "--scenario", flat, "--out", str(tmp_path)])
    rep = emit_report(tmp_path)
    assert len(rep["records"]) == 1 and rep["passed"]
    assert (tmp_path / "report.csv").read_text().startswith("command,check,value")


def test_report_full_suite(tmp_path):
    cmds = ["solve", "dtn", "j-integral", "concentration", "verify-thm61", "prop51", "minimaxi"]
    for c in cmds:
        assert main([c, "--scenario", EDGE, "--out", str(tmp_path)]) == EXIT_OK
    assert main(["report", "--out", str(tmp_path)]) == EXIT_OK
    rep = _load(tmp_path / "report.json")
    assert sorted(r["command"] for r in rep["records"]) == sorted(cmds)
    assert all(r["checks"] for r in rep["records"])
