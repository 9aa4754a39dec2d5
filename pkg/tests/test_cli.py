import json

import pytest

from netform.harness import output
from netform.harness.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, run_cli


def _write(tmp_path, **kw):
    d = {"dimension": 2, "source": "sine2d 1 1", "gamma": 2.0, "r": 0.1, "levels": [4, 8, 16],
         "field": "quadratic"}
    d.update(kw)
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    return p


def test_check_exit_zero(capsys):
    assert run_cli(["check"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 10


def test_missing_scenario(tmp_path, capsys):
    missing = tmp_path / "missing.json"
    assert run_cli(["refine", "--scenario", str(missing), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert str(missing) in capsys.readouterr().err


def test_bad_arguments():
    assert run_cli(["nope"]) == EXIT_CONFIG
    assert run_cli(["refine"]) == EXIT_CONFIG


def test_bad_scenario(tmp_path):
    p = _write(tmp_path, levels=[8, 4])
    assert run_cli(["refine", "--scenario", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_refine_outputs_and_determinism(tmp_path):
    p = _write(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli(["refine", "--scenario", str(p), "--out", str(out1)]) == EXIT_OK
    assert run_cli(["refine", "--scenario", str(p), "--out", str(out2)]) == EXIT_OK
    rows = output.read_rows(out1 / "study.csv")
    assert [r["N"] for r in rows] == [4, 8, 16]
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["passed"] and summary["reference_kind"] == "finest"
    assert (out1 / "study.csv").read_text() == (out2 / "study.csv").read_text()


@pytest.mark.parametrize("cmd,files", [
    ("solve", ["study.csv", "summary.json", "field_c1.svg", "pressure.svg"]),
    ("minimize", ["study.csv", "conductivities_N8.txt"]),
    ("flow", ["trajectory.csv"]),
    ("weakstrong", ["weakstrong.csv"]),
    ("gamma", ["gamma.csv"]),
])
def test_commands(tmp_path, cmd, files):
    p = _write(tmp_path, levels=[4, 8], svg=True, source="dipole 0.25 0.25 0.75 0.75 0.1 10",
               init={"kind": "constant", "value": 1.0}, t_end=0.5)
    if cmd == "gamma":
        p = _write(tmp_path, levels=[4, 8, 16], field="bilinear")
    out = tmp_path / "out"
    assert run_cli([cmd, "--scenario", str(p), "--out", str(out)]) == EXIT_OK
    for f in files:
        assert (out / f).is_file(), f


def test_gamma_gate_is_config_error(tmp_path):
    p = _write(tmp_path, gamma=1.0, field="bilinear")
    assert run_cli(["gamma", "--scenario", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_failed_study_exit_one(tmp_path):
    # one iteration cannot reach the tolerance, so the study reports failure
    p = _write(tmp_path, levels=[8], source="dipole 0.25 0.25 0.75 0.75 0.1 10", max_iter=1, tol=1e-12,
               init={"kind": "constant", "value": 1.0})
    assert run_cli(["minimize", "--scenario", str(p), "--out", str(tmp_path / "o")]) == EXIT_FAIL
