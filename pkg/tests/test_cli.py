import json
import subprocess
import sys

import numpy as np
import pytest

from relosc.cli import main, parse_grid


def run(tmp_path, *argv):
    out = tmp_path / "out"
    return main(list(argv) + ["--out", str(out)]), out


def test_parse_grid():
    assert np.allclose(parse_grid("1:100:3"), [1, 10, 100])
    assert np.allclose(parse_grid("0:1:3:lin"), [0, 0.5, 1])
    assert parse_grid("2:2:1").tolist() == [2.0]
    import argparse
    for bad in ("1:2", "0:1:3", "2:1:3", "a:b:c", "1:2:3:cubic"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_grid(bad)


def test_check_exit_codes(tmp_path):
    code, out = run(tmp_path, "check", "--preset", "two-minima-symmetric")
    assert code == 0
    rep = json.loads((out / "check.json").read_text())
    assert rep["report"]["failing"] == [] and rep["config"]["seed"] == 0
    code, out = run(tmp_path, "check", "--preset", "example-3.3")
    assert code == 1
    assert json.loads((out / "check.json").read_text())["report"]["failing"] == ["i2"]


def test_usage_errors(tmp_path, capsys):
    code, out = run(tmp_path, "check", "--instance", str(tmp_path / "missing.json"))
    assert code == 2 and not out.exists()
    assert main(["bogus"]) == 2
    assert main(["minimize", "--preset", "example-3.1"]) == 2  # no lambda
    assert main(["check", "--preset", "example-3.1", "--starts", "0"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"preset": "example-3.1", "extra": 1}')
    assert main(["check", "--instance", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "extra" in capsys.readouterr().err
    assert main(["shoot", "--preset", "example-3.1", "--lambda", "1", "--steps", "8",
                 "--out", str(tmp_path / "o")]) == 2


def test_minimize_and_verify_round_trip(tmp_path):
    code, out = run(tmp_path, "minimize", "--preset", "example-3.1", "--lambda", "1",
                    "--starts", "4", "--grid-n", "32")
    assert code == 0
    text = (out / "path.csv").read_text()
    assert text.startswith("# config: ")
    cfg = json.loads(text.splitlines()[0][len("# config: "):])
    assert cfg["lambda"] == 1.0 and "out" not in cfg
    code2 = main(["verify", "--preset", "example-3.1", "--lambda", "1", "--path",
                  str(out / "path.csv"), "--refine-levels", "1", "--out", str(tmp_path / "v")])
    assert code2 == 0
    cert = json.loads((tmp_path / "v" / "certificate.json").read_text())
    assert cert["certificate"]["passed"] and cert["certificate"]["levels"] == [32, 64]


def test_shoot(tmp_path):
    code, out = run(tmp_path, "shoot", "--preset", "example-3.1", "--lambda", "0.5",
                    "--steps", "256")
    assert code == 0
    roots = json.loads((out / "roots.json").read_text())["shooting"]["roots"]
    assert len(roots) == 1 and roots[0]["u0"][0] == pytest.approx(-0.5, abs=1e-9)


def test_scan_with_param_and_report(tmp_path):
    code, out = run(tmp_path, "scan", "--preset", "example-3.1", "--param", "z=[2.0]",
                    "--lambda-grid", "0.5:2:2", "--starts", "4", "--grid-n", "32")
    assert code == 0
    lines = (out / "scan.csv").read_text().splitlines()
    assert lines[0].startswith("# config: ")
    assert lines[1] == "lambda,best_energy,n_global_clusters,detected"
    assert json.loads(lines[0][10:])["instance"]["params"]["z"] == [2.0]
    rep = tmp_path / "rep"
    assert main(["report", "--from", str(out), "--out", str(rep)]) == 0
    assert (rep / "energy_vs_lambda.svg").exists()
    assert main(["report", "--from", str(tmp_path / "none"), "--out", str(rep)]) == 2


def test_find_two_not_detected_exit_one(tmp_path):
    code, out = run(tmp_path, "find-two", "--preset", "example-3.2", "--lambda-grid", "1:2:2",
                    "--starts", "4", "--grid-n", "32")
    assert code == 1
    assert json.loads((out / "find_two.json").read_text())["result"]["status"] == "not-detected"


def test_wellposed_quadratic(tmp_path):
    code, out = run(tmp_path, "wellposed", "--lab", "quadratic", "--r-grid", "0.5:2:4:lin",
                    "--trials", "8")
    assert code == 0
    data = json.loads((out / "wellposed.json").read_text())
    assert data["alpha_beta"]["alpha"] == 0.0 and data["alpha_beta"]["beta"] == "inf"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "relosc", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
