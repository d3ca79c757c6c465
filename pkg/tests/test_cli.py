import json
import subprocess
import sys

import pytest

from movavg.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, run


def _run(tmp_path, *argv):
    code = run([*argv, "--out", str(tmp_path)])
    return code


def _report(tmp_path, command):
    return json.loads((tmp_path / f"{command}.json").read_text())


def test_tower_example(tmp_path, capsys):
    assert _run(tmp_path, "tower", "--theta", "sqrt2m1", "--N", "3", "--delta", "0.5") == EXIT_OK
    rep = _report(tmp_path, "tower")
    assert rep["result"]["tower"]["coverage"] == "9-6*sqrt(2)"
    assert abs(rep["result"]["tower"]["coverage_float"] - 0.51472) < 1e-5
    assert json.loads(capsys.readouterr().out) == rep


def test_deterministic_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["converge", "--K", "300", "--samples", "10", "--seed", "4"]
    assert run(argv + ["--out", str(a)]) == EXIT_OK
    assert run(argv + ["--out", str(b)]) == EXIT_OK
    for name in ("converge.json", "converge.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("family: linear:r=2\nK: 100\ncones:\n  alphas: [1]\n  lambdas: [10]\n")
    assert _run(tmp_path, "cones", "--config", str(cfg), "--lambdas", "20") == EXIT_OK
    rep = _report(tmp_path, "cones")
    assert rep["config"]["K"] == 100 and rep["config"]["lambdas"] == "20"
    assert rep["result"]["sections"] == [{"alpha": "1", "lambda": "20", "size": 37, "intervals": 1}]


def test_config_error_line(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("K: 100\n\nnonsense: 1\n")
    assert _run(tmp_path, "cones", "--config", str(cfg)) == EXIT_CONFIG
    assert "c.yaml:3:" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["tower", "--theta", "1/2", "--N", "3"],
    ["verdict", "--family", "linear:r=1", "--K", "10", "--lambdas", "1,50"],
    ["sweepout", "--family", "linear:r=2", "--K", "100"],
    ["average", "--theta", "golden"],
    ["cones", "--family", "nosuch"],
])
def test_config_errors(tmp_path, argv):
    assert _run(tmp_path, *argv) == EXIT_CONFIG


def test_assertion_exit(tmp_path):
    assert _run(tmp_path, "converge", "--K", "50", "--samples", "5", "--max-deviation", "1/1000") == EXIT_ASSERT
    assert "failure" in _report(tmp_path, "converge")["result"]


def test_sweepout_and_submanifold(tmp_path):
    assert _run(tmp_path, "sweepout", "--family", "squares_unit", "--K", "200", "--p", "2") == EXIT_OK
    res = _report(tmp_path, "sweepout")["result"]
    assert res["ratio"]["ratio"] == "2" and res["oscillation"]["exact_one_found"]
    assert _run(tmp_path, "submanifold") == EXIT_OK
    assert _report(tmp_path, "submanifold")["result"]["mu_E"] == "8/93"


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "movavg", "verdict", "--family", "sqrt", "--K", "2000",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["result"]["verdict"] == "FailsEmpirically"
