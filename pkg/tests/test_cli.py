import json
import subprocess
import sys

import pytest

from support_modules.test_tools.fixtures import scenario_path


# Helper functions


def run_monoflow(args, cwd, timeout=120):
    process = subprocess.Popen(
        [sys.executable, "-m", "monoflow"] + [str(a) for a in args],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        cwd=cwd
    )
    try:
        stdout, stderr = process.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        process.kill()
        process.communicate()
        raise
    return {
        "stdout": stdout.decode().replace("\r", ""),
        "stderr": stderr.decode().replace("\r", ""),
        "status": process.returncode
    }


# Tests


def test_help(tmp_path):
    result = run_monoflow(["--help"], tmp_path)
    assert result["status"] == 0
    for command in ("simulate", "classify", "analyze", "mincut", "resilience", "verify-policy"):
        assert command in result["stdout"]


def test_mincut_motivating(tmp_path):
    result = run_monoflow(["mincut", "-s", scenario_path("motivating_softmax.json"), "-o", tmp_path / "out"], tmp_path)
    assert result["status"] == 0, result["stderr"]
    data = json.loads(result["stdout"])
    assert data["best_value"] == -1
    assert sorted(data["maximizers"]) == [["a"], ["a", "b"]]
    assert data["u_star"] == ["a", "b"]
    assert data["min_cut_capacity"] == 3
    assert json.loads((tmp_path / "out" / "mincut.json").read_text()) == data


def test_mincut_records_csv(tmp_path):
    result = run_monoflow(["mincut", "-s", scenario_path("motivating_softmax.json"), "--records", "--format", "csv"], tmp_path)
    assert result["status"] == 0, result["stderr"]
    lines = result["stdout"].splitlines()
    assert lines[0] == "cut,inflow,capacity,value"
    assert len(lines) == 8
    assert "a b,2,3,-1" in lines


def test_parse_error(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text('{"network": ')
    result = run_monoflow(["simulate", "-s", broken], tmp_path)
    assert result["status"] == 2
    error = json.loads(result["stdout"])["error"]
    assert error["name"] == "FLOW_PARSE_ERROR"


def test_validation_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"network": {"links": [{"id": "1", "tail": "o", "head": "o", "capacity": 1}],
                                           "inflows": {"o": 1}}}))
    result = run_monoflow(["mincut", "-s", bad], tmp_path)
    assert result["status"] == 3
    assert json.loads(result["stdout"])["error"]["name"] == "FLOW_VALIDATION_ERROR"


def test_simulate_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    result = run_monoflow(["simulate", "-s", scenario_path("finite_overload.json"), "-o", out], tmp_path)
    assert result["status"] == 0, result["stderr"]
    data = json.loads(result["stdout"])
    assert data["termination"] == "buffer_hit"
    assert data["kappa_interval"][1] <= 8.0
    assert json.loads((out / "termination.json").read_text())["termination"] == "buffer_hit"
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header.startswith("t,rho_1,rho_2")


def test_simulate_is_deterministic(tmp_path):
    args = ["simulate", "-s", scenario_path("motivating_softmax.json"), "--t-max", "20"]
    first = run_monoflow(args, tmp_path)
    second = run_monoflow(args, tmp_path)
    assert first["status"] == second["status"] == 0
    assert first["stdout"] == second["stdout"]


def test_classify_overload(tmp_path):
    result = run_monoflow(["classify", "-s", scenario_path("finite_overload.json")], tmp_path)
    assert result["status"] == 0, result["stderr"]
    data = json.loads(result["stdout"])
    assert data["B"]
    assert set(data["links"]) == {"1", "2", "3", "4", "5"}


def test_analyze_equilibrium(tmp_path):
    result = run_monoflow(["analyze", "-s", scenario_path("motivating_softmax.json"), "-o", tmp_path / "out"], tmp_path)
    assert result["status"] == 0, result["stderr"]
    data = json.loads(result["stdout"])
    assert data["verdict"] == "equilibrium"
    assert (tmp_path / "out" / "analysis.json").exists()


def test_verify_policy_softmax(tmp_path):
    junit = tmp_path / "junit.xml"
    result = run_monoflow(["verify-policy", "--suite", "axioms", "--suite", "sign", "-n", "2", "--junit", junit],
                          tmp_path)
    assert result["status"] == 0, result["stdout"]
    assert json.loads(result["stdout"])["passed"] is True
    assert junit.exists()


def test_verify_rejects_unknown_suite(tmp_path):
    result = run_monoflow(["verify-policy", "--suite", "speed"], tmp_path)
    assert result["status"] == 2


@pytest.mark.slow
def test_resilience_r3(tmp_path):
    out = tmp_path / "res"
    result = run_monoflow(["resilience", "-s", scenario_path("resilience_R3.json"), "-o", out], tmp_path, timeout=1200)
    assert result["status"] == 0, result["stderr"]
    lines = (out / "resilience.csv").read_text().splitlines()
    assert lines[0] == "delta,nu_hat,nu_theory,perturbation"
    assert float(lines[1].split(",")[1]) == pytest.approx(1.0, abs=0.05)


def overloaded_chain(tmp_path, **extra):
    path = tmp_path / "chain.json"
    data = {
        "name": "overloaded chain",
        "network": {
            "links": [{"id": "1", "tail": "o", "head": "v", "capacity": 2, "buffer": 2},
                      {"id": "2", "tail": "v", "head": "d", "capacity": 1, "buffer": 2}],
            "inflows": {"o": 1.5},
        },
        "integration": {"t_max": 100.0},
    }
    data.update(extra)
    path.write_text(json.dumps(data))
    return path


def test_simulate_failures(tmp_path):
    out = tmp_path / "run"
    result = run_monoflow(["simulate", "-s", overloaded_chain(tmp_path), "--failures", "-o", out], tmp_path)
    assert result["status"] == 0, result["stderr"]
    data = json.loads(result["stdout"])
    assert data["termination"] == "origin_cut_off"
    assert data["cut_off_origins"] == ["o"]
    assert "1" in data["failed_links"]
    failures = json.loads((out / "failures.json").read_text())
    assert failures["failed_links"] == data["failed_links"]
    assert failures["events"][0]["interval"] == data["kappa_interval"]


def test_simulate_failures_from_scenario(tmp_path):
    result = run_monoflow(["simulate", "-s", overloaded_chain(tmp_path, failures=True)], tmp_path)
    assert result["status"] == 0, result["stderr"]
    assert json.loads(result["stdout"])["termination"] == "origin_cut_off"


def test_simulate_failures_rejects_staged(tmp_path):
    result = run_monoflow(["simulate", "-s", scenario_path("staged_R2.json"), "--failures"], tmp_path)
    assert result["status"] == 2
    assert json.loads(result["stdout"])["error"]["name"] == "FLOW_BAD_PARAMETER"
