import json
import subprocess
import sys

import pytest

from curtail.cli import main

SMALL = """name = "small"

[design]
alpha = 0.05
beta = 0.15
p0 = 0.1
p1 = 0.3

[search]
families = ["simon", "nsc", "mstage"]
grid_step = 0.05

[search.n_max]
simon = 32
nsc = 32
mstage = 32
block = 32
"""

DESIGN = ["--family", "mstage", "--r", "5", "--n", "20", "--theta-f", "0.1", "--theta-e", "0.95"]


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return str(path)


def _run(args, out):
    rc = main(args + ["--out", str(out)])
    return rc, {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_search_writes_tables(small, tmp_path):
    rc, files = _run(["search", "--scenario", small, "--workers", "1"], tmp_path / "a")
    assert rc == 0
    assert set(files) == {"table.csv", "admissible_simon.csv", "admissible_nsc.csv", "admissible_mstage.csv"}
    lines = files["table.csv"].decode().splitlines()
    assert lines[0].startswith("# curtail ") and "command=search" in lines[0]
    assert lines[1].startswith("criterion,design,r1,e1,n1,r,n2,n,ess0,pct_s_p0")
    assert any(line.startswith("h0opt,Wald,") for line in lines)
    assert any(line.startswith("h1minimax,m-stage,") for line in lines)


def test_search_output_is_byte_identical(small, tmp_path):
    _, a = _run(["search", "--scenario", small, "--workers", "1"], tmp_path / "a")
    _, b = _run(["search", "--scenario", small, "--workers", "2"], tmp_path / "b")
    assert a == b


def test_infeasible_search_warns(small, tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(SMALL.replace("= 32", "= 12"))
    rc, files = _run(["search", "--scenario", str(path), "--workers", "1", "--criterion", "h0opt"], tmp_path / "o")
    assert rc == 0
    text = files["table.csv"].decode()
    assert "# warning: no feasible m-stage design" in text


def test_evaluate_json(tmp_path):
    rc, files = _run(["evaluate", "--alpha", "0.05", "--beta", "0.15", "--p0", "0.1", "--p1", "0.3"] + DESIGN, tmp_path)
    assert rc == 0
    doc = json.loads(files["evaluate.json"])
    assert doc["command"] == "evaluate"
    assert 0.0 < doc["alpha"] < 1.0 and doc["ess0"] <= 20


def test_theta_order_rejected(tmp_path, capsys):
    bad = DESIGN[:-4] + ["--theta-f", "0.9", "--theta-e", "0.5"]
    rc = main(["evaluate", "--scenario", "scenario1", "--out", str(tmp_path)] + bad)
    assert rc != 0
    assert "error" in capsys.readouterr().err


def test_bad_scenario_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL.replace("beta = 0.15", "beta = 2"))
    rc = main(["wald", "--scenario", str(path), "--out", str(tmp_path)])
    assert rc == 2
    assert "bad.toml:5:" in capsys.readouterr().err


def test_cp_matrix_and_theta(tmp_path):
    rc, files = _run(["cp-matrix", "--scenario", "scenario1"] + DESIGN, tmp_path)
    assert rc == 0
    rows = files["cp_matrix.csv"].decode().splitlines()
    assert rows[1] == "s,m,cp,status,reachable"
    assert len(rows) == 2 + 21 * 22 // 2
    assert "theta_cdf.csv" in files


def test_omni(small, tmp_path):
    rc, files = _run(["omni", "--scenario", small, "--workers", "1", "--families", "nsc,mstage"], tmp_path)
    assert rc == 0
    assert {"omni_grid.csv", "family_loss.csv", "loss_diff_nsc_mstage.csv"} <= set(files)
    grid = files["omni_grid.csv"].decode().splitlines()
    assert len(grid) == 2 + 231


def test_wald_and_audit(tmp_path):
    rc, files = _run(["wald", "--scenario", "scenario1"], tmp_path / "w")
    assert rc == 0
    doc = json.loads(files["wald.json"])
    assert round(doc["ess0"], 1) == 13.9
    rc, files = _run(["audit", "--scenario", "scenario1"] + DESIGN, tmp_path / "a")
    assert rc == 0
    assert json.loads(files["audit.json"])["ok"]


def test_estimators_for_one_design(tmp_path):
    args = ["estimators", "--scenario", "scenario1", "--family", "simon", "--r1", "1", "--n1", "10", "--r", "5", "--n", "29"]
    rc, files = _run(args, tmp_path)
    assert rc == 0
    summary = files["estimator_summary.csv"].decode().splitlines()
    assert summary[1] == "design,realisation,estimator,max_abs_bias,max_rmse"
    assert len(summary) == 2 + 5


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "curtail", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("curtail ")
