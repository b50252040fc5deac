import csv
import io
import json

import numpy as np
import pytest
from click.testing import CliRunner

from convflow import ProbabilityMeasure, make_group
from convflow.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args):
    return runner.invoke(main, list(args))


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_evolve_monotone(runner):
    res = run(runner, "evolve", "--group", "2", "--mu", "0.75,0.25", "--t", "0.5", "--steps", "10")
    assert res.exit_code == 0, res.output
    rows = rows_of(res.output)
    assert list(rows[0]) == ["step", "t_effective", "w_0", "w_1", "tv_to_attractor"]
    assert len(rows) == 11
    tv = [float(r["tv_to_attractor"]) for r in rows]
    assert tv[-1] <= tv[0]
    assert all(b <= a for a, b in zip(tv, tv[1:]))
    assert float(rows[3]["t_effective"]) == 0.875
    assert float(rows[1]["w_1"]) == pytest.approx(1 / 3, abs=1e-15)


def test_evolve_fixed_and_constant(runner):
    res = run(runner, "evolve", "--group", "2,2", "--mu", "uniform", "--t", "0.3", "--steps", "4")
    rows = rows_of(res.output)
    weights = {tuple(v for k, v in r.items() if k.startswith("w_")) for r in rows}
    assert len(weights) == 1
    assert list(rows[0])[2:6] == ["w_0_0", "w_1_0", "w_0_1", "w_1_1"]
    res = run(runner, "evolve", "--group", "4", "--mu", "0.1,0.2,0.3,0.4", "--t", "0", "--steps", "3")
    rows = rows_of(res.output)
    assert all([r["w_0"], r["w_1"], r["w_2"], r["w_3"]] == ["0.1", "0.2", "0.3", "0.4"] for r in rows)


def test_evolve_sweep_parallel_matches_serial(runner):
    args = ["evolve", "--group", "4", "--mu", "0.4,0.3,0.2,0.1", "--t", "0.2,0.5,0.9", "--steps", "5"]
    serial = run(runner, *args)
    parallel = run(runner, *args, "--parallel")
    assert serial.exit_code == 0 and serial.output == parallel.output
    rows = rows_of(serial.output)
    assert list(rows[0])[0] == "t" and len(rows) == 18


def test_evolve_json_and_out(runner, tmp_path):
    out = tmp_path / "traj.json"
    res = run(runner, "evolve", "--group", "2", "--mu", "delta:1", "--t", "0.5", "--steps", "2",
              "--format", "json", "--out", str(out))
    assert res.exit_code == 0 and res.output == ""
    doc = json.loads(out.read_text())
    assert doc["columns"][0] == "step" and len(doc["rows"]) == 3
    assert doc["rows"][1][3] == pytest.approx(2 / 3, abs=1e-15)


def test_report_basic_sets(runner):
    res = run(runner, "report", "basic-sets", "--group", "4")
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert doc["kind"] == "basic-sets"
    assert len(doc["report"]["entries"]) == 3


def test_report_jacobian(runner):
    res = run(runner, "report", "jacobian", "--group", "2,2", "--mu", "uniform", "--t", "0.9")
    doc = json.loads(res.output)["report"]
    vals = np.array(doc["tangent_eigenvalues"])
    assert vals.shape == (3, 2)
    assert np.allclose(vals[:, 0], 0.1, atol=1e-10) and np.allclose(vals[:, 1], 0)
    assert doc["fixed_point"] is True
    assert np.allclose(doc["matrix"], doc["closed_form_matrix"], atol=1e-10)


def test_report_witness(runner):
    res = run(runner, "report", "witness", "--group", "2,2", "--mu", "0,0,1,0", "--t", "0.5")
    assert res.exit_code == 0
    assert json.loads(res.output)["report"]["not-in-image"] is True
    res = run(runner, "report", "witness", "--group", "2,2", "--mu", "delta:2", "--t", "0.3")
    rep = json.loads(res.output)["report"]
    assert rep["not-in-image"] is True and rep["min_weight"] < 0


@pytest.mark.parametrize("kind", ["limit", "fixed-points", "cokernel", "kernel", "acyclic"])
def test_other_reports(runner, kind):
    res = run(runner, "report", kind, "--group", "2,2", "--mu", "0,0.5,0,0.5")
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    assert doc["kind"] == kind


def test_limit_report_klein_edge(runner):
    res = run(runner, "report", "limit", "--group", "[2,2]", "--mu", "[0,0.5,0,0.5]")
    rep = json.loads(res.output)["report"]
    assert rep["acyclic"] is False and rep["cycle_length"] == 2
    assert np.allclose(rep["predicted"][0]["weights"], 0.25)


def test_measure_file_round_trip(runner, tmp_path):
    rng = np.random.default_rng(7)
    mu = ProbabilityMeasure(make_group([2, 3]), rng.dirichlet(np.ones(6)))
    path = tmp_path / "mu.json"
    path.write_text(json.dumps(mu.to_json()))
    res = run(runner, "report", "acyclic", "--mu", f"@{path}")
    assert res.exit_code == 0, res.output
    res = run(runner, "evolve", "--mu", str(path), "--t", "0.5", "--steps", "0", "--format", "json")
    row = json.loads(res.output)["rows"][0]
    # written and re-read weights are bit-identical
    assert np.array(row[2:8]).tobytes() == mu.weights.tobytes()


def test_deterministic_reports(runner):
    args = ["report", "basic-sets", "--group", "2,4", "--seed", "11"]
    assert run(runner, *args).output == run(runner, *args).output


@pytest.mark.parametrize("args,code", [
    (["evolve", "--group", "2", "--mu", "0.7,0.7"], 2),
    (["evolve", "--group", "0", "--mu", "uniform"], 2),
    (["evolve", "--group", "2", "--mu", "uniform", "--t", "1.0"], 2),
    (["evolve", "--group", "2", "--mu", "uniform", "--t", "abc"], 2),
    (["evolve", "--group", "2", "--mu", "uniform", "--tol", "0"], 2),
    (["evolve", "--mu", "uniform"], 2),
    (["evolve", "--group", "2"], 2),
    (["report", "witness", "--group", "2", "--mu", "uniform"], 2),
    (["report", "witness", "--group", "2", "--mu", "uniform", "--t", "0"], 2),
    (["report", "basic-sets", "--group", "128"], 3),
    (["report", "limit", "--group", "12", "--mu", "delta:0", "--steps", "5"], 0),
    # supp {1,5} in Z12 is not acyclic; its powers cannot settle in 5 steps
    (["report", "limit", "--group", "12", "--mu", "0,0.999,0,0,0,0.001,0,0,0,0,0,0", "--steps", "5"], 4),
    (["report", "fixed-points", "--group", "4", "--format", "csv"], 2),
])
def test_exit_codes(runner, args, code):
    res = run(runner, *args)
    assert res.exit_code == code, res.output
    if code:
        assert "error:" in res.output  # CliRunner merges stderr by default
