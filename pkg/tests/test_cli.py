"""Command-line behaviors: outputs, exit codes, file round-trips."""
from __future__ import annotations

import json

import pytest

from helpers import FIVE_EDGE_PARENTS, TRAP_PARENTS, TRAP_TARGET, TRAP_VARS, tree_from
from outagekit.cli import main
from outagekit.network import dump_feeder


@pytest.fixture
def five_edge_feeder(tmp_path):
    tree = tree_from(FIVE_EDGE_PARENTS, variances=1e-4)
    path = tmp_path / "five.json"
    path.write_text(json.dumps(dump_feeder(tree, [])))
    return str(path)


@pytest.fixture
def trap_feeder(tmp_path):
    tree = tree_from(TRAP_PARENTS, variances=TRAP_VARS)
    path = tmp_path / "trap.json"
    path.write_text(json.dumps(dump_feeder(tree, ["e1"])))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_enumerate_golden(capsys, five_edge_feeder):
    code, out, _ = run(capsys, ["enumerate", "--feeder", five_edge_feeder])
    assert code == 0
    found = {tuple(h) for h in json.loads(out)}
    assert found == {
        (),
        ("e1",),
        ("e2",),
        ("e3",),
        ("e4",),
        ("e5",),
        ("e3", "e5"),
        ("e4", "e5"),
    }


def test_enumerate_respects_outage_bound(capsys, five_edge_feeder):
    code, out, _ = run(
        capsys, ["enumerate", "--feeder", five_edge_feeder, "--max-outages", "1"]
    )
    assert code == 0
    assert len(json.loads(out)) == 6


def test_enumerate_cap_exceeded(capsys, five_edge_feeder):
    code, _, err = run(
        capsys, ["enumerate", "--feeder", five_edge_feeder, "--cap", "3"]
    )
    assert code == 2
    assert "error" in err


def test_detect_reads_observation(capsys, five_edge_feeder, tmp_path):
    obs = tmp_path / "obs.json"
    obs.write_text(json.dumps({"flows": {"e1": 4.0}}))
    code, out, _ = run(
        capsys, ["detect", "--feeder", five_edge_feeder, "--obs", str(obs)]
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["global"] == ["e4"]
    assert doc["areas"][0]["root"] == "e1"


def test_detect_missing_obs_file(capsys, five_edge_feeder, tmp_path):
    code, _, err = run(
        capsys,
        ["detect", "--feeder", five_edge_feeder, "--obs", str(tmp_path / "no.json")],
    )
    assert code == 1
    assert "error" in err


def test_detect_inconsistent_observation(capsys, tmp_path):
    tree = tree_from(FIVE_EDGE_PARENTS, variances=1e-4)
    feeder = tmp_path / "f.json"
    feeder.write_text(json.dumps(dump_feeder(tree, ["e3"])))
    obs = tmp_path / "obs.json"
    obs.write_text(json.dumps({"flows": {"e1": 0.0, "e3": 1.0}}))
    code, _, err = run(capsys, ["detect", "--feeder", str(feeder), "--obs", str(obs)])
    assert code == 2
    assert "error" in err


def test_evaluate_with_placement_override(capsys, trap_feeder, tmp_path):
    placement = tmp_path / "pl.json"
    placement.write_text(json.dumps({"sensors": ["e1", "e2", "e5"]}))
    code, out, _ = run(
        capsys,
        ["evaluate", "--feeder", trap_feeder, "--placement", str(placement)],
    )
    assert code == 0
    doc = json.loads(out)
    errs = {row["root"]: row["error"] for row in doc["areas"]}
    assert errs["e1"] == 0.0
    assert errs["e2"] == pytest.approx(0.108334, abs=1e-5)
    assert errs["e5"] == pytest.approx(0.084915, abs=1e-5)
    assert doc["max_error"] == pytest.approx(0.108334, abs=1e-5)


def test_place_target_optimal(capsys, trap_feeder):
    code, out, _ = run(
        capsys,
        [
            "place",
            "--feeder",
            trap_feeder,
            "--target",
            str(TRAP_TARGET),
            "--mode",
            "optimal",
        ],
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["sensors"] == ["e1", "e5"]


def test_place_budget_default_greedy(capsys, trap_feeder):
    code, out, _ = run(
        capsys, ["place", "--feeder", trap_feeder, "--budget", "1"]
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["sensors"] == ["e1", "e3"]
    assert doc["target"] == pytest.approx(0.196106, abs=1e-3)


def test_place_round_trip_meets_target(capsys, trap_feeder, tmp_path):
    code, out, _ = run(
        capsys, ["place", "--feeder", trap_feeder, "--target", "0.15"]
    )
    assert code == 0
    sensors = json.loads(out)["sensors"]
    placement = tmp_path / "pl.json"
    placement.write_text(json.dumps({"sensors": sensors}))
    code, out, _ = run(
        capsys,
        ["evaluate", "--feeder", trap_feeder, "--placement", str(placement)],
    )
    assert code == 0
    assert json.loads(out)["max_error"] <= 0.15


def test_place_flag_validation(capsys, trap_feeder):
    code, _, err = run(
        capsys,
        ["place", "--feeder", trap_feeder, "--target", "0.2", "--budget", "1"],
    )
    assert code == 1
    code, _, _ = run(capsys, ["place", "--feeder", trap_feeder])
    assert code == 1
    code, _, _ = run(capsys, ["place", "--feeder", trap_feeder, "--target", "0"])
    assert code == 2


def test_simulate_reports_rate(capsys, trap_feeder):
    code, out, _ = run(
        capsys,
        [
            "simulate",
            "--feeder",
            trap_feeder,
            "--outage",
            "e3",
            "--trials",
            "200",
            "--seed",
            "4",
        ],
    )
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"error_rate", "stderr", "trials"}
    assert doc["trials"] == 200
    assert 0.0 <= doc["error_rate"] <= 1.0


def test_sweep_writes_files(capsys, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(
        json.dumps(
            {"kappas": [0.1], "targets": [0.25, 0.35], "n_vertices": 24, "seed": 9}
        )
    )
    out_dir = tmp_path / "out"
    code, out, _ = run(
        capsys, ["sweep", "--config", str(config), "--out", str(out_dir)]
    )
    assert code == 0
    paths = json.loads(out)
    assert (out_dir / "sweep.csv").exists()
    assert len(paths["histograms"]) == 2
    for p in paths["histograms"]:
        doc = json.loads(open(p).read())
        assert set(doc) == {"kappa", "target", "errors"}


def test_sweep_rejects_bad_config(capsys, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps([1, 2, 3]))
    code, _, err = run(capsys, ["sweep", "--config", str(config)])
    assert code == 1
    assert "error" in err


def test_output_file_flag(capsys, five_edge_feeder, tmp_path):
    out_file = tmp_path / "hyps.json"
    code, out, _ = run(
        capsys,
        ["enumerate", "--feeder", five_edge_feeder, "--out", str(out_file)],
    )
    assert code == 0
    assert out == ""
    assert len(json.loads(out_file.read_text())) == 8


def test_unknown_command(capsys):
    code, _, err = run(capsys, ["frobnicate"])
    assert code == 1
    assert "error" in err
