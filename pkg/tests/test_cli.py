from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from artifact.cli import EXIT_DATAERR, EXIT_NOINPUT, EXIT_OK, EXIT_USAGE, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def read_json(path: Path) -> dict:
    return json.loads(path.read_text())


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == EXIT_USAGE
    assert main(["grating", "--workers", "0"]) == EXIT_USAGE
    assert main(["grating", "--set", "no_equals_sign"]) == EXIT_USAGE


def test_missing_and_malformed_input(tmp_path):
    assert main(["grating", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_NOINPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["grating", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_DATAERR
    assert main(["grating", "--set", "unknown_key=1", "--out", str(tmp_path)]) == EXIT_DATAERR
    assert main(["grating", "--set", "theta=2.0", "--out", str(tmp_path)]) == EXIT_DATAERR


def test_bad_obstacle_file(tmp_path):
    ob = tmp_path / "ob.json"
    ob.write_text(json.dumps({"components": [{"vertices": [[0, 0], [1, 1], [1, 0], [0, 1]], "edges": [{"kind": "dirichlet"}]}]}))
    assert main(["scatter", "--obstacle", str(ob), "--out", str(tmp_path)]) == EXIT_DATAERR
    assert main(["scatter", "--obstacle", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_NOINPUT


def test_grating_run(tmp_path):
    assert main(["grating", "--out", str(tmp_path), "--set", "seed=3"]) == EXIT_OK
    rep = read_json(tmp_path / "grating_report.json")
    assert rep["schema_version"] and rep["passed"]
    assert len(rep["distinctness"]) == 50
    with open(tmp_path / "rayleigh_modes.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 17 and rows[0].keys() == {"n", "alpha_n", "beta_re", "beta_im", "propagating"}


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({"k": 2.5, "n_max": 4}))
    assert main(["grating", "--config", str(cfg), "--set", "draws=5", "--out", str(tmp_path)]) == EXIT_OK
    rep = read_json(tmp_path / "grating_report.json")
    assert rep["config"]["k"] == 2.5 and rep["config"]["draws"] == 5


def test_scatter_disk_run(tmp_path):
    code = main(["scatter", "--obstacle", str(CONFIGS / "disk_soft.json"), "--k", "2", "--out", str(tmp_path)])
    assert code == EXIT_OK
    rep = read_json(tmp_path / "scatter_report.json")
    assert rep["schema_version"] and rep["formulation"] == "cfie"
    assert rep["mie_relative_l2"] <= 1e-4
    lines = (tmp_path / "far_field.csv").read_text().splitlines()
    assert lines[0] == "angle_rad,re,im" and len(lines) == 257


def test_vanishing_run(tmp_path):
    assert main(["vanishing", "--out", str(tmp_path), "--set", "q_max=4"]) == EXIT_OK
    rep = read_json(tmp_path / "vanishing_report.json")
    assert rep["disagreements"] == [] and rep["cases"] > 0
    header = (tmp_path / "vanishing_matrix.csv").read_text().splitlines()[0].split(",")
    assert {"predicted", "recursed", "estimated", "agree"} <= set(header)


def test_cgo_run(tmp_path):
    assert main(["cgo", "--out", str(tmp_path)]) == EXIT_OK
    rep = next(tmp_path.glob("*.json"))
    assert read_json(rep)["schema_version"]


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["grating", "--out", str(blocker / "sub")]) == 73
