import csv
import json
from pathlib import Path

import pytest

from nrbundle.cli import main

GOLDEN = json.loads((Path(__file__).parent / "golden" / "headers.json").read_text())
MODEL = {"delta_sigma_a": -3.1, "omega_m": 1.05, "fizeau_shift": 0.025, "lambda_ab": 0.022, "lambda_am": 0.022,
         "lambda_a_sigma": 0.3, "xi": 0.8, "gamma": 0.001, "kappa": 0.005}
RESONANT = {"resonance": "photon_magnon", "drive_side": "left"}


def _run(tmp_path, command, doc, name="run", extra=()):
    cfg = tmp_path / f"{name}.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / name
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _check_outputs(out):
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    for name in manifest["outputs"]:
        if name.endswith(".csv"):
            header = (out / name).read_text().splitlines()[0]
            assert header == GOLDEN[name], name
    return manifest


def test_resonance_table(tmp_path):
    code, out = _run(tmp_path, "resonances", {"scenario": "resonance_table", "model": MODEL})
    assert code == 0
    rows = _rows(out / "resonances.csv")
    assert len(rows) == 4
    values = sorted(round(float(r["delta_ad"]), 4) for r in rows)
    assert values == [1.3191, 1.3478, 1.3478, 1.3766]
    assert all(abs(float(r["residual"])) < 1e-9 for r in rows)
    manifest = _check_outputs(out)
    assert manifest["status"] == "ok" and manifest["failed_points"] == 0


def test_csv_number_format(tmp_path):
    _, out = _run(tmp_path, "resonances", {"scenario": "resonance_table", "model": MODEL})
    text = (out / "resonances.csv").read_text()
    assert "\r" not in text and text.endswith("\n")
    assert "1.3190868263473057" in text


def test_reruns_reproduce_checksums(tmp_path):
    doc = {"scenario": "trajectory", "model": MODEL, "operating_point": RESONANT, "drive_sides": ["left"],
           "grids": {"time": {"start": 0, "stop": 2000, "num": 5}}, "trajectories": 3, "seed": 9}
    _, a = _run(tmp_path, "trajectory", doc, "a")
    _, b = _run(tmp_path, "trajectory", doc, "b")
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert {k: v["sha256"] for k, v in ma["outputs"].items()} == {k: v["sha256"] for k, v in mb["outputs"].items()}
    assert ma["config_sha256"] == mb["config_sha256"]
    _check_outputs(a)
    # a different seed changes the record, and the config hash records the override
    _, c = _run(tmp_path, "trajectory", doc, "c", extra=["--seed", "10"])
    mc = json.loads((c / "manifest.json").read_text())
    assert mc["config_sha256"] != ma["config_sha256"]


def test_dynamics_scenarios(tmp_path):
    closed = {"scenario": "closed_dynamics", "model": MODEL, "operating_point": RESONANT,
              "grids": {"time": [0, 1000, 2660]}}
    code, out = _run(tmp_path, "dynamics", closed, "closed")
    assert code == 0
    rows = _rows(out / "closed_dynamics.csv")
    left = [r for r in rows if r["drive_side"] == "left"]
    assert float(left[0]["P_000+"]) == pytest.approx(1.0)
    assert float(left[-1]["P_101-"]) > 0.9
    _check_outputs(out)
    opened = dict(closed, scenario="open_dynamics", drive_sides=["left"], grids={"time": [0, 50]})
    code, out = _run(tmp_path, "dynamics", opened, "open")
    assert code == 0 and len(_rows(out / "open_dynamics.csv")) == 2
    _check_outputs(out)


def test_sweeps_write_expected_tables(tmp_path):
    doc = {"scenario": "correlation_sweep", "model": MODEL,
           "operating_point": {"resonance": "photon_phonon", "drive_side": "left"},
           "grids": {"kappa": [0.008], "tau": [0, 100]}}
    code, out = _run(tmp_path, "correlations", doc, "corr")
    assert code == 0
    rows = _rows(out / "correlations.csv")
    flags = {r["drive_side"]: r["flags"] for r in rows}
    assert flags == {"left": "ab_pair_window", "right": "am_pair_window"}
    assert len(_rows(out / "g2_delayed.csv")) == 2 * 2 * 2
    _check_outputs(out)

    doc = dict(doc, scenario="witness_sweep", grids={"kappa": [0.008]})
    code, out = _run(tmp_path, "witness", doc, "wit")
    assert code == 0
    rows = _rows(out / "witness.csv")
    assert all(float(r["D1_ab"]) > 0 for r in rows)
    reports = json.loads((out / "witness_matrices.json").read_text())
    assert len(reports) == 2 and set(reports[0]["reports"]) == {"ab", "abs", "am", "ams"}
    _check_outputs(out)


def test_spectrum_and_partial_failure(tmp_path):
    doc = {"scenario": "spectrum", "model": MODEL, "drive_sides": ["left"], "grids": {"detuning": [1.33, 1.34]}}
    code, out = _run(tmp_path, "spectrum", doc, "ok")
    assert code == 0
    _check_outputs(out)
    closed = dict(MODEL, kappa=0.0, gamma=0.0)
    code, out = _run(tmp_path, "spectrum", dict(doc, model=closed), "bad")
    assert code == 1
    rows = _rows(out / "spectrum.csv")
    assert len(rows) == 2 and all(r["error"] for r in rows)
    assert json.loads((out / "manifest.json").read_text())["status"] == "partial"


def test_fatal_errors_exit_two(tmp_path, capsys):
    code, _ = _run(tmp_path, "spectrum", {"scenario": "spectrum", "model": dict(MODEL, kappa=-1.0),
                                          "grids": {"detuning": [1.0]}})
    assert code == 2
    assert "model.kappa" in capsys.readouterr().err
    code, _ = _run(tmp_path, "witness", {"scenario": "resonance_table", "model": MODEL}, "wrong")
    assert code == 2
    assert main(["resonances", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["resonances"])
