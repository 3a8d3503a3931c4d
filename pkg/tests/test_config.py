import json

import pytest

from nrbundle.config import ScenarioConfig, grid_values, parse_config, parse_state_label
from nrbundle.errors import ConfigError

MODEL = {"delta_sigma_a": -3.1, "omega_m": 1.05, "fizeau_shift": 0.025, "lambda_ab": 0.022, "lambda_am": 0.022,
         "lambda_a_sigma": 0.3, "xi": 0.8, "gamma": 0.001, "kappa": 0.005}
LAB = {"omega_a": 10.0, "omega_sigma": 7.0, "omega_d": 9.0, "omega_b": 1.0, "omega_m": 1.05, "lambda_ab": 1e-3,
       "lambda_am": 1e-3, "lambda_a_sigma": 0.01, "xi_d": 5.0, "xi_p": 0.1, "kappa_a": 0.5, "kappa_b": 0.01,
       "kappa_m": 0.01, "gamma": 0.001}


def _text(**kw):
    doc = {"scenario": "spectrum", "model": MODEL, "grids": {"detuning": {"start": 1.2, "stop": 1.45, "num": 6}}}
    doc.update(kw)
    return json.dumps({k: v for k, v in doc.items() if v is not None})


def test_minimal_spectrum_config_gets_defaults():
    cfg = parse_config(_text())
    assert (cfg.cutoffs.photon, cfg.cutoffs.phonon, cfg.cutoffs.magnon) == (3, 2, 2)
    assert [s.value for s in cfg.drive_sides] == ["left", "right"]
    assert cfg.solver.tol == 1e-10 and cfg.seed == 0
    assert len(grid_values(cfg.grids.detuning)) == 6


def test_drive_side_sets_fizeau_sign():
    cfg = parse_config(_text())
    assert cfg.params("left").delta_f == 0.025
    assert cfg.params("right").delta_f == -0.025
    assert cfg.params("right").kappa_m == 0.005


def test_negative_kappa_names_the_key():
    bad = dict(MODEL, kappa=-0.1)
    with pytest.raises(ConfigError, match="kappa") as err:
        parse_config(_text(model=bad))
    assert err.value.path == "model.kappa"


def test_negative_kappa_grid_names_the_key():
    with pytest.raises(ConfigError) as err:
        parse_config(_text(scenario="correlation_sweep", grids={"kappa": [0.01, -0.01]}))
    assert "kappa" in err.value.path


def test_parameter_sources_are_exclusive():
    with pytest.raises(ConfigError, match="exactly one parameter source"):
        parse_config(_text(lab=LAB))
    with pytest.raises(ConfigError, match="exactly one parameter source"):
        parse_config(_text(model=None))


def test_lab_source_is_linearized():
    cfg = parse_config(_text(model=None, lab=dict(LAB, fizeau_shift=0.02)))
    left, right = cfg.params("left"), cfg.params("right")
    assert left.delta_f == 0.02 and right.delta_f == -0.02
    assert left.lambda_ab > 0


@pytest.mark.parametrize("doc, path", [
    ({"scenario": "spectrum", "model": MODEL, "grids": {"detuning": [1.0]}, "colour": "red"}, "colour"),
    ({"scenario": "spectrum", "model": dict(MODEL, xi="big"), "grids": {"detuning": [1.0]}}, "model.xi"),
    ({"scenario": "spectrum", "model": {k: v for k, v in MODEL.items() if k != "xi"},
      "grids": {"detuning": [1.0]}}, "model.xi"),
    ({"scenario": "plots", "model": MODEL}, "scenario"),
    ({"scenario": "spectrum", "model": MODEL, "grids": {"detuning": []}}, "grids.detuning"),
    ({"scenario": "trajectory", "model": MODEL, "grids": {"time": [0, 2, 1]}}, "grids.time"),
    ({"scenario": "spectrum", "model": MODEL, "grids": {"detuning": [1.0]}, "cutoffs": {"photon": 0}},
     "cutoffs.photon"),
])
def test_errors_name_the_path(doc, path):
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps(doc))
    assert err.value.path.startswith(path)


def test_scenario_requires_its_grid():
    with pytest.raises(ConfigError, match="grids.time"):
        parse_config(json.dumps({"scenario": "closed_dynamics", "model": MODEL}))
    parse_config(json.dumps({"scenario": "resonance_table", "model": MODEL}))


def test_malformed_documents():
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config("{not json")
    with pytest.raises(ConfigError, match="object"):
        parse_config("[1, 2]")


def test_state_labels():
    assert parse_state_label("101-") == ("-", 1, 0, 1)
    assert parse_state_label("e010") == ("e", 0, 1, 0)
    with pytest.raises(ValueError):
        parse_state_label("10+")
    with pytest.raises(ConfigError, match="initial_state"):
        parse_config(_text(initial_state="x000"))


def test_config_hash_is_canonical():
    a = parse_config(_text())
    b = ScenarioConfig.model_validate(json.loads(_text()))
    assert a.sha256() == b.sha256()
    assert a.sha256() != parse_config(_text(seed=1)).sha256()
