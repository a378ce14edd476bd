import json

import numpy as np
import pytest

from cxlegendre.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, main
from cxlegendre.errors import ConfigError
from cxlegendre.harness import (
    DEFAULT_TOLERANCES,
    SCENARIOS,
    ScenarioConfig,
    fit_order,
    make_perturbation,
    refinement_study,
    run_scenario,
)


def test_every_scenario_has_defaults():
    for name in SCENARIOS:
        cfg = ScenarioConfig.named(name)
        assert cfg.scenario == name
        assert ScenarioConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


@pytest.mark.parametrize("bad", [
    {"scenario": "nope"},
    {"scenario": "flat-involution", "resolutions": [64, 32]},
    {"scenario": "flat-involution", "resolutions": [2]},
    {"scenario": "flat-involution", "tolerances": {"involution": -1}},
    {"scenario": "flat-involution", "tolerances": {"made-up": 1}},
    {"scenario": "flat-involution", "colour": "blue"},
    {"scenario": "flat-involution", "perturbation": {"family": "gaussian-bump", "amplitude": 0}},
    {"resolutions": [32]},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(bad)


def test_perturbation_recipes():
    assert make_perturbation({"family": "zero"}, 1).value(np.array([0.3j])) == 0
    lin = make_perturbation({"family": "linear", "amplitude": 2.0, "direction": [[0.0, 1.0]]}, 1)
    assert lin.value(np.array([0.5j])) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        make_perturbation({"family": "spline", "amplitude": 1.0}, 1)
    with pytest.raises(ConfigError):
        make_perturbation({"family": "gaussian-bump", "amplitude": 1.0, "center": [[0, 0], [0, 0]]}, 1)


def test_h2_tolerances_scale_with_step():
    cfg = ScenarioConfig.named("flat-involution")
    assert cfg.tolerance("gradient-identity", step=0.1) == pytest.approx(DEFAULT_TOLERANCES["gradient-identity@h2"] * 0.01)
    assert cfg.tolerance("involution", scale=2.0) == pytest.approx(2e-6)


def test_fit_order():
    h = np.array([0.1, 0.05, 0.025])
    assert fit_order(h, 3 * h**2) == pytest.approx(2.0)
    assert fit_order(h, [1e-3, 2e-3, 1e-4]) is None
    assert fit_order(h, [1e-3, 0.0, 0.0]) is None


def test_inadmissible_perturbation_fails_only_downstream():
    cfg = ScenarioConfig.named("flat-involution", perturbation={
        "family": "gaussian-bump", "amplitude": 3.0, "center": [[0.0, 0.0]], "width": 0.2})
    rep = run_scenario(cfg)
    assert not rep.passed
    assert rep.check("strong-psh").passed and rep.check("neighborhood").passed
    assert not rep.check("admissibility").passed


def test_report_json_is_deterministic_and_complete(tmp_path):
    cfg = ScenarioConfig.named("equivalence", output=str(tmp_path))
    a = run_scenario(cfg)
    b = run_scenario(cfg)
    assert a.to_json(runtime=False) == b.to_json(runtime=False)
    saved = json.loads((tmp_path / "equivalence-report.json").read_text())
    keys = {"check", "anchor", "max_defect", "mean_defect", "tolerance", "pass", "runtime"}
    assert all(keys <= set(c) for c in saved["checks"])
    assert {"python", "numpy", "scipy"} <= set(saved["environment"])


def test_refinement_study_writes_table(tmp_path):
    cfg = ScenarioConfig.named("flat-pullback", output=str(tmp_path))
    table = refinement_study(cfg)
    assert table.rows["pullback"]["order"] >= 1.8
    # exact-zero checks have no order to fit
    assert table.rows["form-consistency"]["order"] == "indeterminate"
    assert (tmp_path / "flat-pullback-refinement.csv").exists()
    with pytest.raises(ConfigError):
        refinement_study(ScenarioConfig.named("equivalence"))


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["list-scenarios"]) == EXIT_PASS
    assert "flat-pullback" in capsys.readouterr().out
    assert main(["verify", "equivalence", "--out", str(tmp_path)]) == EXIT_PASS
    assert (tmp_path / "equivalence-report.json").exists()
    assert main(["verify", "equivalence", "--tolerance-scale", "1e-8"]) == EXIT_FAIL
    assert main(["verify", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenario": "flat-involution", "resolutions": [3, 3]}))
    assert main(["verify", str(bad)]) == EXIT_CONFIG
    assert main(["verify", "equivalence", "--jobs", "0"]) == EXIT_CONFIG


def test_cli_config_file_and_transform(tmp_path, capsys):
    pot = tmp_path / "pot.json"
    pot.write_text(json.dumps({"variant": "fubini-study", "dimension": 1}))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "flat-involution", "potential": "pot.json", "resolutions": [16]}))
    assert main(["verify", str(cfg), "--seed", "3"]) == EXIT_PASS
    out = tmp_path / "tx"
    assert main(["transform", str(cfg), "--out", str(out)]) == EXIT_PASS
    assert (out / "transform.csv").exists() and (out / "gradient-map.json").exists()


def test_involution_refinement_is_solver_limited():
    cfg = ScenarioConfig.named("flat-involution", resolutions=[16, 24, 32])
    table = refinement_study(cfg)
    row = table.rows["involution"]
    assert max(abs(d) for d in row["defects"]) < 1e-12
    assert row["order"] == "indeterminate" or row["order"] < 1.0
