import pytest

from nvmem.scenario import (ScenarioError, default_scenario, default_scenario_text, parse_scenario,
                            scenario_from_text, scenario_hash)

BAD = """\
name: bad
system:
  subsystems:
    - {label: sensor, dim: 3}
    - {label: sensor, dim: 2}
dissipation:
  illumination:
    p_branching: 1.3
sequence:
  taau: 1.0e-4
"""


def test_default_scenario_parses():
    sc = default_scenario()
    assert sc.name == "default"
    assert tuple(sc.physics.A_par_targets) == (2800.0,)
    assert sc.sweep.grid().size == 81
    assert sc.params().A_par_targets[0] == 2800.0


def test_minimal_scenario_uses_defaults():
    sc = scenario_from_text("name: tiny\n")
    assert sc.name == "tiny"
    assert sc.dissipation.model == "dark_nvm"


def test_empty_text_is_default():
    assert scenario_from_text("").name == "scenario"


def test_out_of_range_value_names_the_field():
    text = "dissipation:\n  illumination:\n    p_branching: 1.3\n"
    with pytest.raises(ScenarioError) as exc:
        scenario_from_text(text)
    msg = str(exc.value)
    assert "dissipation.illumination.p_branching" in msg
    assert "line 3" in msg


def test_all_problems_collected_with_lines():
    with pytest.raises(ScenarioError) as exc:
        scenario_from_text(BAD, "bad.yaml")
    probs = exc.value.problems
    assert len(probs) == 3
    text = "\n".join(probs)
    assert "duplicate" in text
    assert "p_branching (line 8)" in text
    assert "sequence.taau (line 10)" in text
    assert "bad.yaml" in str(exc.value)


def test_unknown_top_level_section():
    with pytest.raises(ScenarioError, match="bogus"):
        scenario_from_text("bogus: 1\n")


def test_syntax_and_shape_errors():
    with pytest.raises(ScenarioError, match="YAML"):
        scenario_from_text("a: [1, 2\n")
    with pytest.raises(ScenarioError, match="mapping"):
        scenario_from_text("- 1\n- 2\n")


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError, match="not found"):
        parse_scenario(tmp_path / "nope.yaml")


def test_consistency_errors():
    text = default_scenario_text().replace("A_par_targets: [2800.0]", "A_par_targets: [2800.0, -1200.0]")
    with pytest.raises(ScenarioError, match="targets"):
        scenario_from_text(text)
    text = default_scenario_text().replace("model: dark_nvm ", "model: dark_nv0 ")
    with pytest.raises(ScenarioError, match="sensor dimension"):
        scenario_from_text(text)
    text = default_scenario_text().replace("tc_mode: dark", "tc_mode: nv0")
    with pytest.raises(ScenarioError, match="classical_storage"):
        scenario_from_text(text)


def test_file_round_trip_and_hash(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(default_scenario_text())
    assert parse_scenario(p) == default_scenario()
    assert scenario_hash("a") == scenario_hash("a") != scenario_hash("b")
    assert len(scenario_hash("a")) == 64


def test_scenario_builds_sequence_spec():
    sc = default_scenario()
    spec = sc.correlation_spec(rf_center=1.6e7)
    assert spec.tau == pytest.approx(200e-6) and spec.rf_center == 1.6e7
    assert sc.dissipation.sequence_dissipation() is not None
