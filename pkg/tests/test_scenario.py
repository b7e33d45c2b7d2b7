"""Scenario schema: defaults, scale resolution, and loud rejection."""

import pytest

from fmesim.scenario import (SCHEMA, Scenario, ScenarioError, describe_schema,
                             load_scenario, parse_scenario)


def test_desk_defaults():
    scn = Scenario()
    assert scn.scale == "desk"
    assert scn.get("run.rounds") == 3
    assert scn.get("run.duration_s") == 60.0
    assert scn.get("apps.ues_per_cell") == 50
    assert scn.get("apps.voice_sessions_per_cell") == 4
    assert scn.get("apps.intercell_sessions_per_pair") == 2
    assert scn.get("backhaul.capacity_bps") == 20e6
    assert scn.seed is None


def test_paper_scale_defaults():
    scn = Scenario({"run.scale": "paper"})
    assert scn.get("run.rounds") == 10
    assert scn.get("run.duration_s") == 600.0
    assert scn.get("apps.ues_per_cell") == 250
    assert scn.get("apps.voice_sessions_per_cell") == 20
    assert scn.get("apps.video_ul_per_cell") == 5


def test_explicit_value_beats_scale_default():
    scn = Scenario({"run.scale": "paper", "run.rounds": 4})
    assert scn.get("run.rounds") == 4
    assert scn.get("run.duration_s") == 600.0


def test_unknown_key_reports_dotted_path():
    with pytest.raises(ScenarioError) as err:
        parse_scenario({"apps": {"ues_per_celll": 50}})
    assert "apps.ues_per_celll" in str(err.value)
    assert err.value.path == "apps.ues_per_celll"


def test_type_mismatch_reports_path_and_types():
    with pytest.raises(ScenarioError) as err:
        parse_scenario({"run": {"rounds": "three"}})
    assert "run.rounds" in str(err.value)
    assert "int" in str(err.value)


def test_int_accepted_where_float_expected():
    scn = parse_scenario({"run": {"warmup_s": 3}})
    assert scn.get("run.warmup_s") == 3.0
    assert isinstance(scn.get("run.warmup_s"), float)


def test_bool_rejected_where_int_expected():
    with pytest.raises(ScenarioError):
        parse_scenario({"apps": {"ues_per_cell": True}})


def test_bad_scale_rejected():
    with pytest.raises(ScenarioError) as err:
        Scenario({"run.scale": "galaxy"})
    assert "run.scale" in str(err.value)


def test_load_scenario_yaml_roundtrip(tmp_path):
    path = tmp_path / "scn.yaml"
    path.write_text(
        "run:\n  seed: 99\n  rounds: 2\napps:\n  ues_per_cell: 10\n",
        encoding="utf-8")
    scn = load_scenario(str(path))
    assert scn.seed == 99
    assert scn.get("run.rounds") == 2
    assert scn.get("apps.ues_per_cell") == 10


def test_load_scenario_rejects_non_mapping(tmp_path):
    path = tmp_path / "scn.yaml"
    path.write_text("- just\n- a\n- list\n", encoding="utf-8")
    with pytest.raises(ScenarioError):
        load_scenario(str(path))


def test_with_values_returns_new_validated_scenario():
    base = Scenario()
    paper = base.with_values(**{"run.scale": "paper"})
    assert base.scale == "desk"
    assert paper.get("apps.ues_per_cell") == 250
    with pytest.raises(ScenarioError):
        base.with_values(**{"run.bogus": 1})


def test_describe_schema_lists_every_key():
    text = describe_schema()
    for field in SCHEMA:
        assert field.key in text
