"""Scenarios: structure shapes, environments, schema files, dimension pins."""

import json

import numpy as np
import pytest

from kaczplan.collision import aabb_overlap
from kaczplan.scenarios import (COMPLEXITY_BANDS, PROJECTION_SETS,
                                REFERENCE_NAMES, Environment, Scenario,
                                ScenarioError, _reference,
                                generate_environment, load_scenario,
                                make_structure, projection_benchmark_scenario,
                                reference_scenario, save_scenario)

REFERENCE_DIMS = {"T_3": 12, "S_3": 14, "S_4": 30, "I_5": 37,
                  "S_5": 52, "S_6": 80}


def test_make_structure_shapes():
    assert len(make_structure("straight", length=1.0)) == 3
    assert len(make_structure("straight", length=2.5)) == 6
    assert len(make_structure("t")) == 3
    assert len(make_structure("i")) == 5
    with pytest.raises(ScenarioError):
        make_structure("hexagon")


def test_reference_dimension_pins():
    for name, l in REFERENCE_DIMS.items():
        assert reference_scenario(name).assemble().l == l


def test_projection_set_row_counts():
    expect = {"m1_m3": 6, "m3_m4": 8, "m1_m2_m3": 12, "m1_m2_m3_m4": 14}
    for name, l in expect.items():
        assert PROJECTION_SETS[name][1] == l
        assert projection_benchmark_scenario(name).assemble().l == l


def test_bundled_files_match_builders():
    # the shipped JSON must stay in sync with the programmatic definitions
    for name in REFERENCE_NAMES:
        assert reference_scenario(name).to_dict() == _reference(name).to_dict()


def test_start_goal_configurations_satisfy_constraints():
    for name in REFERENCE_NAMES:
        scenario = reference_scenario(name)
        cs = scenario.assemble()
        assert cs.is_satisfied(scenario.start_configuration().q)
        assert cs.is_satisfied(scenario.goal_configuration().q)


def test_scenario_file_roundtrip(tmp_path):
    scenario = reference_scenario("S_4")
    path = tmp_path / "s4.json"
    save_scenario(scenario, path)
    again = load_scenario(path)
    assert again.to_dict() == scenario.to_dict()
    assert again.assemble().l == 30


def test_schema_rejects_malformed(tmp_path):
    doc = reference_scenario("S_3").to_dict()
    del doc["team_size"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(ScenarioError):
        load_scenario(bad)
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_scenario_contact_count_mismatch():
    s = reference_scenario("S_3")
    with pytest.raises(ScenarioError):
        Scenario(name="x", team_size=4, structure=s.structure,
                 manifolds=s.manifolds)


def test_complexity_bands_disjoint_and_ordered():
    spans = [COMPLEXITY_BANDS[c] for c in ("low", "medium", "hard")]
    for (a_lo, a_hi), (b_lo, b_hi) in zip(spans, spans[1:]):
        assert a_hi < b_lo
        assert a_lo < a_hi


@pytest.mark.parametrize("complexity", ["low", "medium", "hard"])
def test_environment_in_band_and_deterministic(complexity):
    lo = np.array([-10.0, -10.0, 0.0])
    hi = np.array([10.0, 10.0, 20.0])
    e1 = generate_environment(complexity, lo, hi, seed=9)
    e2 = generate_environment(complexity, lo, hi, seed=9)
    band = COMPLEXITY_BANDS[complexity]
    assert band[0] <= e1.clutter_ratio <= band[1]
    assert np.array_equal(e1.obstacles_lo, e2.obstacles_lo)
    assert np.array_equal(e1.obstacles_hi, e2.obstacles_hi)
    e3 = generate_environment(complexity, lo, hi, seed=10)
    assert not np.array_equal(e1.obstacles_lo, e3.obstacles_lo)


def test_environment_respects_clear_regions():
    scenario = reference_scenario("S_3")
    clear = scenario.clear_regions()
    env = generate_environment("hard", scenario.workspace_lo,
                               scenario.workspace_hi, seed=4,
                               clear_regions=clear)
    for blo, bhi in zip(env.obstacles_lo, env.obstacles_hi):
        for clo, chi in clear:
            assert not aabb_overlap(blo, bhi, clo, chi)


def test_environment_roundtrip():
    env = generate_environment("low", [-10, -10, 0], [10, 10, 20], seed=2)
    again = Environment.from_dict(env.to_dict())
    assert np.array_equal(env.obstacles_lo, again.obstacles_lo)
    assert again.complexity_class == "low"
    assert again.seed == 2


def test_unknown_names_raise():
    with pytest.raises(ScenarioError):
        reference_scenario("S_99")
    with pytest.raises(ScenarioError):
        projection_benchmark_scenario("m9")
    with pytest.raises(ScenarioError):
        generate_environment("extreme", [-1, -1, 0], [1, 1, 1], 0)
