import numpy as np
import pytest

from crackenergy.geometry import Disc, WholeBody
from crackenergy.scenario import Scenario, ScenarioError, apply_override

BASE = """
name: t
domain:
  outer: [[0, 0], [1, 0], [1, 1], [0, 1]]
  crack: [[0, 0.5], [0.5, 0.5]]
mesh: {h: 0.0625}
"""


def test_defaults_and_derived_objects():
    sc = Scenario.from_text(BASE)
    assert sc.h == 0.0625 and sc.G == 0.0
    regions = sc.regions()
    assert isinstance(regions[0], Disc) and isinstance(regions[-1], WholeBody)
    (eta,) = sc.velocities()
    assert np.allclose(eta.center, (0.5, 0.5))
    assert sc.problem().mesh.n_nodes > 0


def test_overrides_parse_yaml_values():
    sc = Scenario.from_text(BASE, overrides=["mesh.h=0.125", "griffith.G=0.3", "probes=[[0.2, 0.2]]"])
    assert sc.h == 0.125 and sc.G == 0.3 and sc.data["probes"] == [[0.2, 0.2]]
    d = {"a": {"b": 1}}
    apply_override(d, "a.c=[1, 2]")
    assert d == {"a": {"b": 1, "c": [1, 2]}}


def test_digest_changes_with_content():
    a = Scenario.from_text(BASE).digest()
    assert a == Scenario.from_text(BASE).digest()
    assert a != Scenario.from_text(BASE, overrides=["mesh.h=0.125"]).digest()


@pytest.mark.parametrize("extra,match", [
    ("mesh: {h: -1}", "mesh.h"),
    ("bogus: 1", "bogus"),
    ("boundary: {type: spline}", "boundary.type"),
    ("griffith: {G: -2}", "griffith.G"),
    ("regions: [{type: blob}]", "regions"),
    ("velocity: [{type: plateau, center: [0.5, 0.5]}]", "velocity"),
])
def test_invalid_scenarios(extra, match):
    with pytest.raises(ScenarioError, match=match):
        Scenario.from_text(BASE + extra + "\n")


def test_yaml_syntax_error_reports_position():
    with pytest.raises(ScenarioError, match="line"):
        Scenario.from_text("name: [unclosed\n")


def test_crack_outside_body_is_scenario_error():
    with pytest.raises(ScenarioError, match="domain"):
        Scenario.from_text(BASE.replace("[0.5, 0.5]]", "[1.5, 0.5]]"))


def test_table_boundary_interpolates_by_arclength():
    text = BASE + "boundary:\n  type: table\n  points: [[0, 0, 0], [1, 0, 1], [1, 1, 2], [0, 1, 3]]\n"
    fn = Scenario.from_text(text).load_function()
    assert fn(np.array([[0.5, 0.0], [1.0, 0.5], [0.0, 0.5]])) == pytest.approx([0.5, 1.5, 1.5])


def test_mode3_boundary_matches_exact_field():
    from crackenergy.benchmarks import mode3_displacement

    sc = Scenario.from_text(BASE + "boundary: {type: mode3, K: 2.0}\n")
    p = np.array([[0.9, 0.1], [0.1, 0.9]])
    assert np.allclose(sc.load_function()(p), mode3_displacement(p, (0.5, 0.5), (1.0, 0.0), 2.0))
