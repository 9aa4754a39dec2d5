import json

import numpy as np
import pytest

from netform.harness.scenario import Init, ScenarioError, SmoothField, load_scenario, scenario_from_dict
from netform.mesh import build_mesh_1d, build_mesh_2d

BASE = {"dimension": 2, "source": {"family": "dipole", "params": [0.25, 0.25, 0.75, 0.75, 0.1, 10]},
        "gamma": 1.5, "nu": 1.0, "r": 0.1, "d2": 0.01, "levels": [8, 16, 32]}


def _with(**kw):
    d = dict(BASE)
    d.update(kw)
    return d


def test_parse_roundtrip():
    sc = scenario_from_dict(_with(init={"kind": "random", "seed": 7, "low": 0, "high": 2}, field="quadratic"))
    assert sc.levels == (8, 16, 32) and sc.params.d2 == 0.01
    again = scenario_from_dict(sc.to_dict())
    assert again == sc


@pytest.mark.parametrize("patch", [
    {"levels": [16, 8]}, {"levels": [8, 8]}, {"levels": []}, {"levels": [0, 4]}, {"levels": [4, 1024]},
    {"levels": [4.5, 8]}, {"dimension": 3}, {"gamma": "x"}, {"r": 0}, {"nu": -1}, {"d2": -1},
    {"bogus": 1}, {"init": {"kind": "nope"}}, {"init": {"kind": "constant", "value": -1}},
    {"init": {"kind": "constant", "seed": 1}}, {"source": "sine1d"}, {"source": "dipole 0.2 0.8 0.1 1"},
    {"field": "wiggly"}, {"field": "constant"}, {"reference": "best"}, {"svg": 1}, {"tol": 0},
    {"epsilons": [-0.1]},
])
def test_rejects(patch):
    with pytest.raises(ScenarioError):
        scenario_from_dict(_with(**patch))


def test_missing_keys():
    for k in ("dimension", "source", "levels"):
        d = dict(BASE)
        del d[k]
        with pytest.raises(ScenarioError, match=k):
            scenario_from_dict(d)


def test_load_errors(tmp_path):
    with pytest.raises(ScenarioError, match="nope.json"):
        load_scenario(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError, match="invalid JSON"):
        load_scenario(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(BASE))
    assert load_scenario(good).dimension == 2


def test_init_kinds():
    m = build_mesh_2d(3)
    assert np.all(Init().conductivities(m) == 0)
    assert np.all(Init.parse({"kind": "constant", "value": 2.0}).conductivities(m) == 2.0)
    r = Init.parse({"kind": "random", "seed": 3, "low": 1, "high": 2})
    a, b = r.conductivities(m), r.conductivities(m)
    assert np.array_equal(a, b) and a.min() >= 1 and a.max() <= 2
    f = Init.parse({"kind": "field", "name": "linear"}).conductivities(build_mesh_1d(4))
    assert np.allclose(f, 1 + np.array([0.125, 0.375, 0.625, 0.875]))


def test_smooth_fields():
    assert str(SmoothField.parse("constant 2.5")) == "constant 2.5"
    f1, f2 = SmoothField.parse("quadratic").functions()
    assert f1(0.5, 0.0) == 1.25 and f2(0.0, 0.5) == 1.25
    assert SmoothField.parse("bilinear").functions_1d()(np.array([0.3]))[0] == 1.0
    with pytest.raises(ScenarioError):
        SmoothField.parse("linear 3")
