import copy
import json

import pytest

import topomeasure.scenarios as S
from topomeasure.scenarios import ScenarioError, list_builtin, load, run, validate

CORPUS = [
    "aleksandrov-crosscheck",
    "axioms-exhaustive-4x4",
    "indicator-not-tm",
    "kr-deltas",
    "mixing-to-radon",
    "nvssf-n3-nonsubadditive",
    "prokhorov-deltas",
    "shrinking-indicator-to-delta",
    "tightness-modes",
    "two-point-area",
]


def test_builtin_corpus_is_the_fixed_list():
    assert list_builtin() == CORPUS


@pytest.mark.parametrize("sid", CORPUS)
def test_each_builtin_round_trips_and_lints(sid):
    doc = load(sid)
    assert doc["id"] == sid
    assert json.loads(json.dumps(doc)) == doc
    assert validate(json.loads(json.dumps(doc))) == doc
    assert doc["recipe"]["runner"] in S.RUNNERS
    for e in doc["expectations"]:
        assert e["basis"] in S.BASES
        if e["basis"] == "reference":
            assert e["anchor"].strip()


def test_scenario_loads_from_path(tmp_path):
    doc = load("indicator-not-tm")
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    assert load(str(p)) == doc
    assert run(str(p)).passed


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda d: d.pop("recipe"), "recipe: missing"),
        (lambda d: d["recipe"].pop("runner"), "recipe.runner: missing"),
        (lambda d: d["recipe"].update(runner="nope"), "recipe.runner: unknown"),
        (lambda d: d["expectations"][1].update(op="approx"), "expectations[1].op"),
        (lambda d: d["expectations"][0].pop("anchor"), "expectations[0].anchor"),
        (lambda d: d["expectations"][2].update(basis="vibes"), "expectations[2].basis"),
    ],
)
def test_malformed_documents_name_the_path(mutate, path):
    doc = copy.deepcopy(load("indicator-not-tm"))
    mutate(doc)
    with pytest.raises(ScenarioError, match=path.replace("[", r"\[").replace("]", r"\]")):
        load(doc)


def test_missing_recipe_field_is_reported_at_run_time():
    doc = copy.deepcopy(load("indicator-not-tm"))
    doc["recipe"].pop("grid")
    with pytest.raises(ScenarioError, match=r"recipe\.grid: missing"):
        run(doc)


def test_unknown_observation_and_bad_file():
    doc = copy.deepcopy(load("indicator-not-tm"))
    doc["expectations"][0]["name"] = "no.such.thing"
    with pytest.raises(ScenarioError, match="no.such.thing"):
        run(doc)
    with pytest.raises(ScenarioError, match="not a built-in id"):
        load("/nonexistent/scenario.json")


def test_compare_operators():
    c = S._compare
    assert c("eq", 1.0, 1.05, 0.1) and not c("eq", 1.0, 1.2, 0.1)
    assert c("le", 1.0, 0.95, 0.1) and not c("le", 1.2, 1.0, 0.1)
    assert c("ge", 0.95, 1.0, 0.1) and not c("ge", 0.8, 1.0, 0.1)
    assert c("within_rel", 1.04, 1.0, 0.05) and not c("within_rel", 1.06, 1.0, 0.05)
    assert c("in_range", -1.0, [-1.3, -0.7], 0.0) and not c("in_range", -0.5, [-1.3, -0.7], 0.0)
    assert c("is", ["a"], ["a"], 0.0) and not c("is", "a", "b", 0.0)
    assert not c("eq", None, 1.0, 1.0)


@pytest.mark.parametrize("sid", ["nvssf-n3-nonsubadditive", "indicator-not-tm", "tightness-modes", "two-point-area"])
def test_fast_builtins_pass_and_are_deterministic(sid):
    a, b = run(sid), run(sid)
    assert a.passed, [e.to_json() for e in a.expectations if not e.passed]
    assert a.dumps() == b.dumps()


def test_zero_tolerance_on_a_discretized_area_fails():
    # regression demonstration: lattice areas are never exactly the disk area
    doc = copy.deepcopy(load("two-point-area"))
    doc["recipe"]["grid"] = 64
    for e in doc["expectations"]:
        if e["name"] == "K1_over_disk":
            e["tol"] = 0.0
    rep = run(doc)
    bad = [e for e in rep.expectations if not e.passed]
    assert [e.name for e in bad] == ["K1_over_disk"]
    assert bad[0].observed != 1.0


def test_seed_override_is_recorded():
    rep = run("indicator-not-tm", seed=7)
    assert rep.seed == 7 and rep.to_json()["seed"] == 7
