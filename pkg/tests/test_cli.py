import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from topomeasure.cli import main
from topomeasure.grid import GridSpace, PointRef
from topomeasure.integral import GridFunction
from topomeasure.measures import indicator_dtm, point_mass, uniform_radon


def call(argv):
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


@pytest.fixture
def files(tmp_path):
    sp = GridSpace(3)

    def put(name, obj):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        return str(p)

    return {
        "indicator": put("indicator.json", indicator_dtm(sp.region([0, 1])).to_json()),
        "delta": put("delta.json", point_mass(PointRef(3, 4)).to_json()),
        "delta0": put("delta0.json", point_mass(PointRef(3, 0)).to_json()),
        "radon": put("radon.json", uniform_radon(3).to_json()),
        "radon5": put("radon5.json", uniform_radon(5).to_json()),
        "cone": put("cone.json", GridFunction.cone(3, 0, 1.0).to_json()),
        "bad": put("bad.json", {"type": "point_mass"}),
        "alt": put("alt.json", {"type": "alternating", "n": 8, "a": 9, "b": 54, "horizon": 8}),
        "nope": put("nope.json", {"type": "spiral"}),
        "tmp": tmp_path,
    }


def test_axioms_indicator_exhaustive_csv(files):
    code, out = call(["axioms", "--input", files["indicator"], "--budget", "exhaustive", "--n", "3", "--format", "csv"])
    assert code == 0
    rows = {r["axiom"]: r["verdict"] for r in csv.DictReader(io.StringIO(out))}
    assert rows["DTM1"] == rows["DTM2"] == rows["DTM3"] == "pass"
    assert rows["TM"] == "fail"


def test_axioms_json_and_config_errors(files):
    code, out = call(["axioms", "--input", files["radon"], "--budget", "exhaustive"])
    assert code == 0 and json.loads(out)["measure"]["verdict"] == "pass"
    assert call(["axioms", "--input", files["radon"], "--n", "4"])[0] == 2
    assert call(["axioms", "--input", files["radon5"], "--budget", "exhaustive"])[0] == 2
    assert call(["axioms", "--input", files["bad"]])[0] == 2
    assert call(["axioms", "--input", str(files["tmp"] / "missing.json")])[0] == 2


def test_integrate_point_mass_gives_function_value(files):
    code, out = call(["integrate", "--measure", files["delta"], "--function", files["cone"]])
    doc = json.loads(out)
    want = GridFunction.cone(3, 0, 1.0).values.flat[4]
    assert code == 0 and doc["value"] == want and doc["r2_equal"] is True
    assert isinstance(doc["r1_breakpoints"], list)
    assert json.loads(call(["integrate", "--measure", files["delta"], "--function", files["cone"], "--brute"])[1])["value"] == want


def test_metrics_both_spellings(files):
    a = call(["metrics", "--pair", files["delta"], files["delta0"], "--metric", "prokhorov", "--family", "exhaustive", "--resolution", "0.01"])
    b = call(["metrics", "--mu", files["delta"], "--nu", files["delta0"], "--metric", "P", "--family", "exhaustive", "--resolution", "0.01"])
    assert a == b and a[0] == 0
    doc = json.loads(a[1])
    assert set(doc) >= {"value", "mode", "binding_witness"} and doc["mode"] == "exact"
    assert doc["value"] == pytest.approx(np.ceil(np.hypot(1, 1) / 3 / 0.01 + 1e-9) * 0.01)
    code, out = call(["metrics", "--pair", files["delta"], files["delta0"], "--metric", "kr"])
    assert code == 0 and json.loads(out)["value"] == pytest.approx(np.hypot(1, 1) / 3)
    assert call(["metrics", "--pair", files["delta"], files["radon5"]])[0] == 2
    assert call(["metrics", "--mu", files["delta"]])[0] == 2


def test_families_tightness(files):
    code, out = call(["families", files["delta"], files["delta0"], "--check", "tightness", "--epsilon", "0.1", "--mode", "classical"])
    doc = json.loads(out)
    assert code == 0 and doc["tight"] and doc["mode"] == "classical"
    code, _ = call(["families", files["delta"], files["delta0"], "--mode", "paper_literal", "--eps", "1.0"])
    assert code == 1
    code, out = call(["families", files["radon"], "--check", "variation"])
    assert code == 0 and json.loads(out)["variation_bound"] == pytest.approx(1.0)


def test_converge_reports_violation_and_expectation(files):
    code, out = call(["converge", "--sequence", files["alt"], "--random-functions", "0"])
    assert code == 0 and json.loads(out)["verdict"] == "violated"
    assert call(["converge", "--sequence", files["alt"], "--expect", "converged"])[0] == 1
    assert call(["converge", "--sequence", files["nope"]])[0] == 2


def test_scenario_list_and_run():
    code, out = call(["scenario", "list"])
    assert code == 0 and len(json.loads(out)) == 10
    code, out = call(["scenario", "run", "nvssf-n3-nonsubadditive"])
    assert code == 0 and json.loads(out)["passed"] is True
    assert call(["scenario", "run", "no-such-scenario"])[0] == 2


def test_failing_scenario_exits_one(tmp_path):
    from topomeasure.scenarios import load

    doc = load("indicator-not-tm")
    doc["expectations"][0]["value"] = False
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    assert call(["scenario", "run", str(p)])[0] == 1


def test_usage_errors_exit_two(capsys):
    assert call(["bogus"])[0] == 2
    assert call(["axioms"])[0] == 2
    assert call(["scenario", "run", "--frobnicate"])[0] == 2
    assert "usage" in capsys.readouterr().err


def test_seed_from_environment_and_flag(files, monkeypatch):
    args = ["axioms", "--input", files["radon"], "--samples", "40"]
    monkeypatch.setenv("QML_SEED", "3")
    env3 = call(args)
    assert env3 == call(args + ["--seed", "3"])
    assert json.loads(env3[1])["dtm"][0]["seed"] == 3
    monkeypatch.setenv("QML_SEED", "x")
    assert call(args)[0] == 2
    monkeypatch.delenv("QML_SEED")
    assert call(args) == call(args + ["--seed", "0"])


def test_console_entry_is_byte_identical_across_runs(files):
    cmd = [sys.executable, "-m", "topomeasure.cli", "scenario", "run", "indicator-not-tm", "tightness-modes"]
    a = subprocess.run(cmd, capture_output=True, env={"QML_SEED": "0", "PATH": ""}, check=False)
    b = subprocess.run(cmd, capture_output=True, env={"QML_SEED": "0", "PATH": ""}, check=False)
    assert a.returncode == 0 and a.stdout == b.stdout and a.stdout
