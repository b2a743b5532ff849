"""Named end-to-end experiments with recorded expectations.

A scenario is a JSON document::

    {"id": ..., "description": ..., "seed": 0,
     "recipe": {"runner": <name>, ...parameters},
     "expectations": [{"name", "op", "value", "tol", "basis", "anchor"}, ...]}

The runner computes a flat dict of observations; each expectation compares
one observation against its recorded value. ``basis`` says where the expected
value comes from: ``reference`` (a published value, which must carry a
descriptive ``anchor``), ``derived`` (an independent computation) or
``immediate`` (true by construction).
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from ..grid import COMPACT, OPEN, ContractError, GridSpace, PointRef, Region, ball
from ..measures import (
    Budget,
    classify,
    indicator_dtm,
    point_mass,
    uniform_radon,
    verify_dtm_axioms,
    verify_measure,
    verify_tm,
)

BASES = ("reference", "derived", "immediate")
OPS = ("eq", "le", "ge", "is", "within_rel", "in_range")


class ScenarioError(ContractError):
    """Malformed scenario; the message names the offending path."""


@dataclass
class ExpectationResult:
    name: str
    op: str
    expected: object
    tol: float
    observed: object
    passed: bool
    basis: str
    anchor: str

    def to_json(self):
        return {
            "name": self.name,
            "op": self.op,
            "expected": self.expected,
            "tol": self.tol,
            "observed": self.observed,
            "passed": self.passed,
            "basis": self.basis,
            "anchor": self.anchor,
        }


@dataclass
class ScenarioReport:
    id: str
    seed: int
    observations: dict
    expectations: list[ExpectationResult]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.expectations)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "passed": self.passed,
            "observations": self.observations,
            "expectations": [e.to_json() for e in self.expectations],
        }

    def dumps(self) -> str:
        return json.dumps(_plain(self.to_json()), sort_keys=True, indent=2)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# --- runners ---------------------------------------------------------------------------

RUNNERS: dict[str, Callable[[dict, int], dict]] = {}


def runner(name: str):
    def deco(fn):
        RUNNERS[name] = fn
        return fn

    return deco


def _req(recipe: dict, key: str, path: str = "recipe"):
    if key not in recipe:
        raise ScenarioError(f"{path}.{key}: missing")
    return recipe[key]


def diagonal_points(n: int, count: int, row0: int = 4, col0: int = 2, drow: int = 3, dcol: int = 4) -> list[PointRef]:
    """Points on a slanted line, distinct rows and columns, away from the bottom row."""
    space = GridSpace(n)
    pts = [PointRef(n, space.cell(row0 + drow * i, col0 + dcol * i)) for i in range(count)]
    if any(p.cell // n >= n - 1 or p.cell % n >= n for p in pts):
        raise ScenarioError("recipe: point layout does not fit the grid")
    return pts


@runner("nvssf_cover")
def _nvssf_cover(recipe, seed):
    from ..solid import cumulative_unions, extend, nvssf, strip_cover

    grid = int(_req(recipe, "grid"))
    k = int(_req(recipe, "k"))
    space = GridSpace(grid)
    pts = diagonal_points(grid, 2 * k + 1)
    m = extend(nvssf(pts, k))
    three = strip_cover(pts, 3)
    single = strip_cover(pts, len(pts))
    rep = verify_measure(m, Budget.panel(single + cumulative_unions(single)))
    small_pts = diagonal_points(grid, 3)
    small = extend(nvssf(small_pts, 1))
    small_cover = strip_cover(small_pts, 3)
    return {
        "total": m(space.full(COMPACT)),
        "three_piece_values": [m(r) for r in three],
        "three_piece_points": [sum(1 for p in pts if r.bits >> p.cell & 1) for r in three],
        "three_piece_max": max(m(r) for r in three),
        "one_point_pieces": len(single),
        "one_point_cover_max": max(m(r) for r in single),
        "measure_verdict": rep.verdict,
        "measure_witness": rep.to_json()["witness"],
        "three_point_total": small(space.full(COMPACT)),
        "three_point_cover_max": max(small(r) for r in small_cover),
    }


@runner("two_point_area")
def _two_point_area(recipe, seed):
    from ..solid import extend, two_point_area

    n = int(_req(recipe, "grid"))
    r = float(_req(recipe, "radius"))
    space = GridSpace(n)
    p1 = PointRef(n, space.cell(n // 2, int((0.5 - r) * n)))
    p2 = PointRef(n, space.cell(n // 2, int((0.5 + r) * n)))
    mu = extend(two_point_area([p1, p2]))
    K1, K2 = ball(space, p1.cell, r, COMPACT), ball(space, p2.cell, r, COMPACT)
    C = Region(n, K1.bits | K2.bits, COMPACT)
    v1, v2, vc = mu(K1), mu(K2), mu(C)
    disk = math.pi * r * r
    return {
        "point_distance": space.distance(p1.cell, p2.cell),
        "K1_over_disk": v1 / disk,
        "K2_over_disk": v2 / disk,
        "C_over_four_disks": vc / (4 * disk),
        "C_over_twice_area": vc / (2 * mu.ssf.area(C.bits)),
        "gain_over_K1": (vc - v1 - v2) / v1,
        "discretization_bound": 2 * math.pi * r * space.cell_width / disk,
    }


@runner("indicator_axioms")
def _indicator_axioms(recipe, seed):
    n = int(_req(recipe, "grid"))
    cells = _req(recipe, "cells")
    m = indicator_dtm(Region.from_cells(n, cells, COMPACT))
    c = classify(m, Budget.exhaustive())
    return {
        "dtm_all_pass": c.is_dtm,
        "dtm_verdicts": {r.axiom: r.verdict for r in c.dtm},
        "tm_verdict": c.tm.verdict,
        "tm_witness": c.tm.to_json()["witness"],
        "tm_margin": c.tm.margin,
        "measure_verdict": c.measure.verdict,
    }


def _mixing(recipe):
    from ..convergence import default_config, mixing_sequence

    n = int(_req(recipe, "grid"))
    space = GridSpace(n)
    D = Region.from_cells(n, _req(recipe, "cells"), COMPACT)
    horizon = int(recipe.get("horizon", 256))
    s = mixing_sequence(indicator_dtm(D), uniform_radon(n), horizon)
    anchors = [D.cells[0], space.cell(n - 3, n - 4)]
    cfg = default_config(n, anchors, epsilon=float(recipe.get("epsilon", 0.01)))
    return s, cfg


@runner("mixing")
def _mixing_runner(recipe, seed):
    from ..convergence import crosscheck
    from ..integral import integrate

    s, cfg = _mixing(recipe)
    rep = crosscheck(s, cfg)
    nu, m = s[0], s.limit
    ident = 0.0
    for k in range(s.horizon):
        mu = s[k]
        for f in cfg.functions:
            expect = abs(integrate(nu, f) - integrate(m, f)) / (k + 1)
            ident = max(ident, abs(abs(integrate(mu, f) - integrate(m, f)) - expect))
    slopes = {k: c.decay_slope() for k, c in rep.conditions.items()}
    return {
        "verdicts": {k: c.verdict for k, c in rep.conditions.items()},
        "all_converged": all(c.verdict == "converged" for c in rep.conditions.values()),
        "anomalies": len(rep.anomalies),
        "identity_error": ident,
        "integral_slope": slopes["integrals"],
        "slopes": slopes,
        "variant": rep.variant.verdict,
    }


def _shrinking(recipe):
    from ..convergence import default_config, shrinking_indicator_sequence

    n = int(_req(recipe, "grid"))
    space = GridSpace(n)
    a = space.cell(n // 2, n // 2)
    s = shrinking_indicator_sequence(n, a, float(recipe.get("r0", 0.25)), int(recipe.get("horizon", 64)))
    cfg = default_config(n, [a, space.cell(n // 4, 3 * n // 4)], epsilon=float(recipe.get("epsilon", 0.05)), random_functions=0)
    # indicator integrals read f on the 8-neighborhood of the set, a ring that
    # never shrinks; keep functions whose gap floor L * 2 sqrt(2) w fits under epsilon
    lip_cap = float(recipe.get("lipschitz_cap", 1.0))
    cfg.functions = [f for f in cfg.functions if f.lipschitz_constant() <= lip_cap + 1e-9]
    return s, cfg


@runner("shrinking")
def _shrinking_runner(recipe, seed):
    from ..convergence import crosscheck, lipschitz_bound
    from ..integral import integrate

    s, cfg = _shrinking(recipe)
    rep = crosscheck(s, cfg)
    a = s.limit.point.cell
    r0 = float(recipe.get("r0", 0.25))
    worst = math.inf
    w = GridSpace(s.n).cell_width
    for k in range(s.horizon):
        for f in cfg.functions:
            gap = abs(integrate(s[k], f) - f.at(a))
            worst = min(worst, lipschitz_bound(f, r0 / (k + 1), w) - gap)
    return {
        "verdicts": {k: c.verdict for k, c in rep.conditions.items()},
        "all_converged": all(c.verdict == "converged" for c in rep.conditions.values()),
        "anomalies": len(rep.anomalies),
        "lipschitz_bound_slack": worst,
    }


@runner("prokhorov_deltas")
def _prokhorov_deltas(recipe, seed):
    from ..metrics import SetFamily, prokhorov

    out = {}
    worst_small = 0.0
    n = 4
    space = GridSpace(n)
    res = space.cell_width / 4
    for a in range(n * n):
        for b in range(n * n):
            if a == b:
                continue
            d = prokhorov(point_mass(PointRef(n, a)), point_mass(PointRef(n, b)), "exhaustive", res).value
            worst_small = max(worst_small, abs(d - min(space.distance(a, b), 1.0)))
    out["exhaustive_4x4_max_error"] = worst_small
    out["exhaustive_4x4_resolution"] = res
    big = int(recipe.get("grid", 64))
    space = GridSpace(big)
    fam = SetFamily.structured(big)
    rng = random.Random(seed)
    errs = []
    for _ in range(int(recipe.get("pairs", 4))):
        a, b = rng.sample(range(big * big), 2)
        d = prokhorov(point_mass(PointRef(big, a)), point_mass(PointRef(big, b)), fam).value
        errs.append(abs(d - min(space.distance(a, b), 1.0)))
    out["structured_max_error"] = max(errs)
    out["structured_cell_width"] = space.cell_width
    return out


def _kr_pool(n):
    from ..measures import combine
    from ..solid import extend, nvssf

    space = GridSpace(n)
    rng = random.Random(7)
    pool = [
        point_mass(PointRef(n, 0)),
        point_mass(PointRef(n, n * n - 1)),
        uniform_radon(n),
        indicator_dtm(Region.from_cells(n, [space.cell(1, 1), space.cell(1, 2)], COMPACT)),
    ]
    for _ in range(2):
        pts = sorted(rng.sample(range(n * n), 3))
        pool.append(extend(nvssf([PointRef(n, c) for c in pts], 1)))
    return pool


@runner("kr_deltas")
def _kr_deltas(recipe, seed):
    from ..metrics import LipFamily, kr, metric_axiom_suite

    n = int(recipe.get("grid", 8))
    space = GridSpace(n)
    rng = random.Random(seed)
    pairs = [tuple(rng.sample(range(n * n), 2)) for _ in range(int(recipe.get("pairs", 40)))]
    err = 0.0
    for a, b in pairs:
        fam = LipFamily.pair_witnesses(n, [(a, b)]).union(LipFamily.clamped_cones(n, [a, b]))
        v = kr(point_mass(PointRef(n, a)), point_mass(PointRef(n, b)), fam).value
        err = max(err, abs(v - min(space.distance(a, b), 2.0)))
    pool = _kr_pool(n)
    fixed = LipFamily.clamped_cones(n)
    rep = metric_axiom_suite(lambda x, y: kr(x, y, fixed).value, pool)
    from ..metrics import prokhorov

    small = _kr_pool(3)
    rep_p = metric_axiom_suite(lambda x, y: prokhorov(x, y, "exhaustive").value, small, exhaustive=True)
    return {
        "pairs": len(pairs),
        "witness_max_error": err,
        "kr_axiom_violations": rep.violations,
        "prokhorov_axiom_violations": rep_p.violations,
        "pool_size": len(pool),
    }


@runner("axioms_exhaustive")
def _axioms_exhaustive(recipe, seed):
    from ..solid import extend, nvssf, random_placement, two_point_area

    n = int(recipe.get("grid", 4))
    rng = random.Random(seed)
    space = GridSpace(n)
    builtins = {
        "point_mass": point_mass(PointRef(n, space.cell(1, 2))),
        "radon": uniform_radon(n),
        "indicator": indicator_dtm(Region.from_cells(n, [space.cell(1, 1), space.cell(1, 2)], COMPACT)),
        "two_point_area": extend(two_point_area([PointRef(n, space.cell(1, 0)), PointRef(n, space.cell(2, 3))])),
    }
    out = {"dtm_violations": {}, "tm": {}, "measure": {}}
    for name, m in builtins.items():
        reps = verify_dtm_axioms(m)
        out["dtm_violations"][name] = sum(not r.passed for r in reps)
        out["tm"][name] = verify_tm(m).verdict
    placements = int(recipe.get("placements", 20))
    nv_dtm = nv_tm = nv_meas = 0
    for _ in range(placements):
        m = extend(nvssf(random_placement(n, 3, rng), 1))
        nv_dtm += sum(not r.passed for r in verify_dtm_axioms(m))
        nv_tm += verify_tm(m).verdict == "fail"
        nv_meas += verify_measure(m).verdict == "pass"
    out["nvssf_placements"] = placements
    out["nvssf_dtm_violations"] = nv_dtm
    out["nvssf_tm_failures"] = nv_tm
    out["nvssf_measure_passes"] = nv_meas
    out["builtin_dtm_violations"] = sum(out["dtm_violations"].values())
    out["indicator_tm"] = out["tm"]["indicator"]
    return out


@runner("crosscheck")
def _crosscheck(recipe, seed):
    from ..convergence import alternating_sequence, constant_sequence, crosscheck, default_config
    from ..metrics import LipFamily, convergence_link

    mix_s, mix_cfg = _mixing(_req(recipe, "mixing"))
    n = int(recipe.get("grid", 8))
    space = GridSpace(n)
    a, b = space.cell(1, 1), space.cell(n - 2, n - 3)
    alt = alternating_sequence(PointRef(n, a), PointRef(n, b), 32)
    alt_cfg = default_config(n, [a, b], epsilon=0.01)
    const = constant_sequence(uniform_radon(n), 16)
    out = {}
    for name, s, cfg in (("alternating", alt, alt_cfg), ("constant", const, alt_cfg)):
        rep = crosscheck(s, cfg)
        out[f"{name}_verdicts"] = sorted({c.verdict for c in rep.conditions.values()})
        out[f"{name}_anomalies"] = len(rep.anomalies)
    out["constant_index"] = max(c.index for c in crosscheck(const, alt_cfg).conditions.values())
    ms = GridSpace(mix_s.n)
    stride = max(1, mix_s.n // 4)
    cones = LipFamily.clamped_cones(mix_s.n, [ms.cell(i, j) for i in range(0, mix_s.n, stride) for j in range(0, mix_s.n, stride)])
    link_p = convergence_link(mix_s, "P", mix_cfg, resolution=float(recipe.get("resolution", 1 / 256)))
    link_kr = convergence_link(mix_s, "KR", mix_cfg, family=cones)
    link_alt = convergence_link(alt, "P", alt_cfg)
    tail = mix_s.horizon // 2
    out["mixing_link_P"] = link_p.verdict
    out["mixing_link_KR"] = link_kr.verdict
    out["mixing_P_tail_max"] = max(link_p.distances[tail:])
    out["mixing_KR_tail_max"] = max(link_kr.distances[tail:])
    out["mixing_P_slope"] = link_p.decay_slope()
    out["mixing_KR_slope"] = link_kr.decay_slope()
    out["alternating_link"] = link_alt.verdict
    out["alternating_P_tail_max"] = max(link_alt.distances[alt.horizon // 2 :])
    return out


@runner("tightness")
def _tightness(recipe, seed):
    from ..convergence import alternating_sequence, mixing_sequence
    from ..families import MeasureFamily, prokhorov_experiment, tightness_witness, variation_bound
    from ..integral import GridFunction
    from ..measures import combine
    from ..convergence import MeasureSequence

    n = int(recipe.get("grid", 8))
    space = GridSpace(n)
    a = space.cell(2, 3)
    da = point_mass(PointRef(n, a))
    fam = MeasureFamily([da], "delta")
    both = MeasureFamily([combine([(2.0, da)]), uniform_radon(n)], "mixed")
    out = {
        "delta_literal": (tightness_witness(fam, 0.5, "paper_literal") or Region(n, 0)).cells,
        "delta_classical": (tightness_witness(fam, 0.5, "classical") or Region(n, 0)).cells,
        "literal_eps_at_norm_none": tightness_witness(both, 2.0, "paper_literal") is None,
        "classical_whole_square": tightness_witness(both, 1e-9, "classical") is not None,
        "variation_mixed": variation_bound(both),
    }
    D = Region.from_cells(n, [space.cell(1, 1), space.cell(1, 2)], COMPACT)
    mix = mixing_sequence(indicator_dtm(D), uniform_radon(n), 32)
    alt = alternating_sequence(PointRef(n, a), PointRef(n, space.cell(6, 6)), 32)
    grow = MeasureSequence(lambda k: combine([(float(k + 1), da)]), da, 32, "scaled_delta")
    fns = [GridFunction.cone(n, a, 0.5), GridFunction.constant(n, 1.0), GridFunction.cone(n, space.cell(6, 6), 0.5)]
    rep = prokhorov_experiment([mix, alt, grow], fns, eps=0.05)
    for row in rep.rows:
        out[f"{row.name}_bounded"] = row.bounded
        out[f"{row.name}_found"] = row.found
    out["alternating_subsequence_parity"] = sorted({i % 2 for i in rep.rows[1].subsequence})
    return out


# --- loading and running ----------------------------------------------------------------------


def _check_expectation(e: dict, i: int):
    path = f"expectations[{i}]"
    for key in ("name", "op", "basis"):
        if key not in e:
            raise ScenarioError(f"{path}.{key}: missing")
    if e["op"] not in OPS:
        raise ScenarioError(f"{path}.op: unknown operator {e['op']!r}")
    if e["basis"] not in BASES:
        raise ScenarioError(f"{path}.basis: must be one of {BASES}")
    if e["basis"] == "reference" and not e.get("anchor"):
        raise ScenarioError(f"{path}.anchor: reference expectations need an anchor")


def validate(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: expected a JSON object")
    for key in ("id", "recipe", "expectations"):
        if key not in doc:
            raise ScenarioError(f"{key}: missing")
    r = doc["recipe"]
    if not isinstance(r, dict) or "runner" not in r:
        raise ScenarioError("recipe.runner: missing")
    if r["runner"] not in RUNNERS:
        raise ScenarioError(f"recipe.runner: unknown runner {r['runner']!r}")
    for i, e in enumerate(doc["expectations"]):
        _check_expectation(e, i)
    return doc


def _lookup(obs: dict, name: str):
    cur = obs
    for part in name.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise ScenarioError(f"expectation refers to unknown observation {name!r}")
        cur = cur[part]
    return cur


def _compare(op, observed, expected, tol) -> bool:
    if op == "is":
        return observed == expected
    if observed is None:
        return False
    if op == "eq":
        return abs(observed - expected) <= tol
    if op == "le":
        return observed <= expected + tol
    if op == "ge":
        return observed >= expected - tol
    if op == "within_rel":
        return abs(observed - expected) <= tol * abs(expected)
    if op == "in_range":
        lo, hi = expected
        return lo - tol <= observed <= hi + tol
    raise ScenarioError(f"unknown operator {op!r}")


def _builtin_dir():
    return resources.files(__name__)


def list_builtin() -> list[str]:
    return sorted(p.name[: -len(".json")] for p in _builtin_dir().iterdir() if p.name.endswith(".json"))


def load(ref) -> dict:
    """Scenario document from a built-in id, a path, or an already-parsed dict."""
    if isinstance(ref, dict):
        return validate(ref)
    ref = str(ref)
    if ref in list_builtin():
        text = (_builtin_dir() / f"{ref}.json").read_text()
    else:
        p = Path(ref)
        if not p.exists():
            raise ScenarioError(f"scenario {ref!r}: not a built-in id or readable file")
        text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {ref!r}: invalid JSON ({exc})") from None
    try:
        return validate(doc)
    except ScenarioError as exc:
        raise ScenarioError(f"{ref}: {exc}") from None


def run(scenario, seed: int | None = None) -> ScenarioReport:
    doc = load(scenario)
    seed = int(doc.get("seed", 0) if seed is None else seed)
    obs = _plain(RUNNERS[doc["recipe"]["runner"]](doc["recipe"], seed))
    results = []
    for e in doc["expectations"]:
        observed = _lookup(obs, e["name"])
        tol = float(e.get("tol", 0.0))
        ok = bool(_compare(e["op"], observed, e.get("value"), tol))
        results.append(
            ExpectationResult(e["name"], e["op"], e.get("value"), tol, observed, ok, e["basis"], e.get("anchor", ""))
        )
    return ScenarioReport(doc["id"], seed, obs, results)
