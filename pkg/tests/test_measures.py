import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topomeasure.grid import COMPACT, OPEN, ContractError, GridSpace, PointRef, Region
from topomeasure.measures import (
    Budget,
    FunctionEvaluator,
    annihilates_points,
    classify,
    combine,
    evaluator_from_json,
    indicator_dtm,
    norm,
    point_mass,
    radon_from_weights,
    uniform_radon,
    verify_dtm_axioms,
    verify_measure,
    verify_tm,
)

import oracles as O


def by_axiom(reports):
    return {r.axiom: r for r in reports}


# --- values against oracles ---------------------------------------------------


@given(st.integers(0, 15), st.integers(0, (1 << 16) - 1), st.sampled_from([COMPACT, OPEN]))
def test_point_mass_values(cell, bits, kind):
    m = point_mass(PointRef(4, cell))
    assert m(Region(4, bits, kind)) == (1.0 if cell in O.cells_of(bits) else 0.0)


@given(st.lists(st.floats(0, 5), min_size=9, max_size=9), st.integers(0, 511))
def test_radon_is_weight_sum(w, bits):
    m = radon_from_weights(np.array(w).reshape(3, 3))
    want = sum(w[c] for c in O.cells_of(bits))
    for kind in (COMPACT, OPEN):
        assert m(Region(3, bits, kind)) == pytest.approx(want, abs=1e-12)


def test_indicator_values_match_containment_oracle():
    n = 4
    D = {5, 6}
    m = indicator_dtm(Region.from_cells(n, D, COMPACT))
    for bits in range(1 << (n * n)):
        cells = O.cells_of(bits)
        assert m(Region(n, bits, COMPACT)) == float(D <= cells)
        assert m(Region(n, bits, OPEN)) == float(D <= O.erode8(cells, n))


def test_indicator_needs_connected_nonempty_set():
    with pytest.raises(ContractError):
        indicator_dtm(Region(3, 0, COMPACT))
    with pytest.raises(ContractError):
        indicator_dtm(Region.from_cells(3, [0, 2], COMPACT))


def test_combination_is_regionwise_linear():
    sp = GridSpace(3)
    a, b = point_mass(PointRef(3, 0)), uniform_radon(3)
    c = combine([(2.0, a), (0.5, b)])
    for bits in (0, 1, 3, 0b111111111, 0b100010000):
        for kind in (COMPACT, OPEN):
            r = Region(3, bits, kind)
            assert c(r) == pytest.approx(2 * a(r) + 0.5 * b(r))
    assert norm(c) == pytest.approx(2.5)
    with pytest.raises(ContractError):
        combine([(-1.0, a)])
    assert sp.n == 3


def test_norm_and_point_annihilation():
    assert norm(uniform_radon(3, 2.0)) == pytest.approx(2.0)
    assert not annihilates_points(point_mass(PointRef(3, 4)))
    assert annihilates_points(indicator_dtm(Region.from_cells(3, [0, 1], COMPACT)))


# --- verifiers on the built-ins -----------------------------------------------------


@pytest.mark.parametrize(
    "m",
    [
        point_mass(PointRef(3, 4)),
        uniform_radon(3),
        radon_from_weights(np.arange(9.0).reshape(3, 3)),
        indicator_dtm(Region.from_cells(3, [0, 1], COMPACT)),
        indicator_dtm(Region.from_cells(3, [4], COMPACT)),
        combine([(1.0, point_mass(PointRef(3, 0))), (2.0, indicator_dtm(Region.from_cells(3, [3, 4], COMPACT)))]),
    ],
    ids=["delta", "uniform", "weights", "indicator2", "indicator1", "combination"],
)
def test_builtins_are_deficient_exhaustively(m):
    reps = verify_dtm_axioms(m, Budget.exhaustive())
    assert [r.axiom for r in reps] == ["DTM1", "DTM2", "DTM3", "monotone", "superadditive"]
    assert all(r.passed for r in reps), [r.to_json() for r in reps if not r.passed]
    assert all(r.sets_checked > 0 for r in reps)


def test_radon_and_delta_are_measures():
    for m in (point_mass(PointRef(3, 2)), uniform_radon(3)):
        c = classify(m, Budget.exhaustive())
        assert c.is_dtm and c.tm.passed and c.measure.passed


def test_indicator_of_two_cells_fails_tm_with_real_witness():
    m = indicator_dtm(Region.from_cells(3, [0, 1], COMPACT))
    rep = verify_tm(m, Budget.exhaustive())
    assert rep.verdict == "fail"
    C, U = rep.witness
    assert C.kind is COMPACT and U.kind is OPEN and C.bits | U.bits == (1 << 9) - 1
    assert m(C) + m(U) < m(GridSpace(3).full()) - 1e-9
    assert not verify_measure(m, Budget.exhaustive()).passed


def test_single_cell_indicator_is_a_closed_square_not_a_point():
    # a grid cell is a closed square: an open set reaching its boundary misses part of it
    a = indicator_dtm(Region.from_cells(3, [4], COMPACT))
    b = point_mass(PointRef(3, 4))
    for bits in range(512):
        assert a(Region(3, bits, COMPACT)) == b(Region(3, bits, COMPACT))
    U = Region.from_cells(3, range(1, 9), OPEN)
    assert b(U) == 1.0 and a(U) == 0.0
    assert not verify_tm(a).passed and verify_tm(b).passed


# --- seeded faults: each must be caught with a witness that really violates ---------


def _cardinality_squared(bits, kind):
    return float(O.cells_of(bits).__len__() ** 2)


def test_nonadditive_fault_caught():
    m = FunctionEvaluator(3, _cardinality_squared, "card2")
    rep = by_axiom(verify_dtm_axioms(m))["DTM1"]
    assert rep.verdict == "fail"
    A, B = rep.witness
    u = Region(3, A.bits | B.bits, COMPACT)
    assert abs(m(u) - m(A) - m(B)) > 1e-9


def test_nonmonotone_fault_caught():
    m = FunctionEvaluator(3, lambda bits, kind: 1.0 if bits == 1 else 0.0, "spike")
    rep = by_axiom(verify_dtm_axioms(m))["monotone"]
    assert rep.verdict == "fail"
    small, big = rep.witness
    assert small.bits & ~big.bits == 0 and m(small) > m(big)


def test_irregular_open_fault_caught():
    # compact values from a Radon measure, open values halved: an open set falls
    # below the compact set it contains
    base = uniform_radon(3)
    m = FunctionEvaluator(3, lambda b, k: base._eval_bits(b, k) * (0.5 if k is OPEN else 1.0), "open-half")
    reps = by_axiom(verify_dtm_axioms(m))
    assert reps["DTM2"].verdict == "fail"


def test_sampled_budget_is_seeded():
    m = FunctionEvaluator(4, _cardinality_squared)
    a = verify_dtm_axioms(m, Budget.sampled(300, seed=5))
    b = verify_dtm_axioms(m, Budget.sampled(300, seed=5))
    assert [r.to_json() for r in a] == [r.to_json() for r in b]
    assert by_axiom(a)["DTM1"].verdict == "fail"
    assert all(r.seed == 5 for r in a)


def test_sampled_budget_on_larger_grid_passes_builtins():
    sp = GridSpace(8)
    for m in (point_mass(PointRef(8, 27)), uniform_radon(8), indicator_dtm(sp.region([10, 11, 19]))):
        assert all(r.passed for r in verify_dtm_axioms(m, Budget.sampled(400, seed=1)))


def test_panel_budget_uses_given_regions():
    sp = GridSpace(3)
    m = indicator_dtm(sp.region([0, 1]))
    rep = verify_tm(m, Budget.panel([sp.region([0, 1, 3, 4])]))
    assert rep.passed and rep.sets_checked == 1
    rep = verify_tm(m, Budget.panel([sp.region([0])]))
    assert rep.verdict == "fail" and rep.sets_checked == 1


def test_exhaustive_budget_limited_to_small_grids():
    with pytest.raises(ContractError):
        verify_tm(uniform_radon(5), Budget.exhaustive())


def test_region_on_wrong_grid_rejected():
    with pytest.raises(ContractError):
        uniform_radon(3)(Region(4, 1, COMPACT))


# --- JSON ----------------------------------------------------------------------


@settings(max_examples=30)
@given(st.integers(0, 8), st.lists(st.floats(0, 3), min_size=9, max_size=9))
def test_json_round_trip(cell, w):
    sp = GridSpace(3)
    ms = [
        point_mass(PointRef(3, cell)),
        radon_from_weights(np.array(w).reshape(3, 3)),
        indicator_dtm(sp.region([cell])),
        combine([(1.5, point_mass(PointRef(3, cell))), (1.0, uniform_radon(3))]),
    ]
    for m in ms:
        back = evaluator_from_json(m.to_json())
        for bits in (0, 7, 1 << cell, 511):
            for kind in (COMPACT, OPEN):
                assert back(Region(3, bits, kind)) == m(Region(3, bits, kind))


def test_unknown_json_type():
    with pytest.raises(ContractError):
        evaluator_from_json({"type": "nope"})


def test_report_json_carries_witness_regions():
    rep = verify_tm(indicator_dtm(Region.from_cells(3, [0, 1], COMPACT)))
    doc = rep.to_json()
    assert doc["verdict"] == "fail" and len(doc["witness"]) == 2
    assert {w["kind"] for w in doc["witness"]} == {"compact", "open"}
