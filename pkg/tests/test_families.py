import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topomeasure.convergence import MeasureSequence, alternating_sequence, constant_sequence, mixing_sequence
from topomeasure.families import (
    MeasureFamily,
    compact_panel,
    greedy_cauchy_subsequence,
    prokhorov_experiment,
    tightness_witness,
    variation_bound,
)
from topomeasure.grid import ContractError, GridSpace, PointRef
from topomeasure.integral import GridFunction
from topomeasure.measures import combine, norm, point_mass, uniform_radon

N = 8
SP = GridSpace(N)


def deltas(cells):
    return MeasureFamily([point_mass(PointRef(N, c)) for c in cells], "deltas")


def test_variation_bound_is_largest_norm():
    fam = MeasureFamily([uniform_radon(N, 0.5), uniform_radon(N, 2.0), point_mass(PointRef(N, 0))])
    assert variation_bound(fam) == pytest.approx(2.0)
    assert variation_bound(fam.union(MeasureFamily([uniform_radon(N, 3.0)]))) == pytest.approx(3.0)
    with pytest.raises(ContractError):
        MeasureFamily([])


def test_compact_panel_nests_squares_and_is_unique():
    panel = compact_panel(N)
    bits = [r.bits for r in panel]
    assert len(bits) == len(set(bits))
    assert panel[0] == SP.full()
    squares = panel[: (N + 1) // 2]
    for a, b in zip(squares, squares[1:]):
        assert b.bits & ~a.bits == 0 and len(b) < len(a)
    assert all(r.bits for r in panel)
    # odd size ends in the center cell; every single cell is present on small grids
    assert len(compact_panel(5)[2]) == 1
    assert {1 << c for c in range(N * N)} <= set(bits)


def test_literal_tightness_for_a_single_delta_is_its_cell():
    a = SP.cell(3, 4)
    K = tightness_witness(deltas([a]), 0.5, "paper_literal")
    assert K.cells == [a]


def test_literal_tightness_fails_for_deltas_at_every_cell_below_one():
    # any K with delta_x(K) > eps for all x must contain all points
    fam = deltas(range(N * N))
    assert tightness_witness(fam, 0.5, "paper_literal") == SP.full()
    assert tightness_witness(fam, 1.0, "paper_literal") is None


def test_classical_tightness_is_witnessed_by_the_whole_square():
    fam = deltas(range(N * N)).union(MeasureFamily([uniform_radon(N)]))
    K = tightness_witness(fam, 1e-6, "classical")
    assert K is not None and K == SP.full()


@given(st.floats(0.01, 0.99))
def test_modes_differ_on_a_small_delta(eps):
    # mass eps / 2: no compact carries more than eps, yet nothing is missing outside the cell
    fam = MeasureFamily([combine([(eps / 2, point_mass(PointRef(N, 0)))])])
    assert tightness_witness(fam, eps, "paper_literal") is None
    assert tightness_witness(fam, eps, "classical").cells == [0]
    big = MeasureFamily([combine([(2 * eps, point_mass(PointRef(N, 0)))])])
    assert tightness_witness(big, eps, "paper_literal").cells == [0]


def test_tightness_contracts():
    with pytest.raises(ContractError):
        tightness_witness(deltas([0]), 0.0)
    with pytest.raises(ContractError):
        tightness_witness(deltas([0]), 0.1, "other")


def test_greedy_cauchy_subsequence_on_alternating_vectors():
    v = np.array([[0.0], [1.0]] * 6)
    sub = greedy_cauchy_subsequence(v, 0.1)
    assert sub == [0, 2, 4, 6, 8, 10]
    assert greedy_cauchy_subsequence(np.array([[0.0], [1.0]]), 0.1) == []


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=30), st.floats(0.01, 2))
def test_greedy_subsequence_members_are_pairwise_close(xs, eps):
    v = np.array(xs)[:, None]
    sub = greedy_cauchy_subsequence(v, eps)
    for i in sub:
        for j in sub:
            assert abs(v[i, 0] - v[j, 0]) <= eps + 1e-12
    assert sub == sorted(sub)


def test_prokhorov_experiment_rows():
    fs = [GridFunction.cone(N, SP.cell(1, 1), 0.5), GridFunction.constant(N, 1.0)]
    a, b = PointRef(N, SP.cell(1, 1)), PointRef(N, SP.cell(6, 6))
    growing = MeasureSequence(lambda k: uniform_radon(N, k + 1.0), uniform_radon(N), 16, "growing")
    seqs = [
        mixing_sequence(point_mass(a), uniform_radon(N), 16),
        alternating_sequence(a, b, 16),
        constant_sequence(uniform_radon(N), 8),
        growing,
    ]
    rows = {r.name: r for r in prokhorov_experiment(seqs, fs, eps=0.1).rows}
    assert rows["mixing"].bounded and rows["mixing"].found
    alt = rows["alternating"]
    assert alt.bounded and alt.found and len({i % 2 for i in alt.subsequence}) == 1
    assert rows["constant"].found and rows["constant"].variation == pytest.approx(norm(uniform_radon(N)))
    assert not rows["growing"].bounded and not rows["growing"].found
    assert "diverge" in rows["growing"].note
