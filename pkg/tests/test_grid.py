import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topomeasure.grid import (
    COMPACT,
    OPEN,
    ContractError,
    GridSpace,
    PointRef,
    Region,
    ball,
    closure,
    component_bits,
    components,
    contains_point,
    contains_region,
    dilate,
    dilate_bits,
    erode8,
    grow4,
    grow8,
    interior,
    is_connected,
    is_solid,
    refine_bits,
    sandwich,
)

import oracles as O


@st.composite
def cell_sets(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    bits = draw(st.integers(0, (1 << (n * n)) - 1))
    return n, bits


@given(cell_sets())
def test_components_match_bfs(nb):
    n, bits = nb
    for eight in (True, False):
        got = {frozenset(O.cells_of(c)) for c in component_bits(bits, n, eight)}
        want = {frozenset(c) for c in O.components(O.cells_of(bits), n, eight)}
        assert got == want


def test_large_grid_components_use_labelling_and_agree():
    rng = np.random.default_rng(3)
    n = 24
    mask = rng.random((n, n)) < 0.45
    bits = sum(1 << int(c) for c in np.flatnonzero(mask))
    for eight in (True, False):
        got = {frozenset(O.cells_of(c)) for c in component_bits(bits, n, eight)}
        want = {frozenset(c) for c in O.components(O.cells_of(bits), n, eight)}
        assert got == want


@given(cell_sets())
def test_grow_and_erode_match_oracle(nb):
    n, bits = nb
    cells = O.cells_of(bits)
    assert O.cells_of(grow8(bits, n)) == O.grow8(cells, n)
    assert O.cells_of(erode8(bits, n)) == O.erode8(cells, n)
    four = set(cells)
    for c in cells:
        four.update(O.neighbors(c, n, False))
    assert O.cells_of(grow4(bits, n)) == four


@given(cell_sets(max_n=5), st.floats(0.01, 1.6))
@settings(max_examples=60)
def test_dilation_matches_distance_oracle(nb, t):
    n, bits = nb
    cells = O.cells_of(bits)
    # strictly closer than t, with the same guard against ties on the lattice
    want = {c for c in range(n * n) if any((O.dist(c, k, n) * n) ** 2 < (t * n) ** 2 - 1e-12 for k in cells)}
    assert O.cells_of(dilate_bits(bits, n, t)) == want


@given(cell_sets(max_n=5))
def test_solidity_matches_oracle(nb):
    n, bits = nb
    if not bits:
        return
    cells = O.cells_of(bits)
    assert is_solid(Region(n, bits, COMPACT)) == O.is_solid(cells, n, True)
    assert is_solid(Region(n, bits, OPEN)) == O.is_solid(cells, n, False)


def test_region_basics():
    sp = GridSpace(4)
    r = sp.region([0, 1, 5], COMPACT)
    assert len(r) == 3 and r.cells == [0, 1, 5]
    assert interior(r).kind is OPEN and closure(interior(r)) == r
    assert r.complement().kind is OPEN
    assert Region.from_json(r.to_json()) == r
    assert Region.from_mask(r.mask) == r
    with pytest.raises(ContractError):
        Region(2, 1 << 4)
    with pytest.raises(ContractError):
        PointRef(3, 9)


def test_eight_connected_compact_can_be_four_disconnected_open():
    # a diagonal pair: one compact component, two open components
    r = Region.from_cells(3, [0, 4], COMPACT)
    assert is_connected(r)
    assert len(components(r.with_kind(OPEN))) == 2


def test_contains_region_needs_a_margin():
    n = 5
    K = Region.from_cells(n, [12], COMPACT)
    assert not contains_region(Region.from_cells(n, [12], OPEN), K)
    assert contains_region(Region(n, grow8(1 << 12, n), OPEN), K)
    # the whole square contains everything, edge cells included
    assert contains_region(GridSpace(n).full(OPEN), Region.from_cells(n, [0], COMPACT))
    with pytest.raises(ContractError):
        contains_region(K, K)


def test_contains_point():
    sp = GridSpace(3)
    assert contains_point(sp.region([4]), PointRef(3, 4))
    assert not contains_point(sp.region([3]), PointRef(3, 4))


def test_geometry():
    sp = GridSpace(4)
    assert sp.cell_width == 0.25
    assert sp.center(0) == (0.125, 0.125)
    assert math.isclose(sp.distance(0, 5), math.sqrt(2) * 0.25)
    assert sp.distance(0, 15) == pytest.approx(O.dist(0, 15, 4))


def test_ball_is_distance_closed():
    sp = GridSpace(8)
    b = ball(sp, sp.cell(4, 4), 2 * sp.cell_width)
    want = {c for c in range(64) if O.dist(c, sp.cell(4, 4), 8) <= 2 / 8 + 1e-12}
    assert set(b.cells) == want


def test_dilate_rejects_nonpositive_radius():
    with pytest.raises(ContractError):
        dilate(GridSpace(3).region([0]), 0.0)


@given(cell_sets(max_n=4), st.sampled_from([2, 3]))
@settings(max_examples=40)
def test_refinement_is_blockwise(nb, f):
    n, bits = nb
    fine = O.cells_of(refine_bits(bits, n, f))
    m = n * f
    want = {(i * f + a) * m + (j * f + b) for c in O.cells_of(bits) for i, j in [divmod(c, n)] for a in range(f) for b in range(f)}
    assert fine == want


def test_sandwich_nests():
    n = 7
    K = Region.from_cells(n, [24], COMPACT)
    U = Region(n, grow8(grow8(1 << 24, n), n), OPEN)
    s = sandwich(K, U)
    assert not s.degenerate
    assert contains_region(s.V, K) and contains_region(U, s.C)
    with pytest.raises(ContractError):
        sandwich(K, Region.from_cells(n, [24], OPEN))
