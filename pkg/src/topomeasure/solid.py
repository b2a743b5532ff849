"""Solid-set functions and their extension to topological measures on the grid.

A solid-set function is only defined on solid regions (connected with
connected complement). :func:`extend` turns one into a :class:`DTMEvaluator`
on all regions by writing each region as a signed sum of solid pieces.

Two carriers are supported. On the ``"compact"`` carrier the square itself is
the space, so a connected compact ``C`` has value ``v(X) - sum v(U)`` over the
components ``U`` of its complement. On the ``"plane"`` carrier the square sits
inside the plane, complement components reaching the border merge with the
unbounded outside, and only the bounded ones (holes) are subtracted from the
value of the filled-in region.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .grid import (
    COMPACT,
    OPEN,
    ContractError,
    GridSpace,
    Kind,
    PointRef,
    Region,
    component_bits,
    full_bits,
    refine_bits,
    touches_border,
)
from .measures import REFINE, DTMEvaluator, register

CARRIERS = ("compact", "plane")


def _eight(kind: Kind) -> bool:
    return kind is COMPACT


def solid_on(bits: int, n: int, kind: Kind, carrier: str = "compact") -> bool:
    """Solidity of a cell set of the given kind on the given carrier."""
    if not bits:
        return False
    if len(component_bits(bits, n, _eight(kind))) != 1:
        return False
    rest = full_bits(n) & ~bits
    comps = component_bits(rest, n, not _eight(kind))
    if carrier == "plane":
        return all(touches_border(c, n) for c in comps)
    return len(comps) <= 1


class SolidSetFunction:
    """A nonnegative function of solid regions.

    Subclasses implement ``_value_bits(bits, kind)`` for solid cell sets.
    """

    name = "ssf"
    carrier = "compact"

    def __init__(self, n: int):
        self.n = int(n)
        self.space = GridSpace(self.n)

    def _value_bits(self, bits: int, kind: Kind) -> float:
        raise NotImplementedError

    def is_solid(self, r: Region) -> bool:
        return solid_on(r.bits, r.n, r.kind, self.carrier)

    def value(self, r: Region) -> float:
        if r.n != self.n:
            raise ContractError("region and solid-set function live on different grids")
        if r.bits and not self.is_solid(r):
            raise ContractError(f"value() needs a solid region, got {r!r}")
        return self._value_bits(r.bits, r.kind) if r.bits else 0.0

    __call__ = value

    def total(self) -> float:
        return self._value_bits(full_bits(self.n), COMPACT)

    @property
    def params(self) -> dict:
        return {}

    def refine(self, factor: int = REFINE) -> "SolidSetFunction":
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"type": self.name, "grid": self.n, **self.params}


def _point_mask(points: Sequence[PointRef]) -> int:
    out = 0
    for p in points:
        out |= p.bit
    return out


def _refine_points(points, n, factor):
    from .measures import _center_subcell

    return [PointRef(n * factor, _center_subcell(p.cell, n, factor)) for p in points]


class NVSSF(SolidSetFunction):
    """Counts points of ``P`` (``|P| = 2k + 1``): value ``floor(count / 2) / k``."""

    name = "nvssf"

    def __init__(self, points: Sequence[PointRef], k: int):
        points = list(points)
        if not points:
            raise ContractError("nvssf needs points")
        grid = {p.n for p in points}
        if len(grid) != 1:
            raise ContractError("points must share one grid")
        k = int(k)
        if k < 1 or len(points) != 2 * k + 1:
            raise ContractError(f"nvssf with k={k} needs {2 * k + 1} points, got {len(points)}")
        if len({p.cell for p in points}) != len(points):
            raise ContractError("nvssf points must be distinct cells")
        super().__init__(grid.pop())
        self.k = k
        self.points = points
        self._mask = _point_mask(points)

    def _value_bits(self, bits, kind):
        return ((bits & self._mask).bit_count() // 2) / self.k

    @property
    def params(self):
        return {"n": self.k, "points": [p.cell for p in self.points]}

    def refine(self, factor=REFINE):
        return NVSSF(_refine_points(self.points, self.n, factor), self.k)


class TwoPointArea(SolidSetFunction):
    """Area-weighted function of two points, realized on the plane carrier.

    ``value(A)`` is 0 if ``A`` misses both points, ``area(A)`` if it holds
    one, and ``2 area(A)`` if it holds both. Area is a per-cell density sum.
    """

    name = "two_point_area"
    carrier = "plane"

    def __init__(self, points: Sequence[PointRef], density=None):
        points = list(points)
        if len(points) != 2 or points[0].n != points[1].n or points[0].cell == points[1].cell:
            raise ContractError("two_point_area needs two distinct points on one grid")
        n = points[0].n
        super().__init__(n)
        if density is None:
            density = np.full((n, n), 1.0 / (n * n))
        self.density = np.asarray(density, dtype=float).reshape(n, n)
        if np.any(self.density < 0) or not np.all(np.isfinite(self.density)):
            raise ContractError("density must be finite and nonnegative")
        self.points = points
        self._mask = _point_mask(points)
        from .measures import Radon

        self._area = Radon(self.density)

    def area(self, bits: int) -> float:
        return self._area._eval_bits(bits, COMPACT)

    def _value_bits(self, bits, kind):
        hits = (bits & self._mask).bit_count()
        return 0.0 if hits == 0 else hits * self.area(bits)

    @property
    def params(self):
        return {"points": [p.cell for p in self.points]}

    def to_json(self):
        out = super().to_json()
        if not np.allclose(self.density, 1.0 / (self.n * self.n)):
            out["density"] = self.density.ravel().tolist()
        return out

    def refine(self, factor=REFINE):
        m = self.n * factor
        fine = np.zeros((m, m))
        fine[factor // 2 :: factor, factor // 2 :: factor] = self.density
        return TwoPointArea(_refine_points(self.points, self.n, factor), fine)


def nvssf(P: Sequence[PointRef], n: int) -> NVSSF:
    """Solid-set function of ``2n + 1`` points with value ``floor(|A & P| / 2) / n``."""
    return NVSSF(P, n)


def two_point_area(P: Sequence[PointRef], density=None) -> TwoPointArea:
    return TwoPointArea(P, density)


# --- extension ---------------------------------------------------------------


@lru_cache(maxsize=1 << 20)
def decompose(bits: int, n: int, kind: Kind, carrier: str) -> tuple[tuple[int, int, Kind], ...]:
    """Signed solid pieces ``(sign, bits, kind)`` whose values sum to the extension.

    Raises ContractError("extension inapplicable ...") if a piece is not solid.
    """
    full = full_bits(n)
    bits &= full
    if carrier not in CARRIERS:
        raise ContractError(f"unknown carrier {carrier!r}")
    if carrier == "compact" and kind is OPEN:
        rest = decompose(full & ~bits, n, COMPACT, carrier)
        head = ((1, full, COMPACT),) if bits else ()
        if not bits:
            return ()
        return head + tuple((-s, b, k) for s, b, k in rest)

    terms: list[tuple[int, int, Kind]] = []
    other = kind.opposite
    for comp in component_bits(bits, n, _eight(kind)):
        holes = component_bits(full & ~comp, n, _eight(other))
        if carrier == "compact":
            terms.append((1, full, COMPACT))
            terms.extend((-1, h, other) for h in holes)
        else:
            holes = [h for h in holes if not touches_border(h, n)]
            hull = comp
            for h in holes:
                hull |= h
            terms.append((1, hull, kind))
            terms.extend((-1, h, other) for h in holes)
    for _, b, k in terms:
        if not solid_on(b, n, k, carrier):
            raise ContractError(
                f"extension inapplicable: piece {Region(n, b, k)!r} of {Region(n, bits, kind)!r} is not solid"
            )
    return tuple(terms)


@lru_cache(maxsize=16)
def _term_index(bits_seq: tuple, n: int, kind: Kind, carrier: str):
    """Flattened decompositions of a whole table of regions: unique pieces plus (row, piece, sign) arrays."""
    pieces: dict[tuple[int, Kind], int] = {}
    rows, cols, signs = [], [], []
    for r, b in enumerate(bits_seq):
        for sign, pb, pk in decompose(b, n, kind, carrier):
            rows.append(r)
            cols.append(pieces.setdefault((pb, pk), len(pieces)))
            signs.append(sign)
    return list(pieces), np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(signs, float)


class SolidExtension(DTMEvaluator):
    """Topological measure extending a solid-set function to every region."""

    name = "solid_extension"

    def __init__(self, ssf: SolidSetFunction):
        super().__init__(ssf.n)
        self.ssf = ssf
        self._cache: dict[tuple[int, Kind], float] = {}
        self._lock = threading.Lock()

    def _eval_bits(self, bits, kind):
        key = (bits, kind)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        terms = decompose(bits, self.n, kind, self.ssf.carrier)
        val = 0.0
        for sign, b, k in terms:
            val += sign * self.ssf._value_bits(b, k)
        with self._lock:
            if len(self._cache) > 1 << 20:
                self._cache.clear()
            self._cache[key] = val
        return val

    def _eval_many(self, bits_seq: tuple, kind: Kind) -> np.ndarray:
        pieces, rows, cols, signs = _term_index(bits_seq, self.n, kind, self.ssf.carrier)
        vals = np.array([self.ssf._value_bits(b, k) for b, k in pieces], dtype=float)
        return np.bincount(rows, weights=signs * vals[cols] if len(cols) else None, minlength=len(bits_seq)).astype(float)

    def refine(self, factor=REFINE):
        return SolidExtension(self.ssf.refine(factor))

    def to_json(self):
        return {"type": self.name, "ssf": self.ssf.to_json()}

    def __repr__(self):
        return f"SolidExtension({type(self.ssf).__name__}, n={self.n}, {self.ssf.params})"


def extend(ssf: SolidSetFunction) -> SolidExtension:
    return SolidExtension(ssf)


def _point(grid: int, p) -> PointRef:
    if isinstance(p, (list, tuple)):
        return PointRef(grid, GridSpace(grid).cell(int(p[0]), int(p[1])))
    return PointRef(grid, int(p))


def ssf_from_json(obj: dict) -> SolidSetFunction:
    """Build from ``{"type": "nvssf", "n": k, "grid": N, "points": [...]}`` or
    ``{"type": "two_point_area", "grid": N, "points": [p1, p2]}``.

    Points are cell indices or ``[row, col]`` pairs.
    """
    kind = obj.get("type")
    if "grid" not in obj and not (kind == "two_point_area" and "n" in obj):
        raise ContractError("solid-set function JSON needs 'grid' (grid side length)")
    grid = int(obj.get("grid", obj.get("n")))
    pts = [_point(grid, p) for p in obj["points"]]
    if kind == "nvssf":
        return NVSSF(pts, int(obj.get("n", (len(pts) - 1) // 2)))
    if kind == "two_point_area":
        return TwoPointArea(pts, obj.get("density"))
    raise ContractError(f"unknown solid-set function type {kind!r}")


@register("solid_extension")
def _ext_from_json(obj):
    return SolidExtension(ssf_from_json(obj["ssf"]))


# --- searches ------------------------------------------------------------------


def random_placement(n: int, count: int, rng: random.Random) -> list[PointRef]:
    cells = rng.sample(range(n * n), count)
    return [PointRef(n, c) for c in sorted(cells)]


def strip_cover(points: Sequence[PointRef], pieces: int) -> list[Region]:
    """Cover the square by ``pieces`` solid compacts splitting the points as evenly as possible.

    Cuts fall between point columns. The first piece is the full-height left
    strip, middle pieces are strips stopping one row short of the bottom, and
    the last piece is the right strip joined to the whole bottom row. Every
    piece is solid; points must avoid the bottom row.
    """
    n = points[0].n
    if any(p.cell // n == n - 1 for p in points):
        raise ContractError("strip cover needs points off the bottom row")
    cols = sorted(p.cell % n for p in points)
    if pieces < 1 or pieces > len(set(cols)):
        raise ContractError("cannot split the points into that many column strips")
    size, extra = divmod(len(cols), pieces)
    cuts, at = [], 0
    for i in range(pieces - 1):
        at += size + (1 if i < extra else 0)
        if cols[at - 1] == cols[at]:
            raise ContractError("points sharing a column straddle a cut")
        cuts.append(cols[at - 1] + 1)
    bounds = [0] + cuts + [n]
    out = []
    for idx, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        rows = n if idx == 0 or pieces == 1 else n - 1
        cells = [i * n + j for i in range(rows) for j in range(lo, hi)]
        if idx == pieces - 1:
            cells += [(n - 1) * n + j for j in range(n)]
        out.append(Region.from_cells(n, sorted(set(cells)), COMPACT))
    return out


def cumulative_unions(pieces: Sequence[Region]) -> list[Region]:
    """Running unions ``A1, A1|A2, ...``; a panel holding these exposes cover subadditivity."""
    out, acc = [], 0
    for r in pieces:
        acc |= r.bits
        out.append(Region(r.n, acc, COMPACT))
    return out


@dataclass
class NonlinearityWitness:
    f: object
    g: object
    gap: float

    def to_json(self):
        return {"f": self.f.to_json(), "g": self.g.to_json(), "gap": self.gap}


def nonlinearity_witness(m: DTMEvaluator, searches: int = 200, seed: int = 0, points=None):
    """Search function pairs with ``|int(f+g) - int f - int g| > 1e-6``; best witness or None."""
    from .integral import GridFunction, integrate

    rng = random.Random(seed)
    n = m.n
    space = GridSpace(n)
    if points is None:
        ssf = getattr(m, "ssf", None)
        points = getattr(ssf, "points", None) or []
    centers = [space.center(p.cell) for p in points]
    cands: list[GridFunction] = []
    for c in centers:
        for r in (0.15, 0.3, 0.6):
            cands.append(GridFunction.cone(n, c, r))
    for r in (0.2, 0.4):
        for c in centers or [(0.5, 0.5)]:
            cands.append(GridFunction.plateau(n, c, r, r / 2))
    while len(cands) < searches:
        vals = np.zeros((n, n))
        for _ in range(rng.randint(1, 3)):
            i0, j0 = rng.randrange(n), rng.randrange(n)
            i1, j1 = rng.randrange(i0, n) + 1, rng.randrange(j0, n) + 1
            vals[i0:i1, j0:j1] += rng.randint(1, 3)
        cands.append(GridFunction(vals))
    cache = {}

    def q(fn):
        key = fn.values.tobytes()
        if key not in cache:
            cache[key] = integrate(m, fn)
        return cache[key]

    best = None
    pairs = [(a, b) for a in range(len(cands)) for b in range(a + 1, len(cands))]
    for a, b in pairs[:searches]:
        f, g = cands[a], cands[b]
        gap = abs(q(f + g) - q(f) - q(g))
        if gap > 1e-6 and (best is None or gap > best.gap):
            best = NonlinearityWitness(f, g, gap)
    return best
