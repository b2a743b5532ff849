"""Discretized unit square with dual-adjacency digital topology.

The square ``[0, 1]^2`` is cut into ``n x n`` closed cells. A :class:`Region`
is a set of cells plus a kind: a COMPACT region denotes the closed union of
its cells, an OPEN region denotes the interior (relative to the square) of
that union. Cells are indexed row-major, ``index = i * n + j``, and a cell set
is stored as a Python integer bitmask so that region algebra is plain bit
arithmetic.

Connectivity follows the continuum sets: closed unions connect through shared
corners (8-adjacency), interiors only through shared edges (4-adjacency).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

__all__ = [
    "Kind",
    "OPEN",
    "COMPACT",
    "GridSpace",
    "Region",
    "PointRef",
    "ContractError",
    "interior",
    "closure",
    "components",
    "contains_point",
    "contains_region",
    "is_solid",
    "dilate",
    "sandwich",
    "grow8",
    "erode8",
    "refine_bits",
    "ball",
]


class ContractError(ValueError):
    """Raised when an operation's precondition is violated."""


class Kind(enum.Enum):
    OPEN = "open"
    COMPACT = "compact"

    @property
    def opposite(self) -> "Kind":
        return Kind.COMPACT if self is Kind.OPEN else Kind.OPEN


OPEN = Kind.OPEN
COMPACT = Kind.COMPACT


@dataclass(frozen=True)
class GridSpace:
    """An ``n x n`` cell grid on the unit square."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ContractError(f"grid needs n >= 2, got {self.n}")

    @property
    def cell_width(self) -> float:
        return 1.0 / self.n

    @property
    def size(self) -> int:
        return self.n * self.n

    @property
    def full_bits(self) -> int:
        return (1 << self.size) - 1

    def center(self, cell: int) -> tuple[float, float]:
        i, j = divmod(cell, self.n)
        return ((i + 0.5) / self.n, (j + 0.5) / self.n)

    def centers(self) -> np.ndarray:
        """Array of shape (n*n, 2) with all cell centers, row-major."""
        idx = (np.arange(self.n) + 0.5) / self.n
        ii, jj = np.meshgrid(idx, idx, indexing="ij")
        return np.column_stack([ii.ravel(), jj.ravel()])

    def distance(self, a: int, b: int) -> float:
        (x0, y0), (x1, y1) = self.center(a), self.center(b)
        return math.hypot(x0 - x1, y0 - y1)

    def cell(self, i: int, j: int) -> int:
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise ContractError(f"cell ({i}, {j}) outside {self.n}x{self.n} grid")
        return i * self.n + j

    def full(self, kind: Kind = COMPACT) -> "Region":
        return Region(self.n, self.full_bits, kind)

    def empty(self, kind: Kind = COMPACT) -> "Region":
        return Region(self.n, 0, kind)

    def region(self, cells, kind: Kind = COMPACT) -> "Region":
        return Region.from_cells(self.n, cells, kind)


@dataclass(frozen=True)
class Region:
    """A cell set on an ``n x n`` grid, tagged OPEN or COMPACT."""

    n: int
    bits: int
    kind: Kind = COMPACT

    def __post_init__(self):
        if self.bits < 0 or self.bits >> (self.n * self.n):
            raise ContractError("cell bits outside the grid")

    @classmethod
    def from_cells(cls, n: int, cells, kind: Kind = COMPACT) -> "Region":
        bits = 0
        for c in cells:
            c = int(c)
            if not 0 <= c < n * n:
                raise ContractError(f"cell index {c} outside {n}x{n} grid")
            bits |= 1 << c
        return cls(n, bits, kind)

    @classmethod
    def from_mask(cls, mask, kind: Kind = COMPACT) -> "Region":
        mask = np.asarray(mask, dtype=bool)
        n = mask.shape[0]
        return cls(n, mask_to_bits(mask), kind)

    @property
    def space(self) -> GridSpace:
        return GridSpace(self.n)

    @property
    def cells(self) -> list[int]:
        return bits_to_cells(self.bits)

    @property
    def mask(self) -> np.ndarray:
        return bits_to_mask(self.bits, self.n)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __bool__(self) -> bool:
        return self.bits != 0

    def with_kind(self, kind: Kind) -> "Region":
        return Region(self.n, self.bits, kind)

    def complement(self) -> "Region":
        """The set-theoretic complement in the square: opposite kind, other cells."""
        return Region(self.n, full_bits(self.n) ^ self.bits, self.kind.opposite)

    def issubset(self, other: "Region") -> bool:
        return self.bits & ~other.bits == 0

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "n": self.n, "cells": self.cells}

    @classmethod
    def from_json(cls, obj) -> "Region":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls.from_cells(int(obj["n"]), obj["cells"], Kind(obj["kind"]))

    def __repr__(self) -> str:
        return f"Region(n={self.n}, kind={self.kind.value}, cells={self.cells})"


@dataclass(frozen=True)
class PointRef:
    """A distinguished point, always the center of ``cell``."""

    n: int
    cell: int

    def __post_init__(self):
        if not 0 <= self.cell < self.n * self.n:
            raise ContractError(f"point cell {self.cell} outside grid")

    @property
    def bit(self) -> int:
        return 1 << self.cell

    @property
    def center(self) -> tuple[float, float]:
        return GridSpace(self.n).center(self.cell)


# --- bit helpers -----------------------------------------------------------


def full_bits(n: int) -> int:
    return (1 << (n * n)) - 1


def bits_to_cells(bits: int) -> list[int]:
    out = []
    while bits:
        low = bits & -bits
        out.append(low.bit_length() - 1)
        bits ^= low
    return out


def bits_to_mask(bits: int, n: int) -> np.ndarray:
    raw = np.frombuffer(bits.to_bytes((n * n + 7) // 8, "little"), dtype=np.uint8)
    flat = np.unpackbits(raw, bitorder="little")[: n * n]
    return flat.reshape(n, n).astype(bool)


def mask_to_bits(mask: np.ndarray) -> int:
    packed = np.packbits(np.asarray(mask, dtype=bool).ravel(), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


@lru_cache(maxsize=None)
def _col_keep(n: int, dj: int) -> int:
    """Cells whose column survives a horizontal shift by ``dj``."""
    lo, hi = max(0, -dj), n - max(0, dj)
    row = sum(1 << j for j in range(lo, hi))
    return sum(row << (i * n) for i in range(n))


def shift(bits: int, n: int, di: int, dj: int) -> int:
    """Move every cell by (di, dj); cells leaving the grid are dropped."""
    if abs(di) >= n or abs(dj) >= n:
        return 0
    b = bits & _col_keep(n, dj)
    off = di * n + dj
    b = b << off if off >= 0 else b >> -off
    return b & full_bits(n)


_OFF4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
_OFF8 = _OFF4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def grow4(bits: int, n: int) -> int:
    out = bits
    for di, dj in _OFF4:
        out |= shift(bits, n, di, dj)
    return out


def grow8(bits: int, n: int) -> int:
    # separable: rows then columns
    b = bits | shift(bits, n, 0, 1) | shift(bits, n, 0, -1)
    return b | shift(b, n, 1, 0) | shift(b, n, -1, 0)


def erode8(bits: int, n: int) -> int:
    """Cells whose whole (edge-clipped) 8-neighbourhood lies in ``bits``."""
    full = full_bits(n)
    return full & ~grow8(full & ~bits, n)


def refine_bits(bits: int, n: int, factor: int) -> int:
    """Replace each cell by a ``factor x factor`` block on the finer grid."""
    m = bits_to_mask(bits, n)
    fine = np.repeat(np.repeat(m, factor, axis=0), factor, axis=1)
    return mask_to_bits(fine)


def touches_border(bits: int, n: int) -> bool:
    return bool(bits & _border(n))


@lru_cache(maxsize=None)
def _border(n: int) -> int:
    full = full_bits(n)
    inner = _col_keep(n, 1) & _col_keep(n, -1)
    inner &= full & ~((1 << n) - 1) & ~(((1 << n) - 1) << (n * (n - 1)))
    return full & ~inner


# --- components ------------------------------------------------------------

_LABEL_THRESHOLD = 400


@lru_cache(maxsize=1 << 20)
def component_bits(bits: int, n: int, eight: bool) -> tuple[int, ...]:
    """Connected components of a cell set, ordered by smallest cell index."""
    if not bits:
        return ()
    if n * n > _LABEL_THRESHOLD:
        structure = np.ones((3, 3)) if eight else None
        labels, count = ndimage.label(bits_to_mask(bits, n), structure=structure)
        flat = labels.ravel()
        comps = [mask_to_bits(flat == k) for k in range(1, count + 1)]
        return tuple(sorted(comps, key=lambda c: (c & -c)))
    grow = grow8 if eight else grow4
    comps = []
    rest = bits
    while rest:
        comp = rest & -rest
        while True:
            nxt = grow(comp, n) & bits
            if nxt == comp:
                break
            comp = nxt
        comps.append(comp)
        rest &= ~comp
    return tuple(comps)


def _adjacency8(kind: Kind) -> bool:
    return kind is COMPACT


# --- operations ------------------------------------------------------------


def interior(r: Region) -> Region:
    return Region(r.n, r.bits, OPEN)


def closure(r: Region) -> Region:
    return Region(r.n, r.bits, COMPACT)


def components(r: Region) -> list[Region]:
    """Connected components; 8-adjacency for COMPACT, 4-adjacency for OPEN."""
    return [Region(r.n, c, r.kind) for c in component_bits(r.bits, r.n, _adjacency8(r.kind))]


def contains_point(r: Region, p: PointRef) -> bool:
    return bool(r.bits >> p.cell & 1)


def contains_region(outer: Region, inner: Region) -> bool:
    """Whether the compact ``inner`` lies inside the open ``outer``."""
    if outer.kind is not OPEN or inner.kind is not COMPACT:
        raise ContractError("contains_region expects (OPEN, COMPACT)")
    if outer.n != inner.n:
        raise ContractError("regions live on different grids")
    return inner.bits & ~erode8(outer.bits, outer.n) == 0


def is_connected(r: Region) -> bool:
    return len(component_bits(r.bits, r.n, _adjacency8(r.kind))) == 1


def is_solid(r: Region) -> bool:
    """Connected with connected complement; an empty complement counts as connected."""
    if not is_connected(r):
        return False
    comp = r.complement()
    return not comp.bits or is_connected(comp)


@lru_cache(maxsize=4096)
def _disk_offsets(n: int, t: float) -> tuple[tuple[int, int], ...]:
    # center distances are |offset| / n; keep those strictly below t
    reach = min(n - 1, int(math.floor(t * n)))
    lim = (t * n) ** 2
    return tuple(
        (di, dj)
        for di in range(-reach, reach + 1)
        for dj in range(-reach, reach + 1)
        if di * di + dj * dj < lim - 1e-12
    )


def dilate_bits(bits: int, n: int, t: float) -> int:
    if not bits:
        return 0
    if t > math.sqrt(2.0):  # every pair of centers is closer than t
        return full_bits(n)
    offs = _disk_offsets(n, t)
    # fold by rows first: for each di collect the widest dj span
    spans: dict[int, list[int]] = {}
    for di, dj in offs:
        spans.setdefault(di, []).append(dj)
    row_cache: dict[int, int] = {}
    out = 0
    for di, djs in spans.items():
        w = max(djs)
        if w not in row_cache:
            b = bits
            for dj in range(1, w + 1):
                b |= shift(bits, n, 0, dj) | shift(bits, n, 0, -dj)
            row_cache[w] = b
        out |= shift(row_cache[w], n, di, 0)
    return out


def dilate(r: Region, t: float) -> Region:
    """Open region of cells whose center is closer than ``t`` to a center of ``r``."""
    if not t > 0:
        raise ContractError(f"dilation radius must be positive, got {t}")
    return Region(r.n, dilate_bits(r.bits, r.n, t), OPEN)


@dataclass(frozen=True)
class Sandwich:
    V: Region
    C: Region
    degenerate: bool


def sandwich(K: Region, U: Region) -> Sandwich:
    """Interpolate an open ``V`` and compact ``C = closure(V)`` with K in V, C in U."""
    if not contains_region(U, K):
        raise ContractError("not nested")
    if not K.bits:
        return Sandwich(Region(K.n, 0, OPEN), Region(K.n, 0, COMPACT), False)
    n = K.n
    vbits = grow8(K.bits, n) & erode8(U.bits, n)
    V = Region(n, vbits, OPEN)
    C = closure(V)
    if contains_region(V, K) and contains_region(U, C):
        return Sandwich(V, C, False)
    return Sandwich(interior(K), K, True)


def ball(space: GridSpace, center: int, radius: float, kind: Kind = COMPACT) -> Region:
    """Cells whose centers lie within ``radius`` of the center of ``center``."""
    c = space.centers()
    x, y = space.center(center)
    inside = np.hypot(c[:, 0] - x, c[:, 1] - y) <= radius + 1e-12
    return Region(space.n, mask_to_bits(inside.reshape(space.n, space.n)), kind)
