"""Set functions on grid regions and verifiers for the DTM / TM / measure hierarchy.

Every measure-like object is a :class:`DTMEvaluator`: it assigns a finite
nonnegative value to each OPEN or COMPACT :class:`~topomeasure.grid.Region`.
Built-ins are point masses, Radon measures with cell weights, indicator
deficient topological measures, and nonnegative combinations of these.

Regularity is checked against a refined copy of the evaluator: an open region
is approximated from inside by the compact obtained by eroding its cells one
sub-cell layer on a 3x finer grid, and a compact region from outside by the
open one-layer sub-cell dilation. These approximants are genuine compact/open
sets of the square that sit strictly between the coarse sets, which is what
inner and outer regularity quantify over.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from .grid import (
    COMPACT,
    OPEN,
    ContractError,
    GridSpace,
    Kind,
    PointRef,
    Region,
    bits_to_cells,
    component_bits,
    erode8,
    full_bits,
    grow8,
    mask_to_bits,
    refine_bits,
)

TOL = 1e-9
REFINE = 3
EXHAUSTIVE_MAX_N = 4


class DTMEvaluator:
    """Base class for finite set functions on OPEN and COMPACT grid regions.

    Subclasses implement :meth:`_eval_bits`. ``refine(factor)`` should return
    the same object realized on the ``factor``-times finer grid, with all
    distinguished points moved to the central sub-cell of their cell.
    """

    name = "dtm"

    def __init__(self, n: int):
        self.n = int(n)
        self.space = GridSpace(self.n)

    def _eval_bits(self, bits: int, kind: Kind) -> float:
        raise NotImplementedError

    def _eval_many(self, bits_seq: Sequence[int], kind: Kind) -> np.ndarray:
        """Values on a whole table of regions; subclasses may vectorize."""
        return np.fromiter((self._eval_bits(int(b), kind) for b in bits_seq), float, len(bits_seq))

    def value(self, r: Region) -> float:
        if r.n != self.n:
            raise ContractError(f"region on {r.n}x{r.n} grid, evaluator on {self.n}x{self.n}")
        return self._eval_bits(r.bits, r.kind)

    __call__ = value

    @property
    def params(self) -> dict:
        return {}

    def refine(self, factor: int = REFINE) -> "DTMEvaluator":
        raise NotImplementedError(f"{type(self).__name__} has no refined realization")

    def can_refine(self) -> bool:
        try:
            self.refine(REFINE)
        except NotImplementedError:
            return False
        return True

    def inner_value(self, bits: int) -> float:
        """Limit of values of compacts shrinking onto the open region ``bits`` from inside."""
        try:
            fine = self.refine(REFINE)
        except NotImplementedError:
            return self._eval_bits(bits, OPEN)
        inner = erode8(refine_bits(bits, self.n, REFINE), self.n * REFINE)
        return fine._eval_bits(inner, COMPACT)

    def level_profile(self, f_values: np.ndarray, levels: np.ndarray):
        """Values on the super-level sets ``{f >= levels[j]}`` as ``(open, inner, compact)`` arrays.

        Returns None when no closed form is available; callers then evaluate
        every level set region by region.
        """
        return None

    def to_json(self) -> dict:
        return {"type": self.name, "n": self.n, **self.params}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n})"


def _center_subcell(cell: int, n: int, factor: int) -> int:
    i, j = divmod(cell, n)
    m = n * factor
    return (i * factor + factor // 2) * m + (j * factor + factor // 2)


class PointMass(DTMEvaluator):
    name = "point_mass"

    def __init__(self, a: PointRef):
        super().__init__(a.n)
        self.point = a

    def _eval_bits(self, bits, kind):
        return float(bits >> self.point.cell & 1)

    @property
    def params(self):
        return {"cell": self.point.cell}

    def refine(self, factor=REFINE):
        return PointMass(PointRef(self.n * factor, _center_subcell(self.point.cell, self.n, factor)))

    def inner_value(self, bits):
        return self._eval_bits(bits, OPEN)

    def level_profile(self, f_values, levels):
        v = (levels <= f_values.flat[self.point.cell]).astype(float)
        return v, v, v

    def __repr__(self):
        return f"PointMass(n={self.n}, cell={self.point.cell})"


class Radon(DTMEvaluator):
    """Measure with mass ``w[c]`` at the center of cell ``c``; cell boundaries are weightless."""

    name = "radon"

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim == 1:
            side = int(round(np.sqrt(w.size)))
            w = w.reshape(side, side)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ContractError("radon weights must be finite and nonnegative")
        super().__init__(w.shape[0])
        self.weights = w
        flat = np.zeros(((w.size + 7) // 8) * 8)
        flat[: w.size] = w.ravel()
        # byte-wise lookup: table[k, b] = mass of the cells encoded by byte value b at chunk k
        bitsel = (np.arange(256)[:, None] >> np.arange(8)[None, :]) & 1
        self._table = flat.reshape(-1, 8) @ bitsel.T
        self._rows = np.arange(self._table.shape[0])

    def _eval_bits(self, bits, kind):
        if not bits:
            return 0.0
        raw = np.frombuffer(bits.to_bytes(self._table.shape[0], "little"), dtype=np.uint8)
        return float(self._table[self._rows, raw].sum())

    @property
    def params(self):
        return {"weights": self.weights.ravel().tolist()}

    def refine(self, factor=REFINE):
        m = self.n * factor
        fine = np.zeros((m, m))
        fine[factor // 2 :: factor, factor // 2 :: factor] = self.weights
        return Radon(fine)

    def inner_value(self, bits):
        return self._eval_bits(bits, OPEN)

    def level_profile(self, f_values, levels):
        idx = np.searchsorted(levels, f_values.ravel())
        mass = np.bincount(idx, weights=self.weights.ravel(), minlength=len(levels))[: len(levels)]
        v = np.cumsum(mass[::-1])[::-1]
        return v, v, v


class IndicatorDTM(DTMEvaluator):
    """Value 1 on sets containing the connected compact ``D``, 0 otherwise."""

    name = "indicator"

    def __init__(self, D: Region):
        if not D.bits:
            raise ContractError("indicator set must be nonempty")
        if len(component_bits(D.bits, D.n, True)) != 1:
            raise ContractError("indicator set must be 8-connected")
        super().__init__(D.n)
        self.D = Region(D.n, D.bits, COMPACT)

    def _eval_bits(self, bits, kind):
        if kind is OPEN:
            bits = erode8(bits, self.n)
        return 1.0 if self.D.bits & ~bits == 0 else 0.0

    @property
    def params(self):
        return {"cells": self.D.cells}

    def refine(self, factor=REFINE):
        return IndicatorDTM(Region(self.n * factor, refine_bits(self.D.bits, self.n, factor), COMPACT))

    def inner_value(self, bits):
        return self._eval_bits(bits, OPEN)

    def level_profile(self, f_values, levels):
        flat = f_values.ravel()
        # D sits inside the closed level set iff it is above min over D, and
        # inside the open one iff it is above min over the one-step ring of D
        lo_c = flat[bits_to_cells(self.D.bits)].min()
        lo_o = flat[bits_to_cells(grow8(self.D.bits, self.n))].min()
        vo = (levels <= lo_o).astype(float)
        return vo, vo, (levels <= lo_c).astype(float)

    def __repr__(self):
        return f"IndicatorDTM(n={self.n}, D={self.D.cells})"


class Combination(DTMEvaluator):
    """Region-wise nonnegative combination ``sum coef_i * m_i``."""

    name = "combine"

    def __init__(self, terms: Sequence[tuple[float, DTMEvaluator]]):
        terms = [(float(c), m) for c, m in terms]
        if not terms:
            raise ContractError("combine needs at least one term")
        ns = {m.n for _, m in terms}
        if len(ns) != 1:
            raise ContractError("combined evaluators must share a grid")
        for c, _ in terms:
            if not np.isfinite(c) or c < 0:
                raise ContractError("coefficients must be finite and nonnegative")
        super().__init__(ns.pop())
        self.terms = terms

    def _eval_bits(self, bits, kind):
        return sum(c * m._eval_bits(bits, kind) for c, m in self.terms)

    def inner_value(self, bits):
        return sum(c * m.inner_value(bits) for c, m in self.terms)

    def refine(self, factor=REFINE):
        return Combination([(c, m.refine(factor)) for c, m in self.terms])

    def level_profile(self, f_values, levels):
        parts = [(c, m.level_profile(f_values, levels)) for c, m in self.terms]
        if any(p is None for _, p in parts):
            return None
        return tuple(sum(c * p[k] for c, p in parts) for k in range(3))

    def to_json(self):
        return {
            "type": self.name,
            "terms": [{"coef": c, "measure": m.to_json()} for c, m in self.terms],
        }

    def __repr__(self):
        inner = ", ".join(f"{c:g}*{m!r}" for c, m in self.terms)
        return f"Combination([{inner}])"


class FunctionEvaluator(DTMEvaluator):
    """Wrap an arbitrary ``(bits, kind) -> value`` callable; used for seeded faults."""

    name = "custom"

    def __init__(self, n: int, fn: Callable[[int, Kind], float], label: str = "custom"):
        super().__init__(n)
        self._fn = fn
        self.label = label

    def _eval_bits(self, bits, kind):
        return float(self._fn(bits, kind))

    def to_json(self):
        return {"type": self.name, "n": self.n, "label": self.label}


def point_mass(a: PointRef) -> PointMass:
    return PointMass(a)


def radon_from_weights(w) -> Radon:
    return Radon(w)


def uniform_radon(n: int, total: float = 1.0) -> Radon:
    return Radon(np.full((n, n), total / (n * n)))


def indicator_dtm(D: Region) -> IndicatorDTM:
    return IndicatorDTM(D)


def combine(terms) -> Combination:
    return Combination(terms)


def norm(m: DTMEvaluator) -> float:
    return m._eval_bits(full_bits(m.n), COMPACT)


def annihilates_points(m: DTMEvaluator) -> bool:
    """Necessary condition for properness: every single cell has value 0."""
    return all(abs(m._eval_bits(1 << c, COMPACT)) <= 1e-12 for c in range(m.n * m.n))


# --- JSON ------------------------------------------------------------------

_BUILDERS: dict[str, Callable[[dict], DTMEvaluator]] = {}


def register(kind: str):
    def deco(fn):
        _BUILDERS[kind] = fn
        return fn

    return deco


@register("point_mass")
def _pm(obj):
    return PointMass(PointRef(int(obj["n"]), int(obj["cell"])))


@register("radon")
def _radon(obj):
    n = int(obj["n"])
    if obj.get("uniform"):
        return uniform_radon(n, float(obj.get("total", 1.0)))
    return Radon(np.asarray(obj["weights"], dtype=float).reshape(n, n))


@register("indicator")
def _ind(obj):
    return IndicatorDTM(Region.from_cells(int(obj["n"]), obj["cells"], COMPACT))


@register("combine")
def _comb(obj):
    return Combination([(t["coef"], evaluator_from_json(t["measure"])) for t in obj["terms"]])


def evaluator_from_json(obj) -> DTMEvaluator:
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("type")
    if kind == "solid_extension" and kind not in _BUILDERS:
        from . import solid  # noqa: F401  registers the builder
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise ContractError(f"unknown evaluator type {kind!r}") from None
    return builder(obj)


# --- verification ----------------------------------------------------------


@dataclass(frozen=True)
class Budget:
    """How many regions a verifier looks at.

    ``exhaustive`` enumerates every cell subset in both kinds (n <= 4 only);
    ``sampled`` draws ``count`` random regions/pairs from ``seed`` and always
    adds singletons and their complements; ``panel`` uses the given cell sets.
    """

    mode: str = "exhaustive"
    count: int = 10_000
    seed: int = 0
    regions: tuple[int, ...] = ()

    @classmethod
    def exhaustive(cls):
        return cls("exhaustive")

    @classmethod
    def sampled(cls, count: int = 10_000, seed: int = 0):
        return cls("sampled", count=count, seed=seed)

    @classmethod
    def panel(cls, regions, seed: int = 0):
        bits = tuple(r.bits if isinstance(r, Region) else int(r) for r in regions)
        return cls("panel", seed=seed, regions=bits)

    def describe(self) -> dict:
        out = {"mode": self.mode}
        if self.mode == "sampled":
            out.update(count=self.count, seed=self.seed)
        if self.mode == "panel":
            out.update(regions=len(self.regions))
        return out


@dataclass
class AxiomReport:
    axiom: str
    verdict: str
    witness: tuple | None
    margin: float
    sets_checked: int
    seed: int | None = None
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        wit = None
        if self.witness is not None:
            wit = [w.to_json() if isinstance(w, Region) else w for w in self.witness]
        out = {
            "axiom": self.axiom,
            "verdict": self.verdict,
            "witness": wit,
            "margin": self.margin,
            "sets_checked": self.sets_checked,
            "seed": self.seed,
        }
        if self.note:
            out["note"] = self.note
        return out


class _Slack:
    """Running minimum of signed slacks; keeps the first witness past tolerance."""

    def __init__(self, axiom: str, tol: float = TOL):
        self.axiom = axiom
        self.tol = tol
        self.margin = float("inf")
        self.witness = None
        self.count = 0
        self.note = ""

    def add(self, slack: float, witness: Callable[[], tuple]):
        self.count += 1
        if slack < self.margin:
            self.margin = float(slack)
        if slack < -self.tol and self.witness is None:
            self.witness = witness()

    def add_array(self, slack: np.ndarray, witness: Callable[[int], tuple]):
        if slack.size == 0:
            return
        self.count += int(slack.size)
        lo = float(slack.min())
        self.margin = min(self.margin, lo)
        if lo < -self.tol and self.witness is None:
            self.witness = witness(int(np.argmax(slack < -self.tol)))

    def report(self, seed=None) -> AxiomReport:
        margin = 0.0 if self.count == 0 else self.margin
        verdict = "fail" if self.witness is not None else "pass"
        return AxiomReport(self.axiom, verdict, self.witness, margin, self.count, seed, self.note)


def _reg(n, bits, kind):
    return Region(n, int(bits), kind)


@lru_cache(maxsize=8)
def _all_masks(n: int) -> np.ndarray:
    if n > EXHAUSTIVE_MAX_N:
        raise ContractError(f"exhaustive budget is only legal for n <= {EXHAUSTIVE_MAX_N}")
    return np.arange(1 << (n * n), dtype=np.int64)


@lru_cache(maxsize=8)
def _grow_erode_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    masks = _all_masks(n)
    grow = np.array([grow8(int(s), n) for s in masks], dtype=np.int64)
    ero = np.array([erode8(int(s), n) for s in masks], dtype=np.int64)
    return grow, ero


@lru_cache(maxsize=8)
def _approximant_tables(n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Refined inner approximants of opens and outer approximants of compacts."""
    m = n * REFINE
    blocks = [refine_bits(1 << c, n, REFINE) for c in range(n * n)]
    inner, outer = [], []
    for s in range(1 << (n * n)):
        fine = 0
        for c in bits_to_cells(s):
            fine |= blocks[c]
        inner.append(erode8(fine, m))
        outer.append(grow8(fine, m))
    return tuple(inner), tuple(outer)


@lru_cache(maxsize=8)
def _mask_tuple(n: int) -> tuple[int, ...]:
    return tuple(range(1 << (n * n)))


class _Values:
    """Memoized evaluator values keyed by (bits, kind)."""

    def __init__(self, m: DTMEvaluator):
        self.m = m
        self._cache: dict[tuple[int, Kind], float] = {}

    def __call__(self, bits: int, kind: Kind) -> float:
        key = (bits, kind)
        v = self._cache.get(key)
        if v is None:
            v = self._cache[key] = self.m._eval_bits(bits, kind)
        return v


def value_tables(m: DTMEvaluator) -> tuple[np.ndarray, np.ndarray]:
    """Values of ``m`` on every cell subset, compact and open (n <= 4).

    Memoized on the evaluator; evaluators are treated as immutable.
    """
    cached = getattr(m, "_value_tables", None)
    if cached is not None:
        return cached
    masks = _all_masks(m.n)
    vc = m._eval_many(_mask_tuple(m.n), COMPACT)
    vo = m._eval_many(_mask_tuple(m.n), OPEN)
    vc.flags.writeable = vo.flags.writeable = False
    m._value_tables = (vc, vo)
    return vc, vo


@lru_cache(maxsize=8)
def _disjoint_pair_blocks(nbits: int) -> tuple[np.ndarray, np.ndarray]:
    """All ordered pairs (s, t) of disjoint subsets of ``nbits`` bits."""
    s = np.zeros(1, dtype=np.int64)
    t = np.zeros(1, dtype=np.int64)
    for b in range(nbits):
        bit = np.int64(1 << b)
        s = np.concatenate([s, s | bit, s])
        t = np.concatenate([t, t, t | bit])
    return s, t


def disjoint_pairs(nbits: int, chunk_bits: int = 8) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield all disjoint pairs of subsets of ``nbits`` bits in vectorized chunks."""
    lo = min(nbits, chunk_bits)
    ls, lt = _disjoint_pair_blocks(lo)
    hi = nbits - lo
    if hi == 0:
        yield ls, lt
        return
    hs, ht = _disjoint_pair_blocks(hi)
    step = max(1, 600_000 // ls.size)
    for k in range(0, hs.size, step):
        a = (hs[k : k + step, None] << lo) | ls[None, :]
        b = (ht[k : k + step, None] << lo) | lt[None, :]
        yield a.ravel(), b.ravel()


def _regularity_reference(m: DTMEvaluator):
    try:
        return m.refine(REFINE)
    except NotImplementedError:
        return None


def _dtm_exhaustive(m: DTMEvaluator, tol: float) -> list[AxiomReport]:
    n = m.n
    full = full_bits(n)
    vc, vo = value_tables(m)
    grow, ero = _grow_erode_tables(n)
    masks = _all_masks(n)

    # (DTM1): additivity over disjoint compacts. Disjoint compact cell sets are
    # exactly 8-separated ones, so with v(empty) = 0 additivity on all pairs is
    # equivalent to v(K) = sum over the 8-components of K.
    dtm1 = _Slack("DTM1", tol)
    dtm1.add(-abs(vc[0]), lambda: (_reg(n, 0, COMPACT), _reg(n, 0, COMPACT)))
    for s in range(1, masks.size):
        comps = component_bits(s, n, True)
        if len(comps) < 2:
            continue
        total = sum(vc[c] for c in comps)
        dtm1.add(
            -abs(vc[s] - total),
            lambda s=s, c=comps: (_reg(n, c[0], COMPACT), _reg(n, s ^ c[0], COMPACT)),
        )

    # (DTM2)/(DTM3): coarse one-sided bounds plus equality with refined approximants
    ref = _regularity_reference(m)
    dtm2 = _Slack("DTM2", tol)
    dtm3 = _Slack("DTM3", tol)
    dtm2.add_array(vo - vc[ero], lambda i: (_reg(n, i, OPEN), _reg(n, ero[i], COMPACT)))
    dtm3.add_array(vo[grow] - vc, lambda i: (_reg(n, i, COMPACT), _reg(n, grow[i], OPEN)))
    if ref is not None:
        inner, outer = _approximant_tables(n)
        fine_c = ref._eval_many(inner, COMPACT)
        fine_o = ref._eval_many(outer, OPEN)
        dtm2.add_array(
            -np.abs(vo - fine_c),
            lambda i: (_reg(n, i, OPEN), _reg(n * REFINE, inner[i], COMPACT)),
        )
        dtm3.add_array(
            -np.abs(vc - fine_o),
            lambda i: (_reg(n, i, COMPACT), _reg(n * REFINE, outer[i], OPEN)),
        )
    else:
        dtm2.note = dtm3.note = "coarse bounds only: evaluator has no refined realization"

    mono = _Slack("monotone", tol)
    for b in range(n * n):
        has = masks[(masks >> b) & 1 == 1]
        for vals, kind in ((vc, COMPACT), (vo, OPEN)):
            mono.add_array(
                vals[has] - vals[has ^ (1 << b)],
                lambda i, has=has, b=b, kind=kind: (
                    _reg(n, has[i] ^ (1 << b), kind),
                    _reg(n, has[i], kind),
                ),
            )
    mono.add_array(vc - vo, lambda i: (_reg(n, i, OPEN), _reg(n, i, COMPACT)))

    sup = _Slack("superadditive", tol)
    for s, t in disjoint_pairs(n * n):
        u = s | t
        sup.add_array(
            vo[u] - vo[s] - vo[t],
            lambda i, s=s, t=t, u=u: (_reg(n, s[i], OPEN), _reg(n, t[i], OPEN), _reg(n, u[i], OPEN)),
        )
        sup.add_array(
            vc[u] - vc[s] - vo[t],
            lambda i, s=s, t=t, u=u: (
                _reg(n, s[i], COMPACT),
                _reg(n, t[i], OPEN),
                _reg(n, u[i], COMPACT),
            ),
        )
        g = grow[s] | t
        sup.add_array(
            vo[g] - vc[s] - vo[t],
            lambda i, s=s, t=t, g=g: (
                _reg(n, s[i], COMPACT),
                _reg(n, t[i], OPEN),
                _reg(n, g[i], OPEN),
            ),
        )
    del full
    return [dtm1.report(), dtm2.report(), dtm3.report(), mono.report(), sup.report()]


def _random_subset(rng: random.Random, pool_bits: int) -> int:
    if not pool_bits:
        return 0
    p = rng.random()
    out = 0
    for c in bits_to_cells(pool_bits):
        if rng.random() < p:
            out |= 1 << c
    return out


def _blob(rng: random.Random, n: int, pool_bits: int) -> int:
    """A random connected-ish blob grown from a seed cell inside ``pool_bits``."""
    cells = bits_to_cells(pool_bits)
    if not cells:
        return 0
    b = 1 << rng.choice(cells)
    for _ in range(rng.randrange(0, 3 * n)):
        grown = grow8(b, n) & pool_bits & ~b
        cand = bits_to_cells(grown)
        if not cand:
            break
        b |= 1 << rng.choice(cand)
    return b


def sample_regions(n: int, budget: Budget) -> list[int]:
    """Deterministic cell-set pool for sampled and panel budgets."""
    if budget.mode == "panel":
        return list(dict.fromkeys(budget.regions))
    rng = random.Random(budget.seed)
    full = full_bits(n)
    pool = [0, full]
    for c in range(n * n):
        pool += [1 << c, full ^ (1 << c)]
    while len(pool) < budget.count:
        pool.append(_blob(rng, n, full) if rng.random() < 0.5 else _random_subset(rng, full))
    return list(dict.fromkeys(pool))[: max(budget.count, 4 * n * n + 2)]


def _pairs(n: int, pool: list[int], budget: Budget, disjoint: bool) -> Iterator[tuple[int, int]]:
    if budget.mode == "panel":
        for i, s in enumerate(pool):
            for t in pool[i:]:
                if not disjoint or not s & t:
                    yield s, t
        return
    rng = random.Random(budget.seed + 1)
    full = full_bits(n)
    for s in pool:
        if disjoint:
            rest = full & ~s
            yield s, _blob(rng, n, rest) if rng.random() < 0.5 else _random_subset(rng, rest)
        else:
            yield s, pool[rng.randrange(len(pool))]


def _dtm_sampled(m: DTMEvaluator, budget: Budget, tol: float) -> list[AxiomReport]:
    n = m.n
    v = _Values(m)
    pool = sample_regions(n, budget)
    ref = _regularity_reference(m)
    fine_n = n * REFINE
    rng = random.Random(budget.seed + 2)

    dtm1 = _Slack("DTM1", tol)
    dtm1.add(-abs(v(0, COMPACT)), lambda: (_reg(n, 0, COMPACT), _reg(n, 0, COMPACT)))
    dtm2 = _Slack("DTM2", tol)
    dtm3 = _Slack("DTM3", tol)
    mono = _Slack("monotone", tol)
    sup = _Slack("superadditive", tol)
    if ref is None:
        dtm2.note = dtm3.note = "coarse bounds only: evaluator has no refined realization"

    for s in pool:
        comps = component_bits(s, n, True)
        if len(comps) > 1:
            total = sum(v(c, COMPACT) for c in comps)
            dtm1.add(
                -abs(v(s, COMPACT) - total),
                lambda s=s, c=comps: (_reg(n, c[0], COMPACT), _reg(n, s ^ c[0], COMPACT)),
            )
        e, g = erode8(s, n), grow8(s, n)
        dtm2.add(v(s, OPEN) - v(e, COMPACT), lambda s=s, e=e: (_reg(n, s, OPEN), _reg(n, e, COMPACT)))
        dtm3.add(v(g, OPEN) - v(s, COMPACT), lambda s=s, g=g: (_reg(n, s, COMPACT), _reg(n, g, OPEN)))
        if ref is not None:
            fine = refine_bits(s, n, REFINE)
            fi, fo = erode8(fine, fine_n), grow8(fine, fine_n)
            dtm2.add(
                -abs(v(s, OPEN) - ref._eval_bits(fi, COMPACT)),
                lambda s=s, fi=fi: (_reg(n, s, OPEN), _reg(fine_n, fi, COMPACT)),
            )
            dtm3.add(
                -abs(v(s, COMPACT) - ref._eval_bits(fo, OPEN)),
                lambda s=s, fo=fo: (_reg(n, s, COMPACT), _reg(fine_n, fo, OPEN)),
            )
        mono.add(v(s, COMPACT) - v(s, OPEN), lambda s=s: (_reg(n, s, OPEN), _reg(n, s, COMPACT)))
        if s:
            sub = s & ~(1 << rng.choice(bits_to_cells(s)))
            for kind in (COMPACT, OPEN):
                mono.add(
                    v(s, kind) - v(sub, kind),
                    lambda s=s, sub=sub, kind=kind: (_reg(n, sub, kind), _reg(n, s, kind)),
                )

    for s, t in _pairs(n, pool, budget, disjoint=True):
        u = s | t
        sup.add(
            v(u, OPEN) - v(s, OPEN) - v(t, OPEN),
            lambda s=s, t=t, u=u: (_reg(n, s, OPEN), _reg(n, t, OPEN), _reg(n, u, OPEN)),
        )
        sup.add(
            v(u, COMPACT) - v(s, COMPACT) - v(t, OPEN),
            lambda s=s, t=t, u=u: (_reg(n, s, COMPACT), _reg(n, t, OPEN), _reg(n, u, COMPACT)),
        )
        # three-member family: the compact, the open, and a compact carved from the open
        inner = erode8(t, n)
        if inner:
            k = _blob(rng, n, inner)
            rest = t & ~grow8(k, n)
            sup.add(
                v(u, COMPACT) - v(s, COMPACT) - v(k, COMPACT) - v(rest, OPEN),
                lambda s=s, k=k, rest=rest, u=u: (
                    _reg(n, s, COMPACT),
                    _reg(n, k, COMPACT),
                    _reg(n, rest, OPEN),
                    _reg(n, u, COMPACT),
                ),
            )
        if not grow8(s, n) & t and s and t:
            dtm1.add(
                -abs(v(u, COMPACT) - v(s, COMPACT) - v(t, COMPACT)),
                lambda s=s, t=t: (_reg(n, s, COMPACT), _reg(n, t, COMPACT)),
            )
    seed = budget.seed if budget.mode == "sampled" else None
    return [r.report(seed) for r in (dtm1, dtm2, dtm3, mono, sup)]


def verify_dtm_axioms(m: DTMEvaluator, budget: Budget | None = None, tol: float = TOL) -> list[AxiomReport]:
    """Check (DTM1)-(DTM3), monotonicity and superadditivity over ``budget``."""
    budget = budget or Budget.exhaustive()
    if budget.mode == "exhaustive":
        return _dtm_exhaustive(m, tol)
    return _dtm_sampled(m, budget, tol)


def verify_tm(m: DTMEvaluator, budget: Budget | None = None, tol: float = TOL) -> AxiomReport:
    """Compact-space TM criterion: v(X) <= v(C) + v(X \\ C) for compact C."""
    budget = budget or Budget.exhaustive()
    n = m.n
    full = full_bits(n)
    vx = m._eval_bits(full, COMPACT)
    rep = _Slack("TM", tol)
    if budget.mode == "exhaustive":
        vc, vo = value_tables(m)
        masks = _all_masks(n)
        rep.add_array(
            vc + vo[full ^ masks] - vx,
            lambda i: (_reg(n, i, COMPACT), _reg(n, full ^ i, OPEN)),
        )
        return rep.report()
    v = _Values(m)
    for s in sample_regions(n, budget):
        rep.add(
            v(s, COMPACT) + v(full ^ s, OPEN) - vx,
            lambda s=s: (_reg(n, s, COMPACT), _reg(n, full ^ s, OPEN)),
        )
    return rep.report(budget.seed if budget.mode == "sampled" else None)


def verify_measure(m: DTMEvaluator, budget: Budget | None = None, tol: float = TOL) -> AxiomReport:
    """Subadditivity on compact pairs and on open pairs whose union is a grid region.

    Open pairs are restricted to 8-separated cell sets: only then is the union
    of the two interiors itself the interior of a cell union.
    """
    budget = budget or Budget.exhaustive()
    n = m.n
    rep = _Slack("measure", tol)
    if budget.mode == "exhaustive":
        vc, vo = value_tables(m)
        grow, _ = _grow_erode_tables(n)
        # by monotonicity the binding compact pairs partition their union
        for s, t in disjoint_pairs(n * n):
            u = s | t
            rep.add_array(
                vc[s] + vc[t] - vc[u],
                lambda i, s=s, t=t: (_reg(n, s[i], COMPACT), _reg(n, t[i], COMPACT)),
            )
            sep = (grow[s] & t) == 0
            rep.add_array(
                (vo[s] + vo[t] - vo[u])[sep],
                lambda i, s=s[sep], t=t[sep]: (_reg(n, s[i], OPEN), _reg(n, t[i], OPEN)),
            )
        return rep.report()
    v = _Values(m)
    pool = sample_regions(n, budget)
    for s, t in _pairs(n, pool, budget, disjoint=False):
        u = s | t
        rep.add(
            v(s, COMPACT) + v(t, COMPACT) - v(u, COMPACT),
            lambda s=s, t=t: (_reg(n, s, COMPACT), _reg(n, t, COMPACT)),
        )
        if not grow8(s, n) & t:
            rep.add(
                v(s, OPEN) + v(t, OPEN) - v(u, OPEN),
                lambda s=s, t=t: (_reg(n, s, OPEN), _reg(n, t, OPEN)),
            )
    return rep.report(budget.seed if budget.mode == "sampled" else None)


@dataclass
class Classification:
    """Where an evaluator sits in the measure / TM / DTM chain at a given budget."""

    dtm: list[AxiomReport]
    tm: AxiomReport
    measure: AxiomReport
    extras: dict = field(default_factory=dict)

    @property
    def is_dtm(self) -> bool:
        return all(r.passed for r in self.dtm)

    def to_json(self) -> dict:
        return {
            "dtm": [r.to_json() for r in self.dtm],
            "tm": self.tm.to_json(),
            "measure": self.measure.to_json(),
            **self.extras,
        }


def classify(m: DTMEvaluator, budget: Budget | None = None) -> Classification:
    return Classification(
        verify_dtm_axioms(m, budget),
        verify_tm(m, budget),
        verify_measure(m, budget),
        {"annihilates_points": annihilates_points(m)},
    )
