"""Distances between deficient topological measures: uniform, Prokhorov, Kantorovich-Rubinstein.

All three are suprema over infinite classes, so each is computed over a finite
family and labeled as a lower bound. The exhaustive set family on grids with
``n <= 4`` is the exception: there every region is visited and the Prokhorov
value is exact up to the ``t`` resolution.

Dilations ``A^t`` collect the cells whose centers lie at distance ``< t`` from
a center of ``A``; their value is taken on the compact cell union, the
outer-regular limit of the open ``t``-neighborhoods. ``A^0`` is ``A`` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .grid import COMPACT, OPEN, ContractError, GridSpace, Region, bits_to_mask, full_bits, mask_to_bits
from .integral import GridFunction, integrate
from .measures import (
    EXHAUSTIVE_MAX_N,
    TOL,
    Budget,
    DTMEvaluator,
    _all_masks,
    norm,
    sample_regions,
    value_tables,
)

LIP_TOL = 1e-9


# --- set families -------------------------------------------------------------------


class SetFamily:
    """Cell sets quantified over by the Prokhorov estimator; each is used in both kinds."""

    def __init__(self, n: int, regions: Sequence[int] = (), mode: str = "generated", params: dict | None = None):
        self.n = int(n)
        self.mode = mode
        self.params = params or {}
        if mode == "exhaustive":
            _all_masks(self.n)  # raises above the size limit
            self.regions: list[int] = []
        else:
            self.regions = list(dict.fromkeys(int(r.bits if isinstance(r, Region) else r) for r in regions))
        self._geometry: list | None = None

    @classmethod
    def exhaustive(cls, n: int) -> "SetFamily":
        if n > EXHAUSTIVE_MAX_N:
            raise ContractError(f"exhaustive family needs n <= {EXHAUSTIVE_MAX_N}")
        return cls(n, mode="exhaustive")

    @classmethod
    def generated(cls, n: int, seed: int = 0, count: int = 500) -> "SetFamily":
        return cls(n, sample_regions(n, Budget.sampled(count, seed)), "generated", {"seed": seed, "count": count})

    @classmethod
    def structured(cls, n: int, stride: int | None = None, radii_cells=(2, 4, 8, 16)) -> "SetFamily":
        """Every single cell, cell balls on a lattice, and axis half-planes with their complements."""
        space = GridSpace(n)
        stride = stride or max(1, n // 16)
        regs = [1 << c for c in range(n * n)]
        centers = space.centers()
        for i in range(0, n, stride):
            for j in range(0, n, stride):
                c = centers[space.cell(i, j)]
                d = np.hypot(centers[:, 0] - c[0], centers[:, 1] - c[1])
                for r in radii_cells:
                    if r < n:
                        regs.append(mask_to_bits(d <= r * space.cell_width + 1e-12))
        full = full_bits(n)
        for k in range(stride, n, stride):
            rows = mask_to_bits(np.arange(n * n) // n < k)
            cols = mask_to_bits(np.arange(n * n) % n < k)
            regs += [rows, full ^ rows, cols, full ^ cols]
        return cls(n, regs, "structured", {"stride": stride, "radii_cells": list(radii_cells)})

    @classmethod
    def panel(cls, regions: Sequence, n: int | None = None) -> "SetFamily":
        regions = list(regions)
        if n is None:
            n = regions[0].n
        return cls(n, regions, "panel")

    def __len__(self) -> int:
        return (1 << (self.n * self.n)) if self.mode == "exhaustive" else len(self.regions)

    def union(self, other: "SetFamily") -> "SetFamily":
        if self.mode == "exhaustive" or other.mode == "exhaustive":
            return SetFamily.exhaustive(self.n)
        return SetFamily(self.n, self.regions + other.regions, "panel")

    @property
    def is_exact(self) -> bool:
        return self.mode == "exhaustive"

    def geometry(self):
        """Per region: distinct squared center distances (cell units) and the level-set cell masks."""
        if self._geometry is None:
            self._geometry = [_region_geometry(b, self.n) for b in self.regions]
        return self._geometry

    def to_json(self) -> dict:
        return {"mode": self.mode, "n": self.n, "size": len(self), **self.params}


def _region_geometry(bits: int, n: int):
    mask = bits_to_mask(bits, n)
    if not mask.any():
        return None
    d = ndimage.distance_transform_edt(~mask)
    q = np.rint(d * d).astype(np.int64)
    levels = np.unique(q)
    return q, levels


def _t_grid(resolution: float, t_max: float) -> np.ndarray:
    k = int(math.ceil(t_max / resolution - 1e-9))
    return resolution * np.arange(k + 1)


def _first_above(levels_q: np.ndarray, tgrid: np.ndarray, n: int) -> np.ndarray:
    """Index of the smallest grid t whose open dilation reaches squared cell distance q."""
    reach = (tgrid * n) ** 2 - 1e-12
    return np.searchsorted(reach, levels_q, side="right")


def _ceil_index(x: np.ndarray, resolution: float) -> np.ndarray:
    return np.maximum(0, np.ceil(np.asarray(x) / resolution - 1e-9)).astype(np.int64)


@dataclass
class DistanceResult:
    value: float
    mode: str
    binding_witness: dict | None
    resolution: float | None = None

    def to_json(self) -> dict:
        out = {"value": self.value, "mode": self.mode, "binding_witness": self.binding_witness}
        if self.resolution is not None:
            out["resolution"] = self.resolution
        return out

    def __float__(self):
        return float(self.value)


# --- Prokhorov ----------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _dilation_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Squared-distance levels and, per level, the compact dilation of every cell subset."""
    masks = _all_masks(n)
    offs = [(di, dj) for di in range(-n + 1, n) for dj in range(-n + 1, n)]
    levels = np.array(sorted({di * di + dj * dj for di, dj in offs}), dtype=np.int64)
    cols = np.arange(n * n) % n
    table = np.zeros((masks.size, levels.size), dtype=np.int64)
    acc = np.zeros(masks.size, dtype=np.int64)
    for li, q in enumerate(levels):
        for di, dj in offs:
            if di * di + dj * dj != q:
                continue
            keep = 0
            for c in range(n * n):
                if 0 <= cols[c] + dj < n and 0 <= c // n + di < n:
                    keep |= 1 << c
            shifted = masks & keep
            k = di * n + dj
            acc = acc | ((shifted << k) if k >= 0 else (shifted >> -k))
        table[:, li] = acc & full_bits(n)
    return levels, table


def _needed(
    mass: np.ndarray, other_dil: np.ndarray, first_idx: np.ndarray, resolution: float, t_len: int
) -> tuple[np.ndarray, np.ndarray]:
    """Smallest t-grid index with ``mass <= other(A^t) + t``, per row, and the binding level."""
    cand = np.maximum(first_idx[None, :], _ceil_index(mass[:, None] - other_dil, resolution))
    cand = np.minimum(cand, t_len - 1)
    j = np.argmin(cand, axis=1)
    return cand[np.arange(cand.shape[0]), j], j


def _prokhorov_exhaustive(mu, nu, resolution):
    n = mu.n
    levels, table = _dilation_table(n)
    tgrid = _t_grid(resolution, norm(mu) + norm(nu))
    first = _first_above(levels, tgrid, n)
    first[0] = 0
    best, wit = -1, None
    tables = {id(mu): value_tables(mu), id(nu): value_tables(nu)}
    for a, b, label in ((mu, nu, "mu<=nu"), (nu, mu, "nu<=mu")):
        ac, ao = tables[id(a)]
        bc, _ = tables[id(b)]
        other = bc[table]
        for vals, kind in ((ac, COMPACT), (ao, OPEN)):
            idx, lev = _needed(vals, other, first, resolution, len(tgrid))
            s = int(np.argmax(idx))
            if idx[s] > best:
                best = int(idx[s])
                wit = {
                    "region": Region(n, s, kind).to_json(),
                    "direction": label,
                    "t": float(tgrid[best]),
                    "dilation_level": float(math.sqrt(levels[lev[s]])) / n,
                }
    return DistanceResult(float(tgrid[best]), "exact", wit, resolution)


def _profile_values(m: DTMEvaluator, q: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """``m`` on the compact sets ``{q <= level}`` for every level."""
    g = -q.astype(float)
    glev = -levels[::-1].astype(float)
    prof = m.level_profile(g, glev)
    if prof is not None:
        return np.asarray(prof[2], dtype=float)[::-1]
    flat = q.ravel()
    return np.array([m._eval_bits(mask_to_bits(flat <= lv), COMPACT) for lv in levels])


def _prokhorov_family(mu, nu, fam: SetFamily, resolution):
    n = mu.n
    tgrid = _t_grid(resolution, norm(mu) + norm(nu))
    best, wit = 0, None
    for bits, geo in zip(fam.regions, fam.geometry()):
        if geo is None:
            continue
        q, levels = geo
        first = _first_above(levels, tgrid, n)
        first[0] = 0
        for a, b, label in ((mu, nu, "mu<=nu"), (nu, mu, "nu<=mu")):
            other = _profile_values(b, q, levels)[None, :]
            for kind in (COMPACT, OPEN):
                mass = np.array([a._eval_bits(bits, kind)])
                idx, _ = _needed(mass, other, first, resolution, len(tgrid))
                if wit is None or idx[0] > best:
                    best = int(idx[0])
                    wit = {"region": Region(n, bits, kind).to_json(), "direction": label, "t": float(tgrid[best])}
    return DistanceResult(float(tgrid[best]), "family-restricted lower bound", wit, resolution)


def prokhorov(
    mu: DTMEvaluator,
    nu: DTMEvaluator,
    fam: SetFamily | str | None = None,
    resolution: float | None = None,
) -> DistanceResult:
    """Smallest grid ``t`` with ``mu(A) <= nu(A^t) + t`` and ``nu(A) <= mu(A^t) + t`` over ``fam``.

    The t-grid is ``{0, res, 2 res, ..., |mu| + |nu|}``; default ``res`` is a
    quarter cell width.
    """
    if mu.n != nu.n:
        raise ContractError("measures on different grids")
    n = mu.n
    if fam is None:
        fam = "exhaustive" if n <= EXHAUSTIVE_MAX_N else "structured"
    if isinstance(fam, str):
        fam = {"exhaustive": SetFamily.exhaustive, "structured": SetFamily.structured, "generated": SetFamily.generated}[
            fam
        ](n)
    resolution = resolution or GridSpace(n).cell_width / 4
    if resolution <= 0:
        raise ContractError("resolution must be positive")
    if fam.is_exact:
        return _prokhorov_exhaustive(mu, nu, resolution)
    return _prokhorov_family(mu, nu, fam, resolution)


def prokhorov_reference(mu, nu, resolution: float | None = None) -> float:
    """Definition scan over the t-grid and every region, one ``dilate`` call at a time (n <= 3)."""
    from .grid import dilate_bits

    n = mu.n
    if n > 3:
        raise ContractError("reference scan is for n <= 3")
    resolution = resolution or GridSpace(n).cell_width / 4
    tgrid = _t_grid(resolution, norm(mu) + norm(nu))
    worst = 0.0
    for s in range(1 << (n * n)):
        for kind in (COMPACT, OPEN):
            for t in tgrid:
                dil = s if t == 0 else dilate_bits(s, n, float(t))
                ok = mu._eval_bits(s, kind) <= nu._eval_bits(dil, COMPACT) + t + 1e-12 and nu._eval_bits(
                    s, kind
                ) <= mu._eval_bits(dil, COMPACT) + t + 1e-12
                if ok:
                    worst = max(worst, float(t))
                    break
    return worst


# --- uniform and KR ---------------------------------------------------------------------


def _signed_integral(m: DTMEvaluator, f: GridFunction) -> float:
    """``int f+ dm - int f- dm``."""
    if f.is_nonnegative():
        return integrate(m, f)
    return integrate(m, f.pos()) - integrate(m, f.neg())


def d_uniform(mu: DTMEvaluator, nu: DTMEvaluator, panel: Sequence[GridFunction]) -> DistanceResult:
    """max over the panel of ``|int f dmu - int f dnu|`` for nonnegative ``f`` with sup norm at most 1."""
    best, wit = 0.0, None
    for i, f in enumerate(panel):
        if not f.is_nonnegative() or f.sup_norm() > 1 + 1e-12:
            raise ContractError(f"panel function {i} must be nonnegative with sup norm <= 1")
        gap = abs(integrate(mu, f) - integrate(nu, f))
        if wit is None or gap > best:
            best, wit = gap, {"function": i}
    return DistanceResult(best, "family-restricted lower bound", wit)


class LipFamily:
    """Functions checked at construction to be 1-Lipschitz in center distance with sup norm <= 1."""

    def __init__(self, functions: Sequence[GridFunction], labels: Sequence[str] | None = None, verify: bool = True):
        self.functions = list(functions)
        if not self.functions:
            raise ContractError("Lipschitz family must be nonempty")
        self.labels = list(labels) if labels is not None else [f"f{i}" for i in range(len(self.functions))]
        ns = {f.n for f in self.functions}
        if len(ns) != 1:
            raise ContractError("family functions must share one grid")
        self.n = ns.pop()
        if verify:
            for f, lab in zip(self.functions, self.labels):
                if f.sup_norm() > 1 + LIP_TOL:
                    raise ContractError(f"{lab}: sup norm {f.sup_norm()} exceeds 1")
                lip = f.lipschitz_constant()
                if lip > 1 + LIP_TOL:
                    raise ContractError(f"{lab}: Lipschitz constant {lip} exceeds 1")

    def __len__(self):
        return len(self.functions)

    def union(self, other: "LipFamily") -> "LipFamily":
        return LipFamily(self.functions + other.functions, self.labels + other.labels, verify=False)

    @classmethod
    def clamped_cones(cls, n: int, centers: Sequence[int] | None = None, shifts=(0.0, 0.125, 0.25, 0.5, 1.0)):
        """``clip(d(., b) - s, -1, 1)`` for every center ``b`` and shift ``s``, plus the constants 1 and -1."""
        space = GridSpace(n)
        if centers is None:
            stride = max(1, n // 8)
            centers = [space.cell(i, j) for i in range(0, n, stride) for j in range(0, n, stride)]
        fns, labels = [GridFunction.constant(n, 1.0), GridFunction.constant(n, -1.0)], ["+1", "-1"]
        for b in centers:
            for s in shifts:
                fns.append(GridFunction.clamped_distance(n, b, s))
                labels.append(f"clamp(d(.,{b})-{s:g})")
        return cls(fns, labels)

    @classmethod
    def pair_witnesses(cls, n: int, pairs: Sequence[tuple[int, int]]):
        """The clamped cone ``clip(d(., b) - d(a, b) / 2, -1, 1)`` for each pair ``(a, b)``."""
        space = GridSpace(n)
        fns, labels = [], []
        for a, b in pairs:
            fns.append(GridFunction.clamped_distance(n, b, space.distance(a, b) / 2))
            labels.append(f"witness({a},{b})")
        return cls(fns, labels)


def kr(mu: DTMEvaluator, nu: DTMEvaluator, fam: LipFamily) -> DistanceResult:
    """max over the family of ``|rho_mu(f) - rho_nu(f)|`` with ``rho(f) = int f+ - int f-``."""
    best, wit = 0.0, None
    for f, lab in zip(fam.functions, fam.labels):
        gap = abs(_signed_integral(mu, f) - _signed_integral(nu, f))
        if wit is None or gap > best:
            best, wit = gap, {"function": lab}
    return DistanceResult(best, "family-restricted lower bound", wit)


# --- axiom suite ----------------------------------------------------------------------------


@dataclass
class MetricCheck:
    axiom: str
    passed: bool = True
    checked: int = 0
    witness: object = None
    margin: float = math.inf

    def add(self, slack: float, witness, tol: float = TOL):
        self.checked += 1
        self.margin = min(self.margin, slack)
        if slack < -tol and self.passed:
            self.passed, self.witness = False, witness

    def to_json(self):
        return {
            "axiom": self.axiom,
            "passed": self.passed,
            "checked": self.checked,
            "witness": self.witness,
            "margin": None if self.checked == 0 else self.margin,
        }


@dataclass
class MetricReport:
    checks: list[MetricCheck]
    distances: list[list[float]] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(not c.passed for c in self.checks)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def __getitem__(self, axiom):
        return next(c for c in self.checks if c.axiom == axiom)

    def to_json(self):
        return {"passed": self.passed, "checks": [c.to_json() for c in self.checks], "distances": self.distances}


def metric_axiom_suite(
    dist: Callable[[DTMEvaluator, DTMEvaluator], float],
    pool: Sequence[DTMEvaluator],
    exhaustive: bool = False,
    tol: float = TOL,
) -> MetricReport:
    """Nonnegativity, zero self-distance, symmetry, triangle; identity of indiscernibles when ``exhaustive``."""
    pool = list(pool)
    k = len(pool)
    d = [[float(dist(pool[i], pool[j])) for j in range(k)] for i in range(k)]
    nonneg, zero, sym, tri = (MetricCheck(a) for a in ("nonnegative", "zero_self", "symmetric", "triangle"))
    ident = MetricCheck("identity")
    for i in range(k):
        zero.add(-abs(d[i][i]), [i])
        for j in range(k):
            nonneg.add(d[i][j], [i, j])
            sym.add(-abs(d[i][j] - d[j][i]), [i, j])
            for m in range(k):
                tri.add(d[i][m] + d[m][j] - d[i][j], [i, m, j])
            if exhaustive and i < j and d[i][j] == 0:
                vi, _ = value_tables(pool[i])
                vj, _ = value_tables(pool[j])
                gap = float(np.abs(vi - vj).max())
                ident.add(-gap, [i, j])
    checks = [nonneg, zero, sym, tri]
    if exhaustive:
        checks.append(ident)
    return MetricReport(checks, d)


# --- convergence link ---------------------------------------------------------------------


@dataclass
class LinkReport:
    metric: str
    distances: list[float]
    vanishing: bool
    verdict: str
    crosscheck: object
    variation_bound: float | None = None

    def decay_slope(self, start: int = 1) -> float | None:
        k = np.arange(len(self.distances))
        r = np.asarray(self.distances)
        keep = (k >= start) & (r > 0)
        if keep.sum() < 2:
            return None
        return float(np.polyfit(np.log(k[keep] + 1.0), np.log(r[keep]), 1)[0])

    def to_json(self):
        return {
            "metric": self.metric,
            "distances": self.distances,
            "vanishing": self.vanishing,
            "verdict": self.verdict,
            "variation_bound": self.variation_bound,
            "crosscheck": self.crosscheck.to_json(),
        }


def convergence_link(
    s,
    which: str,
    cfg,
    family=None,
    resolution: float | None = None,
    variation_limit: float | None = None,
) -> LinkReport:
    """Distances to the limit along the sequence, then the weak-convergence crosscheck.

    Verdict ``confirmed`` when distances vanish on the tail and every
    condition converges; ``hypothesis unmet`` when distances do not vanish;
    ``anomaly`` when distances vanish but some condition is violated.
    """
    from .convergence import CONVERGED, crosscheck
    from .families import MeasureFamily, variation_bound

    which = which.upper()
    bound = None
    if which == "KR":
        bound = variation_bound(MeasureFamily(list(s), s.name))
        cap = variation_limit if variation_limit is not None else 4 * max(1.0, norm(s.limit))
        if not math.isfinite(bound) or bound > cap:
            raise ContractError(f"variation bound missing: sup of norms {bound} exceeds {cap}")
        fam = family or LipFamily.clamped_cones(s.n)
        dists = [kr(mu, s.limit, fam).value for mu in s]
    elif which == "P":
        fam = family or ("exhaustive" if s.n <= EXHAUSTIVE_MAX_N else SetFamily.structured(s.n))
        dists = [prokhorov(mu, s.limit, fam, resolution).value for mu in s]
    else:
        raise ContractError(f"unknown metric {which!r}; use P or KR")
    tail = dists[cfg.tail_start(len(dists)) :]
    vanishing = len(tail) >= 2 and max(tail) <= cfg.epsilon
    cc = crosscheck(s, cfg)
    all_conv = all(c.verdict == CONVERGED for c in cc.conditions.values())
    if not vanishing:
        verdict = "hypothesis unmet"
    elif all_conv and not cc.anomalies:
        verdict = "confirmed"
    else:
        verdict = "anomaly"
    return LinkReport(which, dists, vanishing, verdict, cc, bound)
