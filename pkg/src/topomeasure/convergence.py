"""Finite-horizon checks of the equivalent weak-convergence conditions.

A :class:`MeasureSequence` produces evaluators ``mu_0, mu_1, ...`` and names
a candidate limit. Each checker computes, per index, the worst residual over
a :class:`TestConfig` panel, then judges the tail (by default the last half
of the horizon): liminf / limsup are approximated by tail extrema. This is
evidence, not proof, and reports say so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import COMPACT, OPEN, ContractError, GridSpace, PointRef, Region, ball, full_bits, grow8
from .integral import GridFunction, integrate, r1, r2
from .measures import DTMEvaluator, IndicatorDTM, PointMass, combine, norm, point_mass

CONTINUITY_TOL = 1e-12
CONVERGED, VIOLATED, INCONCLUSIVE = "converged", "violated", "inconclusive"


def mu_continuity(m: DTMEvaluator, r: Region) -> bool:
    """True iff the closure and the interior of ``r`` get the same value."""
    if not r.bits:
        return True
    return abs(m._eval_bits(r.bits, COMPACT) - m._eval_bits(r.bits, OPEN)) <= CONTINUITY_TOL


class MeasureSequence:
    """Evaluators indexed ``0 .. horizon - 1`` with a candidate limit.

    ``generator`` must be a pure function of the index; members are cached.
    """

    def __init__(
        self,
        generator: Callable[[int], DTMEvaluator],
        limit: DTMEvaluator,
        horizon: int,
        name: str = "sequence",
        params: dict | None = None,
    ):
        if horizon < 1:
            raise ContractError("horizon must be positive")
        self.generator = generator
        self.limit = limit
        self.horizon = int(horizon)
        self.name = name
        self.params = params or {}
        self._members: dict[int, DTMEvaluator] = {}

    def __getitem__(self, k: int) -> DTMEvaluator:
        if not 0 <= k < self.horizon:
            raise IndexError(k)
        if k not in self._members:
            self._members[k] = self.generator(k)
        return self._members[k]

    def __len__(self) -> int:
        return self.horizon

    def __iter__(self):
        return (self[k] for k in range(self.horizon))

    @property
    def n(self) -> int:
        return self.limit.n

    def to_json(self) -> dict:
        return {"type": self.name, "horizon": self.horizon, **self.params}


@dataclass
class TestConfig:
    functions: list[GridFunction]
    opens: list[Region]
    compacts: list[Region]
    epsilon: float = 1e-3
    tail_fraction: float = 0.5

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not self.functions or not self.opens or not self.compacts:
            raise ContractError("test panels must be nonempty")
        if not 0 < self.tail_fraction <= 1:
            raise ContractError("tail fraction must lie in (0, 1]")
        self.opens = [r.with_kind(OPEN) for r in self.opens]
        self.compacts = [r.with_kind(COMPACT) for r in self.compacts]

    def with_epsilon(self, eps: float) -> "TestConfig":
        return TestConfig(self.functions, self.opens, self.compacts, eps, self.tail_fraction)

    def tail_start(self, horizon: int) -> int:
        return horizon - int(math.floor(horizon * self.tail_fraction))

    def to_json(self) -> dict:
        return {
            "functions": len(self.functions),
            "opens": len(self.opens),
            "compacts": len(self.compacts),
            "epsilon": self.epsilon,
            "tail_fraction": self.tail_fraction,
        }


@dataclass
class ConditionReport:
    condition: str
    verdict: str
    epsilon: float
    index: int | None
    witness: dict | None
    margin: float
    residuals: list[float]
    note: str = "tail extrema approximate liminf/limsup over a finite horizon"

    def decay_slope(self, start: int = 1) -> float | None:
        """Least-squares slope of log residual against log(k + 1)."""
        k = np.arange(len(self.residuals))
        r = np.asarray(self.residuals)
        keep = (k >= start) & (r > 0)
        if keep.sum() < 2:
            return None
        return float(np.polyfit(np.log(k[keep] + 1.0), np.log(r[keep]), 1)[0])

    def to_json(self) -> dict:
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "epsilon": self.epsilon,
            "index": self.index,
            "witness": self.witness,
            "margin": self.margin,
            "residuals": self.residuals,
            "note": self.note,
        }


def _judge(name: str, rows: list[tuple[float, dict | None]], cfg: TestConfig) -> ConditionReport:
    """Turn per-index (worst residual, witness) rows into a verdict."""
    horizon = len(rows)
    res = [float(r) for r, _ in rows]
    start = cfg.tail_start(horizon)
    tail = res[start:]
    eps = cfg.epsilon
    if len(tail) < 2:
        return ConditionReport(name, INCONCLUSIVE, eps, None, None, max(tail, default=0.0), res)
    worst = int(start + np.argmax(tail))
    margin = res[worst]
    if margin <= eps:
        idx = horizon
        while idx > 0 and res[idx - 1] <= eps:
            idx -= 1
        return ConditionReport(name, CONVERGED, eps, idx, None, margin, res)
    wit = dict(rows[worst][1] or {})
    wit["index"] = worst
    wit["residual"] = margin
    return ConditionReport(name, VIOLATED, eps, None, wit, margin, res)


def _worst(pairs):
    best, wit = 0.0, None
    for r, w in pairs:
        if wit is None or r > best:
            best, wit = r, w
    return best, wit


def check_cond_integrals(s: MeasureSequence, cfg: TestConfig) -> ConditionReport:
    target = [integrate(s.limit, f) for f in cfg.functions]
    rows = []
    for mu in s:
        rows.append(
            _worst(
                (abs(integrate(mu, f) - t), {"function": i})
                for i, (f, t) in enumerate(zip(cfg.functions, target))
            )
        )
    return _judge("integrals", rows, cfg)


def _set_rows(s: MeasureSequence, opens, compacts, two_sided: bool):
    lim_o = [s.limit(u) for u in opens]
    lim_c = [s.limit(k) for k in compacts]
    rows = []
    for mu in s:
        items = []
        for i, (u, t) in enumerate(zip(opens, lim_o)):
            d = t - mu(u)
            items.append((abs(d) if two_sided else max(0.0, d), {"open": i, "cells": u.cells}))
        for i, (k, t) in enumerate(zip(compacts, lim_c)):
            d = mu(k) - t
            items.append((abs(d) if two_sided else max(0.0, d), {"compact": i, "cells": k.cells}))
        rows.append(_worst(items))
    return rows


def check_cond_sets(s: MeasureSequence, cfg: TestConfig) -> ConditionReport:
    """liminf mu_k(U) >= mu(U) on opens and limsup mu_k(K) <= mu(K) on compacts."""
    return _judge("sets", _set_rows(s, cfg.opens, cfg.compacts, False), cfg)


def check_cond_continuity_sets(s: MeasureSequence, cfg: TestConfig) -> ConditionReport:
    """mu_k(A) -> mu(A) for panel sets that are continuity sets of the limit."""
    opens = [u for u in cfg.opens if mu_continuity(s.limit, u)]
    compacts = [k for k in cfg.compacts if mu_continuity(s.limit, k)]
    rep = _judge("continuity_sets", _set_rows(s, opens, compacts, True), cfg)
    rep.note += f"; {len(opens)} open and {len(compacts)} compact continuity sets"
    return rep


def r2_test_points(limit: DTMEvaluator, f: GridFunction) -> np.ndarray:
    """Midpoints between consecutive discontinuities of the limit's R2, padded by one on each side."""
    jumps = r2(limit, f).discontinuities()
    edges = np.concatenate([[f.min - 1.0], jumps, [f.max + 1.0]])
    return (edges[:-1] + edges[1:]) / 2


def check_cond_r2(s: MeasureSequence, cfg: TestConfig) -> ConditionReport:
    """R2 (and R1) of the members converge at continuity points of the limit's R2."""
    pts = [r2_test_points(s.limit, f) for f in cfg.functions]
    lim2 = [r2(s.limit, f)(t) for f, t in zip(cfg.functions, pts)]
    lim1 = [r1(s.limit, f)(t) for f, t in zip(cfg.functions, pts)]
    rows = []
    for mu in s:
        items = []
        for i, f in enumerate(cfg.functions):
            d2 = np.abs(r2(mu, f)(pts[i]) - lim2[i])
            d1 = np.abs(r1(mu, f)(pts[i]) - lim1[i])
            j = int(np.argmax(np.maximum(d1, d2)))
            items.append((float(max(d1[j], d2[j])), {"function": i, "t": float(pts[i][j])}))
        rows.append(_worst(items))
    return _judge("r2", rows, cfg)


def compact_space_variant(s: MeasureSequence, cfg: TestConfig) -> ConditionReport:
    """Total mass converges and limsup mu_k(C) <= mu(C) on closed panel sets."""
    full = Region(s.n, full_bits(s.n), COMPACT)
    total = s.limit(full)
    lim_c = [s.limit(k) for k in cfg.compacts]
    rows = []
    for mu in s:
        items = [(abs(mu(full) - total), {"total_mass": True})]
        for i, (k, t) in enumerate(zip(cfg.compacts, lim_c)):
            items.append((max(0.0, mu(k) - t), {"compact": i, "cells": k.cells}))
        rows.append(_worst(items))
    return _judge("compact_space", rows, cfg)


CHECKERS = {
    "integrals": check_cond_integrals,
    "sets": check_cond_sets,
    "continuity_sets": check_cond_continuity_sets,
    "r2": check_cond_r2,
}


@dataclass
class CrosscheckReport:
    sequence: str
    conditions: dict[str, ConditionReport]
    variant: ConditionReport
    anomalies: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        verdicts = {c.verdict for c in self.conditions.values()}
        if len(verdicts) == 1:
            return verdicts.pop()
        if VIOLATED in verdicts:
            return VIOLATED
        return INCONCLUSIVE

    def to_json(self) -> dict:
        return {
            "sequence": self.sequence,
            "verdict": self.verdict,
            "conditions": {k: v.to_json() for k, v in self.conditions.items()},
            "compact_space_variant": self.variant.to_json(),
            "anomalies": self.anomalies,
        }


def crosscheck(s: MeasureSequence, cfg: TestConfig) -> CrosscheckReport:
    """Run the four equivalent conditions and flag converged/violated disagreements."""
    conds = {name: fn(s, cfg) for name, fn in CHECKERS.items()}
    variant = compact_space_variant(s, cfg)
    verdicts = {name: c.verdict for name, c in conds.items()}
    anomalies = []
    conv = sorted(k for k, v in verdicts.items() if v == CONVERGED)
    viol = sorted(k for k, v in verdicts.items() if v == VIOLATED)
    if conv and viol:
        anomalies.append(f"converged: {', '.join(conv)}; violated: {', '.join(viol)}")
    if variant.verdict in (CONVERGED, VIOLATED) and conv and variant.verdict == VIOLATED:
        anomalies.append("compact-space variant violated while the conditions converge")
    return CrosscheckReport(s.name, conds, variant, anomalies)


# --- sequences --------------------------------------------------------------------


def mixing_sequence(nu_hat: DTMEvaluator, m: DTMEvaluator, horizon: int = 256) -> MeasureSequence:
    """``mu_k = nu_hat / (k + 1) + (1 - 1 / (k + 1)) m``, converging to ``m``."""
    total = norm(nu_hat)
    if total <= 0:
        raise ContractError("nu_hat must have positive mass")
    scaled = nu_hat if abs(total - 1.0) <= 1e-15 else combine([(1.0 / total, nu_hat)])

    def gen(k):
        w = 1.0 / (k + 1)
        return combine([(w, scaled), (1.0 - w, m)])

    return MeasureSequence(gen, m, horizon, "mixing", {"nu_hat": nu_hat.to_json(), "limit": m.to_json()})


def shrinking_disk(space: GridSpace, a: int, radius: float) -> Region:
    """Cells within ``radius`` of ``a`` plus one horizontal neighbor, so the set never shrinks below two cells."""
    i, j = divmod(a, space.n)
    nb = space.cell(i, j + 1) if j + 1 < space.n else space.cell(i, j - 1)
    disk = ball(space, a, radius, COMPACT)
    return Region(space.n, disk.bits | (1 << nb) | (1 << a), COMPACT)


def shrinking_indicator_sequence(n: int, a: int, r0: float = 0.25, horizon: int = 64) -> MeasureSequence:
    """Indicators of connected compacts of radius ``r0 / (k + 1)`` around ``a``; limit ``delta_a``."""
    space = GridSpace(n)

    def gen(k):
        return IndicatorDTM(shrinking_disk(space, a, r0 / (k + 1)))

    return MeasureSequence(
        gen, point_mass(PointRef(n, a)), horizon, "shrinking_indicator", {"n": n, "a": a, "r0": r0}
    )


def alternating_sequence(a: PointRef, b: PointRef, horizon: int = 64) -> MeasureSequence:
    """``delta_a, delta_b, delta_a, ...`` with claimed limit ``delta_a``."""
    da, db = PointMass(a), PointMass(b)
    return MeasureSequence(
        lambda k: da if k % 2 == 0 else db, da, horizon, "alternating", {"n": a.n, "a": a.cell, "b": b.cell}
    )


def constant_sequence(m: DTMEvaluator, horizon: int = 16) -> MeasureSequence:
    return MeasureSequence(lambda k: m, m, horizon, "constant", {"measure": m.to_json()})


# --- panels -------------------------------------------------------------------------


def default_config(
    n: int,
    anchors: Sequence[int] = (),
    epsilon: float = 1e-3,
    seed: int = 0,
    margin: int = 3,
    random_functions: int = 2,
) -> TestConfig:
    """Generic panel: cones and plateaus at anchors, a constant, random layered functions,
    and cell balls that either contain an anchor with ``margin`` cells to spare or avoid it
    by ``margin`` cells.

    Random layered functions are far from continuous; leave them out
    (``random_functions=0``) when the limit is sensitive to single cells.
    """
    space = GridSpace(n)
    rng = np.random.default_rng(seed)
    anchors = list(anchors) or [space.cell(n // 2, n // 2)]
    w = space.cell_width
    fns = [GridFunction.constant(n, 1.0)]
    for a in anchors:
        fns.append(GridFunction.cone(n, a, 1.0))
        fns.append(GridFunction.plateau(n, a, 0.1, 0.3))
    for _ in range(random_functions):
        fns.append(GridFunction.random(n, rng, levels=4))
    opens, compacts = [], []
    for a in anchors:
        for k in (margin, 2 * margin):
            b = ball(space, a, k * w, COMPACT)
            opens.append(b.with_kind(OPEN))
            compacts.append(b)
            far = full_bits(n) & ~ball(space, a, (k + margin) * w, COMPACT).bits
            if far:
                opens.append(Region(n, far, OPEN))
                compacts.append(Region(n, far, COMPACT))
    opens.append(Region(n, full_bits(n), OPEN))
    compacts.append(Region(n, full_bits(n), COMPACT))
    return TestConfig(fns, opens, compacts, epsilon)


def lipschitz_bound(f: GridFunction, radius: float, cell_width: float) -> float:
    """Bound on the integral gap of a shrinking indicator: ``L (r + one cell diagonal)``."""
    return f.lipschitz_constant() * (radius + 2 * math.sqrt(2) * cell_width)
