"""Family-level diagnostics: bounded variation, tightness, and a subsequence experiment.

Tightness has two readings. ``"paper_literal"`` asks for one compact ``K``
with ``mu(K) > eps`` for every member; ``"classical"`` asks for
``mu(K) > |mu| - eps``, i.e. the mass outside ``K`` is below ``eps``. On the
compact grid the classical form is always witnessed by the whole square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import COMPACT, ContractError, GridSpace, Region, ball
from .integral import GridFunction, integrate
from .measures import DTMEvaluator, norm

MODES = ("paper_literal", "classical")


@dataclass
class MeasureFamily:
    members: list[DTMEvaluator]
    name: str = "family"

    def __post_init__(self):
        self.members = list(self.members)
        if not self.members:
            raise ContractError("a measure family needs at least one member")

    @property
    def n(self) -> int:
        return self.members[0].n

    def union(self, other: "MeasureFamily") -> "MeasureFamily":
        return MeasureFamily(self.members + other.members, f"{self.name}+{other.name}")


def variation_bound(fam: MeasureFamily) -> float:
    """Least ``M`` with ``|mu| <= M`` for every member."""
    return max(norm(m) for m in fam.members)


def compact_panel(n: int) -> list[Region]:
    """Whole grid, nested centered squares, and cell balls on a lattice at several radii."""
    space = GridSpace(n)
    out = []
    for k in range((n + 1) // 2):
        out.append(Region.from_cells(n, [i * n + j for i in range(k, n - k) for j in range(k, n - k)], COMPACT))
    stride = max(1, n // 8)
    for i in range(0, n, stride):
        for j in range(0, n, stride):
            for r in (0.0, 1, 2, 4):
                out.append(ball(space, space.cell(i, j), r * space.cell_width, COMPACT))
    for c in range(n * n) if n <= 16 else ():
        out.append(Region(n, 1 << c, COMPACT))
    seen, uniq = set(), []
    for r in out:
        if r.bits not in seen:
            seen.add(r.bits)
            uniq.append(r)
    return uniq


def _satisfies(m: DTMEvaluator, K: Region, eps: float, mode: str) -> bool:
    v = m(K)
    if mode == "paper_literal":
        return v > eps
    return v > norm(m) - eps


def tightness_witness(
    fam: MeasureFamily, eps: float, mode: str = "classical", panel: Sequence[Region] | None = None
) -> Region | None:
    """Smallest panel compact satisfying the chosen inequality for every member, or None."""
    if not eps > 0:
        raise ContractError("epsilon must be positive")
    if mode not in MODES:
        raise ContractError(f"mode must be one of {MODES}")
    panel = list(panel) if panel is not None else compact_panel(fam.n)
    best = None
    for K in sorted(panel, key=lambda r: (len(r), r.bits)):
        if all(_satisfies(m, K, eps, mode) for m in fam.members):
            best = K
            break
    return best


@dataclass
class ExperimentRow:
    name: str
    bounded: bool
    variation: float
    subsequence: list[int]
    found: bool
    note: str = "finite-horizon evidence, not a proof"

    def to_json(self):
        return {
            "name": self.name,
            "bounded": self.bounded,
            "variation": self.variation,
            "subsequence": self.subsequence,
            "found": self.found,
            "note": self.note,
        }


@dataclass
class ExperimentReport:
    rows: list[ExperimentRow] = field(default_factory=list)

    def to_json(self):
        return {"rows": [r.to_json() for r in self.rows]}


def _integral_vectors(seq, functions) -> np.ndarray:
    return np.array([[integrate(mu, f) for f in functions] for mu in seq])


def greedy_cauchy_subsequence(vectors: np.ndarray, eps: float, min_length: int = 2) -> list[int]:
    """Largest cluster of indices whose integral vectors lie within ``eps`` (sup norm) of a center member.

    Greedy: each index is tried as the center; the later members within
    ``eps / 2`` form the candidate subsequence, so any two of them differ by
    at most ``eps``.
    """
    best: list[int] = []
    for c in range(len(vectors)):
        d = np.abs(vectors - vectors[c]).max(axis=1)
        members = [i for i in range(c, len(vectors)) if d[i] <= eps / 2]
        if len(members) > len(best):
            best = members
    return best if len(best) >= min_length else []


def prokhorov_experiment(
    sequences: Sequence, functions: Sequence[GridFunction], eps: float = 1e-2, bound_cap: float | None = None
) -> ExperimentReport:
    """For each sequence: bounded in variation? and an integral-Cauchy subsequence on the horizon."""
    rep = ExperimentReport()
    for s in sequences:
        members = list(s)
        norms = [norm(m) for m in members]
        cap = bound_cap if bound_cap is not None else 4 * max(1.0, norms[0])
        var = max(norms)
        half = len(norms) // 2
        growing = len(norms) >= 4 and min(norms[half:]) > 2 * max(norms[: max(1, half // 2)])
        bounded = math.isfinite(var) and var <= cap and not growing
        if not bounded:
            rep.rows.append(
                ExperimentRow(
                    s.name,
                    False,
                    var,
                    [],
                    False,
                    "norms diverge: no uniform variation bound, so the sequence cannot be relatively compact",
                )
            )
            continue
        vecs = _integral_vectors(members, functions)
        tail = len(members) // 2
        sub = greedy_cauchy_subsequence(vecs[tail:], eps)
        sub = [i + tail for i in sub]
        rep.rows.append(ExperimentRow(s.name, True, var, sub, bool(sub)))
    return rep
