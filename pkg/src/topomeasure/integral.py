"""Distribution functions of level sets and the quasi-integral they define.

For a cell function ``f`` and an evaluator ``m``::

    R1(t) = m(open region {f > t})
    R2(t) = m(closed region {f >= t})
    int f dm = int_a^b R1(t) dt + a * m(X),   [a, b] = [min(f, 0), max(f, 0)]

Cell functions stand in for continuous ones. Between two consecutive values
of ``f`` the closed level set of a continuous interpolant is a compact lying
strictly inside the open cell region, so the R2 plateaus use the evaluator's
inner limit (:meth:`DTMEvaluator.inner_value`). At a value ``v`` of ``f`` R2
takes the compact value of ``{f >= v}``. R2 is therefore left-continuous and
R1 right-continuous; they agree off the breakpoints whenever ``m`` is inner
regular, which the integral checks on every call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import COMPACT, OPEN, ContractError, GridSpace, Region, full_bits, grow8, mask_to_bits
from .measures import DTMEvaluator, norm

INTEGRAL_TOL = 1e-9
AGREE_TOL = 1e-12


class DistributionInconsistency(RuntimeError):
    """R1 and R2 integrals disagree: the evaluator is not inner regular."""


class GridFunction:
    """Real function sampled at cell centers, stored as an ``n x n`` array."""

    def __init__(self, values):
        v = np.array(values, dtype=float)
        if v.ndim == 1:
            side = int(round(math.sqrt(v.size)))
            v = v.reshape(side, side)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ContractError("grid function needs a square array")
        if not np.all(np.isfinite(v)):
            raise ContractError("grid function values must be finite")
        v.flags.writeable = False
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def space(self) -> GridSpace:
        return GridSpace(self.n)

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    def at(self, cell: int) -> float:
        return float(self.values.flat[cell])

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def is_nonnegative(self) -> bool:
        return bool(self.min >= 0)

    def support_bits(self) -> int:
        return mask_to_bits(self.values != 0)

    def level_bits(self, t: float, strict: bool) -> int:
        return mask_to_bits(self.values > t if strict else self.values >= t)

    def pos(self) -> "GridFunction":
        return GridFunction(np.maximum(self.values, 0.0))

    def neg(self) -> "GridFunction":
        return GridFunction(np.maximum(-self.values, 0.0))

    def lipschitz_constant(self) -> float:
        """Largest difference quotient over pairs of cell centers (cached)."""
        cached = getattr(self, "_lip", None)
        if cached is not None:
            return cached
        c = self.space.centers()
        v = self.values.ravel()
        best = 0.0
        if v.max() > v.min():
            for k in range(0, v.size, 256):
                dx = c[k : k + 256, None, 0] - c[None, :, 0]
                dy = c[k : k + 256, None, 1] - c[None, :, 1]
                d2 = dx * dx + dy * dy
                dv = v[k : k + 256, None] - v[None, :]
                np.fill_diagonal(d2[:, k : k + 256], np.inf)
                best = max(best, float(np.sqrt((dv * dv / d2).max())))
        self._lip = best
        return best

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if other.n != self.n:
                raise ContractError("grid functions on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.values - self._coerce(other))

    def __mul__(self, other):
        return GridFunction(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(-self.values)

    def __le__(self, other):
        return bool(np.all(self.values <= self._coerce(other)))

    def __eq__(self, other):
        return isinstance(other, GridFunction) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"GridFunction(n={self.n}, min={self.min:g}, max={self.max:g})"

    def to_json(self) -> dict:
        return {"n": self.n, "values": self.values.ravel().tolist()}

    @classmethod
    def from_json(cls, obj) -> "GridFunction":
        if isinstance(obj, dict):
            v = np.asarray(obj["values"], dtype=float)
            if "n" in obj:
                v = v.reshape(int(obj["n"]), int(obj["n"]))
            return cls(v)
        return cls(obj)

    @classmethod
    def constant(cls, n: int, c: float) -> "GridFunction":
        return cls(np.full((n, n), float(c)))

    @classmethod
    def from_callable(cls, n: int, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "GridFunction":
        c = GridSpace(n).centers()
        return cls(np.asarray(fn(c[:, 0], c[:, 1]), dtype=float).reshape(n, n))

    @classmethod
    def cone(cls, n: int, center, radius: float, height: float = 1.0) -> "GridFunction":
        """``height * max(0, 1 - d(x, center) / radius)``; center is (x, y) or a cell."""
        cx, cy = _as_xy(n, center)
        return cls.from_callable(
            n, lambda x, y: height * np.maximum(0.0, 1.0 - np.hypot(x - cx, y - cy) / radius)
        )

    @classmethod
    def plateau(cls, n: int, center, radius: float, ramp: float) -> "GridFunction":
        """1 within ``radius`` of center, linear down to 0 over a further ``ramp``."""
        cx, cy = _as_xy(n, center)
        return cls.from_callable(
            n, lambda x, y: np.clip((radius + ramp - np.hypot(x - cx, y - cy)) / ramp, 0.0, 1.0)
        )

    @classmethod
    def clamped_distance(cls, n: int, b, shift: float, lo: float = -1.0, hi: float = 1.0) -> "GridFunction":
        """``clip(d(x, b) - shift, lo, hi)``; 1-Lipschitz with sup norm at most ``max(|lo|, |hi|)``."""
        bx, by = _as_xy(n, b)
        return cls.from_callable(n, lambda x, y: np.clip(np.hypot(x - bx, y - by) - shift, lo, hi))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, levels: int | None = None, scale: float = 1.0):
        """Nonnegative random function; ``levels`` quantizes to that many distinct values."""
        v = rng.random((n, n)) * scale
        if levels:
            v = np.floor(v / scale * levels) * (scale / levels)
        return cls(v)


def _as_xy(n: int, p) -> tuple[float, float]:
    if isinstance(p, (int, np.integer)):
        return GridSpace(n).center(int(p))
    if hasattr(p, "cell"):
        return GridSpace(n).center(p.cell)
    return float(p[0]), float(p[1])


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function of ``t`` with explicit values at breakpoints.

    ``plateaus[j]`` holds on the open interval left of ``breakpoints[j]``
    (``plateaus[-1]`` right of the last one); ``points[j]`` is the value at
    ``breakpoints[j]``.
    """

    breakpoints: np.ndarray
    plateaus: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        if len(self.plateaus) != len(self.breakpoints) + 1 or len(self.points) != len(self.breakpoints):
            raise ContractError("step function needs one more plateau than breakpoints")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ContractError("breakpoints must increase strictly")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, t, side="left")
        out = self.plateaus[idx]
        if len(self.breakpoints):
            k = np.minimum(idx, len(self.breakpoints) - 1)
            out = np.where(self.breakpoints[k] == t, self.points[k], out)
        return float(out) if out.ndim == 0 else out

    def integral(self, lo: float, hi: float) -> float:
        """Exact integral over ``[lo, hi]``; breakpoint values have measure zero."""
        if hi < lo:
            return -self.integral(hi, lo)
        edges = np.concatenate([[lo], np.clip(self.breakpoints, lo, hi), [hi]])
        return float(np.dot(self.plateaus, np.diff(edges)))

    def jumps(self) -> np.ndarray:
        """Drop across each breakpoint, left plateau minus right plateau."""
        return self.plateaus[:-1] - self.plateaus[1:]

    def discontinuities(self, tol: float = AGREE_TOL) -> np.ndarray:
        left, right = self.plateaus[:-1], self.plateaus[1:]
        bad = (np.abs(left - right) > tol) | (np.abs(self.points - left) > tol) | (np.abs(self.points - right) > tol)
        return self.breakpoints[bad]

    def is_nonincreasing(self, tol: float = AGREE_TOL) -> bool:
        seq = np.empty(2 * len(self.breakpoints) + 1)
        seq[0::2] = self.plateaus
        seq[1::2] = self.points
        return bool(np.all(np.diff(seq) <= tol))

    def to_json(self) -> dict:
        return {
            "breakpoints": self.breakpoints.tolist(),
            "plateaus": self.plateaus.tolist(),
            "points": self.points.tolist(),
        }


def _levels(f: GridFunction) -> tuple[np.ndarray, list[int]]:
    vals = np.unique(f.values)
    flat = f.values.ravel()
    order = np.argsort(flat, kind="stable")
    # cells with f >= vals[j], built from the top down
    bits = [0] * len(vals)
    acc = 0
    pos = len(flat) - 1
    for j in range(len(vals) - 1, -1, -1):
        while pos >= 0 and flat[order[pos]] >= vals[j]:
            acc |= 1 << int(order[pos])
            pos -= 1
        bits[j] = acc
    return vals, bits


def _check_grid(m: DTMEvaluator, f: GridFunction):
    if m.n != f.n:
        raise ContractError(f"function on {f.n}x{f.n} grid, evaluator on {m.n}x{m.n}")


def _profile(m: DTMEvaluator, f: GridFunction, brute: bool):
    if not brute:
        vals = np.unique(f.values)
        prof = m.level_profile(f.values, vals)
        if prof is not None:
            return vals, [np.asarray(p, dtype=float) for p in prof]
    vals, bits = _levels(f)
    return vals, [
        np.array([m._eval_bits(b, OPEN) for b in bits]),
        np.array([m.inner_value(b) for b in bits]),
        np.array([m._eval_bits(b, COMPACT) for b in bits]),
    ]


def r1(m: DTMEvaluator, f: GridFunction, brute: bool = False) -> StepFunction:
    """``t -> m(OPEN {f > t})`` as an exact step function.

    ``brute=True`` skips the evaluator's closed-form level profile and
    evaluates every level-set region.
    """
    _check_grid(m, f)
    vals, (vo, _, _) = _profile(m, f, brute)
    plateaus = np.append(vo, m._eval_bits(0, OPEN))
    return StepFunction(vals, plateaus, plateaus[1:].copy())


def r2(m: DTMEvaluator, f: GridFunction, brute: bool = False) -> StepFunction:
    """``t -> m({f >= t})``: inner-limit values between function values, left-continuous.

    The closed level set ``{f >= t}`` is the intersection of the open ones
    below ``t``, so by outer regularity its value is the left limit. The
    cell set ``{f >= v}`` taken as a compact would overshoot: the closed
    level set of a continuous interpolant sits strictly inside those cells.
    """
    _check_grid(m, f)
    vals, (_, vi, _) = _profile(m, f, brute)
    return StepFunction(vals, np.append(vi, m.inner_value(0)), vi.copy())


def _interval(f: GridFunction) -> tuple[float, float]:
    return min(f.min, 0.0), max(f.max, 0.0)


@dataclass
class IntegralResult:
    value: float
    r1_form: float
    r2_form: float
    r1: StepFunction
    r2: StepFunction

    @property
    def r2_equal(self) -> bool:
        scale = max(1.0, abs(self.value))
        return abs(self.r1_form - self.r2_form) <= AGREE_TOL * scale

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "r1_breakpoints": self.r1.breakpoints.tolist(),
            "r2_equal": self.r2_equal,
        }


def integrate_full(m: DTMEvaluator, f: GridFunction, brute: bool = False) -> IntegralResult:
    """Quasi-integral with both distribution-function forms and their step functions."""
    R1, R2 = r1(m, f, brute), r2(m, f, brute)
    a, b = _interval(f)
    total = norm(m)
    form1 = R1.integral(a, b) + a * total
    form2 = R2.integral(a, b) + a * total
    # layer-cake sum: exact whenever R1 has a single jump
    value = float(np.dot(R1.breakpoints, R1.jumps()))
    scale = max(1.0, abs(value), abs(a) * total, abs(b) * total)
    if abs(form1 - form2) > INTEGRAL_TOL * scale:
        raise DistributionInconsistency(
            f"distribution inconsistency: R1 form {form1!r} vs R2 form {form2!r} for {m!r}"
        )
    return IntegralResult(value, form1, form2, R1, R2)


def integrate(m: DTMEvaluator, f: GridFunction, brute: bool = False) -> float:
    return integrate_full(m, f, brute).value


def continuity_points(R2: StepFunction, tol: float = AGREE_TOL) -> np.ndarray:
    """The finitely many discontinuities; every other real is a continuity point."""
    return R2.discontinuities(tol)


def interior_adjusted_min(D: Region, f: GridFunction) -> float:
    """Minimum of ``f`` over the cells within one 8-step of ``D``.

    This is the largest ``t`` whose open level set ``{f > s}``, ``s < t``, still
    contains ``D`` under the edge-clipped erosion convention.
    """
    cells = Region(D.n, grow8(D.bits, D.n), COMPACT).cells
    return float(f.values.ravel()[cells].min())


# --- property suite -------------------------------------------------------------


@dataclass
class PropertyCheck:
    name: str
    passed: bool = True
    margin: float = math.inf
    checked: int = 0
    skipped: int = 0
    witness: object = None

    def add(self, slack: float, witness, tol: float = INTEGRAL_TOL):
        self.checked += 1
        self.margin = min(self.margin, slack)
        if slack < -tol and self.passed:
            self.passed = False
            self.witness = witness

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "margin": None if self.checked == 0 else self.margin,
            "checked": self.checked,
            "skipped": self.skipped,
            "witness": self.witness,
        }


@dataclass
class SuiteReport:
    checks: list[PropertyCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_json() for c in self.checks]}


def dfunctional_suite(
    m: DTMEvaluator,
    fs: Sequence[GridFunction],
    is_tm: bool = False,
    scalars: Sequence[float] = (0.0, 0.5, 2.0, 3.75),
    tol: float = INTEGRAL_TOL,
) -> SuiteReport:
    """Homogeneity, monotonicity, orthogonal additivity, bounds, and (for TMs) the Lipschitz bound.

    Orthogonal additivity is only asserted for 8-separated supports: cell
    functions on touching cells stand for continuous functions whose supports
    overlap.
    """
    fs = list(fs)
    cache: dict[GridFunction, float] = {}

    def q(g):
        if g not in cache:
            cache[g] = integrate(m, g)
        return cache[g]

    total = norm(m)
    d1, d2, d3 = PropertyCheck("homogeneity"), PropertyCheck("monotone"), PropertyCheck("orthogonal_additive")
    bounds, lip = PropertyCheck("bounds"), PropertyCheck("lipschitz")
    for i, f in enumerate(fs):
        scale = max(1.0, f.sup_norm() * total)
        if f.is_nonnegative():
            for c in scalars:
                d1.add(-abs(q(c * f) - c * q(f)), (i, c), tol * scale * max(1.0, c))
        lo, hi = q(f) - total * f.min, total * f.max - q(f)
        bounds.add(min(lo, hi), i, tol * scale)
    for i, f in enumerate(fs):
        for j, g in enumerate(fs):
            if i == j:
                continue
            scale = max(1.0, max(f.sup_norm(), g.sup_norm()) * total)
            if f <= g:
                d2.add(q(g) - q(f), (i, j), tol * scale)
            if j > i:
                h = GridFunction(np.maximum(f.values, g.values))
                d2.add(q(h) - q(f), (i, "max", j), tol * scale)
                if f.is_nonnegative() and g.is_nonnegative() and not (f.values * g.values).any():
                    sf, sg = f.support_bits(), g.support_bits()
                    if grow8(sf, f.n) & sg:
                        d3.skipped += 1
                    else:
                        d3.add(-abs(q(f + g) - q(f) - q(g)), (i, j), tol * scale)
                if is_tm:
                    dist = float(np.abs(f.values - g.values).max())
                    lip.add(2 * dist * total - abs(q(f) - q(g)), (i, j), tol * scale)
    checks = [d1, d2, d3, bounds]
    if is_tm:
        checks.append(lip)
    return SuiteReport(checks)


@dataclass
class RoundtripReport:
    value: float
    infimum: float
    gap: float
    refined_value: float | None
    equal: bool | None
    radii: int

    @property
    def passed(self) -> bool:
        return self.gap >= -INTEGRAL_TOL and self.equal is not False

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "infimum": self.infimum,
            "gap": self.gap,
            "refined_value": self.refined_value,
            "equal": self.equal,
            "radii": self.radii,
            "passed": self.passed,
        }


def plateau_family(K: Region, radii: int | None = None) -> list[GridFunction]:
    """Continuous-style upper functions of ``K``: 1 within one 8-step, linear decay over each radius."""
    n = K.n
    space = GridSpace(n)
    core = grow8(K.bits, n)
    cells = Region(n, core, COMPACT).cells
    c = space.centers()
    if cells:
        d = np.min(np.linalg.norm(c[:, None, :] - c[None, cells, :], axis=2), axis=1)
    else:
        d = np.full(n * n, np.inf)
    radii = n if radii is None else radii
    out = [GridFunction((d == 0).astype(float).reshape(n, n))]
    for k in range(1, radii + 1):
        r = k * space.cell_width
        out.append(GridFunction(np.clip(1.0 - d / (r + space.cell_width), 0.0, 1.0).reshape(n, n)))
    return out


def roundtrip_check(m: DTMEvaluator, K: Region, radii: int | None = None) -> RoundtripReport:
    """Recover ``m(K)`` as an infimum of integrals of plateau functions above ``K``.

    On the grid the infimum over coarse plateaus is ``m`` of the open one-step
    dilation; on the refined grid that dilation shrinks onto ``K`` and the
    recovered value must equal ``m(K)`` exactly (outer regularity).
    """
    if K.kind is not COMPACT:
        raise ContractError("roundtrip_check takes a COMPACT region")
    value = m(K)
    if K.bits == full_bits(K.n):
        inf = integrate(m, GridFunction.constant(K.n, 1.0))
        return RoundtripReport(value, inf, inf - value, inf, abs(inf - value) <= INTEGRAL_TOL, 0)
    fam = plateau_family(K, radii)
    inf = min(integrate(m, g) for g in fam)
    refined = equal = None
    try:
        fine = m.refine()
    except NotImplementedError:
        fine = None
    if fine is not None:
        from .grid import refine_bits

        fk = Region(fine.n, refine_bits(K.bits, K.n, fine.n // K.n), COMPACT)
        core = Region(fine.n, grow8(fk.bits, fine.n), COMPACT)
        vals = np.zeros(fine.n * fine.n)
        vals[core.cells] = 1.0
        g = GridFunction(vals.reshape(fine.n, fine.n))
        refined = integrate(fine, g)
        equal = abs(refined - value) <= INTEGRAL_TOL
    return RoundtripReport(value, inf, inf - value, refined, equal, len(fam))
