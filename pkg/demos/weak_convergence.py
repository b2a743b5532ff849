"""Weak convergence checks and the distances that drive them.

A mixing sequence (mass 1/(k+1) from an indicator, the rest uniform) settles
on the uniform measure under all four equivalent conditions, and its
Prokhorov and Kantorovich-Rubinstein distances decay like 1/k. Alternating
point masses fail everything.
"""

from topomeasure import GridSpace, PointRef
from topomeasure.convergence import alternating_sequence, crosscheck, default_config, mixing_sequence
from topomeasure.measures import indicator_dtm, uniform_radon
from topomeasure.metrics import LipFamily, kr, prokhorov

n = 8
space = GridSpace(n)
D = space.region([space.cell(2, 2), space.cell(2, 3)])
s = mixing_sequence(indicator_dtm(D), uniform_radon(n), horizon=64)
cfg = default_config(n, [D.cells[0]], epsilon=0.05, random_functions=0)

rep = crosscheck(s, cfg)
for name, c in rep.conditions.items():
    print(f"{name:16s} {c.verdict:10s} from index {c.index}, slope {c.decay_slope():.3f}")
print("anomalies:", rep.anomalies)

fam = LipFamily.clamped_cones(n)
for k in (0, 3, 15, 63):
    p = prokhorov(s[k], s.limit, "structured", 1 / 256).value
    d = kr(s[k], s.limit, fam).value
    print(f"k={k:2d}  P={p:.4f}  KR={d:.4f}")

alt = alternating_sequence(PointRef(n, space.cell(1, 1)), PointRef(n, space.cell(6, 6)), horizon=16)
rep = crosscheck(alt, default_config(n, [space.cell(1, 1), space.cell(6, 6)], epsilon=0.05, random_functions=0))
print("alternating:", rep.verdict, {k: c.witness["index"] for k, c in rep.conditions.items()})
