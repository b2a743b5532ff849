"""Two readings of uniform tightness on a compact grid.

The literal reading wants one compact carrying more than eps of every member;
the classical one wants the mass outside it below eps. On a compact space the
whole square always serves the classical reading.
"""

from topomeasure import GridSpace, PointRef
from topomeasure.families import MeasureFamily, tightness_witness, variation_bound
from topomeasure.measures import combine, point_mass, uniform_radon

n = 8
space = GridSpace(n)
deltas = MeasureFamily([point_mass(PointRef(n, c)) for c in range(n * n)], "all point masses")

for mode in ("paper_literal", "classical"):
    for eps in (0.5, 1.0):
        K = tightness_witness(deltas, eps, mode)
        print(f"{mode:13s} eps={eps}: ", "none" if K is None else f"{len(K)} cells")

small = MeasureFamily([combine([(0.05, uniform_radon(n))])], "light")
print("light uniform, literal eps=0.1:", tightness_witness(small, 0.1, "paper_literal"))
print("light uniform, classical eps=0.1:", len(tightness_witness(small, 0.1, "classical")), "cells")
print("variation bound of both families:", variation_bound(deltas.union(small)))
