"""Quasi-integrals against a few deficient topological measures.

The integral of f is the layer-cake sum over the open level sets of f, so it
is exact for point masses, picks a minimum for indicators, and is not linear
for the seven-point measure.
"""

import numpy as np

from topomeasure import GridFunction, GridSpace, PointRef
from topomeasure.integral import integrate, integrate_full, interior_adjusted_min, r1, r2
from topomeasure.measures import indicator_dtm, point_mass, uniform_radon
from topomeasure.solid import extend, nonlinearity_witness, nvssf

n = 12
space = GridSpace(n)
a = space.cell(4, 7)
f = GridFunction.cone(n, a, 0.5)  # 1 at a, 0 beyond distance 0.5

print("f(a) =", f.at(a))
print("point mass at a:", integrate(point_mass(PointRef(n, a)), f))
print("uniform:", round(integrate(uniform_radon(n), f), 6), "vs mean", round(float(f.values.mean()), 6))

# the indicator reads f on the closed 8-neighborhood of D
D = space.region([space.cell(5, 6), space.cell(5, 7)])
ind = indicator_dtm(D)
print("indicator of D:", integrate(ind, f), "= interior-adjusted min", interior_adjusted_min(D, f))

# both distribution functions, and the two integral forms
res = integrate_full(ind, f)
print("R1 form", res.r1_form, "R2 form", res.r2_form, "agree:", res.r2_equal)
R1, R2 = r1(ind, f), r2(ind, f)
t = np.linspace(0, 1, 6)
print("t ", np.round(t, 2))
print("R1", R1(t))
print("R2", R2(t))

# nonlinearity of the seven-point measure, searched on sums of cones
pts = [PointRef(n, space.cell(i, j)) for i, j in ((2, 2), (5, 9), (9, 4))]
m = extend(nvssf(pts, 1))
w = nonlinearity_witness(m, searches=120, seed=0)
print("int(f+g) - int f - int g =", None if w is None else round(w.gap, 6))
