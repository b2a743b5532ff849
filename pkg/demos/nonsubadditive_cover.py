"""A topological measure that is not a measure.

Seven points on a 30x30 grid; a solid set holding 2i or 2i+1 of them gets
value i/3. Cutting the square into vertical strips shows the failure of
subadditivity.
"""

from topomeasure import GridSpace
from topomeasure.measures import Budget, verify_measure
from topomeasure.scenarios import diagonal_points
from topomeasure.solid import cumulative_unions, extend, nvssf, strip_cover

n = 30
space = GridSpace(n)
pts = diagonal_points(n, 7)
m = extend(nvssf(pts, 3))

print("points (row, col):", [divmod(p.cell, n) for p in pts])
print("m(whole square) =", m(space.full()))

# one strip per point: every piece is null, the union is everything
pieces = strip_cover(pts, 7)
print("seven strips:", [m(r) for r in pieces])

# three strips cannot do it: some strip holds three points
three = strip_cover(pts, 3)
counts = [sum(1 for p in pts if r.bits >> p.cell & 1) for r in three]
print("three strips hold", counts, "points, values", [round(m(r), 4) for r in three])

rep = verify_measure(m, Budget.panel(pieces + cumulative_unions(pieces)))
A, B = rep.witness
print("verify_measure:", rep.verdict)
print("  witness: m(A) + m(B) =", m(A) + m(B), "but m(A u B) =", m(space.region(sorted(set(A.cells) | set(B.cells)))))
