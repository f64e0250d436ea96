"""Half-lines are extremal for the isoperimetric Harnack bound.

For the heat semigroup on the line (kernel N(x, 2t)) and A = (-inf, 0],
the probit of P_t 1_A is exactly -x / sqrt(2t), and the set-form Harnack
margin vanishes for every ordered pair x <= y.
"""

import numpy as np

from harnacklab.fields import Grid, RegionMask, neighborhood
from harnacklab.semigroup import Semigroup, apply_region, region_probit

g = Grid.line(-20, 20, 4001)
sg = Semigroup.euclidean(g)
A = RegionMask.from_intervals(g, [(-np.inf, 0.0)])

for t in (0.1, 0.5, 2.0):
    z, _ = region_probit(sg, t, A)
    inner = np.abs(g.x) <= 3
    err = np.max(np.abs(z[inner] + g.x[inner] / np.sqrt(2 * t)))
    PA = apply_region(sg, t, A).values
    x, y = 0.5, 1.7
    grown = apply_region(sg, t, neighborhood(A, y - x)).values[g.index_of(y)]
    print(f"t={t:<4} probit error {err:.1e}   P_t 1_A(x)={PA[g.index_of(x)]:.12f}   P_t 1_A_r(y)={grown:.12f}")
