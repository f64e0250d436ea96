"""W2 contraction along the Ornstein-Uhlenbeck flow.

Two Gaussians with equal variance stay Gaussian with equal variance under
the flow, their means contract by e^{-t}, so the W2 ratio is exactly e^{-t}.
The squared distance therefore decays like e^{-2t}.
"""

import numpy as np
from scipy.stats import norm

from harnacklab.fields import DensityField, Grid
from harnacklab.semigroup import Semigroup
from harnacklab.transport import evolve_density, w2

g = Grid.line(-10, 10, 4001)
sg = Semigroup.ornstein_uhlenbeck(g)
mu = DensityField.from_lebesgue(sg.measure, norm.pdf(g.x, -1.0, 0.8))
nu = DensityField.from_lebesgue(sg.measure, norm.pdf(g.x, 1.0, 0.8))
w0 = w2(mu, nu)
print(f"W2 at t=0: {w0:.8f} (exact 2)")
for t in (0.25, 0.5, 1.0, 2.0):
    r = w2(evolve_density(sg, t, mu), evolve_density(sg, t, nu)) / w0
    print(f"t={t:<4} ratio {r:.8f}  e^-t {np.exp(-t):.8f}  e^-2t {np.exp(-2 * t):.8f}")
