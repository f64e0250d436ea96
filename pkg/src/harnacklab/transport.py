"""Quadratic optimal transport on the line and the circle.

A density is read as piecewise constant on grid cells (each cell carries its
trapezoid mass), so its quantile function is piecewise linear in the
probability variable. Squared quantile differences are then integrated
exactly over the merged breakpoints, with no sampling of ``(0, 1)``.

On the circle the lifted quantile of the second measure is shifted by
``theta`` in probability and the cost is minimized over ``theta``; for the
quadratic cost this is exact.
"""

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.optimize import minimize_scalar

from .fields import DensityField, Grid, ScalarField, entropy
from .hopflax import inf_conv
from .semigroup import apply_values


@dataclass(frozen=True, eq=False)
class QuantileRep:
    """Piecewise-linear quantile function.

    ``u`` holds the ``m + 1`` probability breakpoints; segment ``k`` maps
    ``[u[k], u[k+1]]`` linearly onto ``[x_lo[k], x_hi[k]]``. Consecutive
    segments may leave a gap in ``x`` (a region of zero mass).
    """

    u: np.ndarray
    x_lo: np.ndarray
    x_hi: np.ndarray

    @classmethod
    def from_density(cls, f: DensityField, tiny=0.0):
        grid = f.grid
        rho = f.lebesgue_values
        h = grid.h
        x = grid.x
        if grid.is_circle:
            left, right = x, x + h
            mass = 0.5 * h * (rho + np.roll(rho, -1))
        else:
            left, right = x[:-1], x[1:]
            mass = 0.5 * h * (rho[:-1] + rho[1:])
        keep = mass > tiny
        mass = mass[keep]
        total = mass.sum()
        if not total > 0:
            raise ValueError("density has no mass")
        u = np.concatenate([[0.0], np.cumsum(mass) / total])
        u[-1] = 1.0
        # masses below rounding of the running sum give empty segments
        seg = np.diff(u) > 0
        keep_u = np.concatenate([[True], seg])
        return cls(u[keep_u], left[keep][seg], right[keep][seg])

    @property
    def values(self):
        """Quantile values at the breakpoints (left limits at the top of each segment)."""
        return np.concatenate([self.x_lo, self.x_hi[-1:]])

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        k = np.clip(np.searchsorted(self.u, p, side="right") - 1, 0, len(self.x_lo) - 1)
        return self._on_segment(k, p)

    def _on_segment(self, k, p):
        lo, hi = self.u[k], self.u[k + 1]
        width = np.where(hi > lo, hi - lo, 1.0)
        frac = np.clip((p - lo) / width, 0.0, 1.0)
        return self.x_lo[k] + frac * (self.x_hi[k] - self.x_lo[k])

    def cdf(self, x):
        """Distribution function of the cellwise-uniform measure."""
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.x_lo, x, side="right") - 1, 0, len(self.x_lo) - 1)
        lo, hi = self.x_lo[k], self.x_hi[k]
        width = np.where(hi > lo, hi - lo, 1.0)
        frac = np.clip((x - lo) / width, 0.0, 1.0)
        out = self.u[k] + frac * (self.u[k + 1] - self.u[k])
        return np.where(x < self.x_lo[0], 0.0, out)

    def mean(self):
        du = np.diff(self.u)
        return float(np.sum(du * 0.5 * (self.x_lo + self.x_hi)))

    def lifted(self, period):
        """Copies on ``u - 1`` and ``u + 1`` shifted by ``-/+ period`` (circle lift)."""
        u = np.concatenate([self.u[:-1] - 1.0, self.u[:-1], self.u + 1.0])
        x_lo = np.concatenate([self.x_lo - period, self.x_lo, self.x_lo + period])
        x_hi = np.concatenate([self.x_hi - period, self.x_hi, self.x_hi + period])
        return QuantileRep(u, x_lo, x_hi)

    def shifted(self, theta):
        """``u -> Q(u + theta)`` as a representation."""
        return QuantileRep(self.u - theta, self.x_lo, self.x_hi)

    def combine(self, other, a, b):
        """Representation of ``a Q_self + b Q_other`` on merged breakpoints."""
        lo, hi, ka, kb = _merged(self, other)
        x_lo = a * self._on_segment(ka, lo) + b * other._on_segment(kb, lo)
        x_hi = a * self._on_segment(ka, hi) + b * other._on_segment(kb, hi)
        return QuantileRep(np.concatenate([lo, hi[-1:]]), x_lo, x_hi)


def _merged(qa, qb, lo=0.0, hi=1.0):
    """Common refinement of two breakpoint sets restricted to ``[lo, hi]``."""
    u = np.union1d(qa.u, qb.u)
    u = np.union1d(u[(u > lo) & (u < hi)], [lo, hi])
    a, b = u[:-1], u[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    mid = 0.5 * (a + b)
    ka = np.clip(np.searchsorted(qa.u, mid, side="right") - 1, 0, len(qa.x_lo) - 1)
    kb = np.clip(np.searchsorted(qb.u, mid, side="right") - 1, 0, len(qb.x_lo) - 1)
    return a, b, ka, kb


def quantile_sq_distance(qa: QuantileRep, qb: QuantileRep) -> float:
    """``int_0^1 |Q_a(u) - Q_b(u)|^2 du``, exact for piecewise-linear quantiles."""
    lo, hi, ka, kb = _merged(qa, qb)
    d0 = qa._on_segment(ka, lo) - qb._on_segment(kb, lo)
    d1 = qa._on_segment(ka, hi) - qb._on_segment(kb, hi)
    return float(np.sum((hi - lo) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0))


def _check_pair(mu, nu):
    if mu.grid != nu.grid:
        raise ValueError("densities live on different grids")
    for d in (mu, nu):
        if not d.normalized or abs(d.mass - 1.0) > 1e-8:
            raise ValueError("w2 needs normalized probability densities")


def circle_sq_distance(qa: QuantileRep, qb: QuantileRep, period, coarse=64):
    """Squared circle distance: minimum over the probability shift of the lifted cost.

    Returns ``(value, theta)``.
    """
    lift = qb.lifted(period)

    def cost(theta):
        return quantile_sq_distance(qa, lift.shifted(theta))

    thetas = np.linspace(-1.0, 1.0, 2 * coarse + 1)
    vals = np.array([cost(th) for th in thetas])
    j = int(np.argmin(vals))
    step = thetas[1] - thetas[0]
    res = minimize_scalar(
        cost, bounds=(thetas[j] - step, thetas[j] + step), method="bounded", options={"xatol": 1e-13}
    )
    if res.fun < vals[j]:
        return float(res.fun), float(res.x)
    return float(vals[j]), float(thetas[j])


def w2_squared(mu: DensityField, nu: DensityField) -> float:
    _check_pair(mu, nu)
    qa, qb = QuantileRep.from_density(mu), QuantileRep.from_density(nu)
    if mu.grid.is_circle:
        return circle_sq_distance(qa, qb, mu.grid.length)[0]
    return quantile_sq_distance(qa, qb)


def w2(mu: DensityField, nu: DensityField) -> float:
    """Quadratic Wasserstein distance between ``mu`` and ``nu`` (densities on one grid)."""
    return float(np.sqrt(max(w2_squared(mu, nu), 0.0)))


def kantorovich_gap(mu: DensityField, nu: DensityField, phi: ScalarField) -> float:
    """``W2^2 / 2 - [int Q_1 phi dnu - int phi dmu]``; non-negative by weak duality."""
    q1 = inf_conv(phi, 1.0).field.values
    dual = np.dot(q1 * nu.values, nu.measure.weights) - np.dot(phi.values * mu.values, mu.measure.weights)
    return 0.5 * w2_squared(mu, nu) - float(dual)


@dataclass(frozen=True, eq=False)
class MonotoneMap:
    """Monotone rearrangement ``T = F_nu^{-1} o F_mu`` sampled at the source nodes."""

    source: np.ndarray
    image: np.ndarray
    mu: DensityField

    def __call__(self, x):
        return np.interp(x, self.source, self.image)

    def cost(self):
        """``int |x - T(x)|^2 dmu`` by the measure's quadrature."""
        d = self.source - self.image
        return float(np.dot(d * d * self.mu.values, self.mu.measure.weights))


def brenier_map(mu: DensityField, nu: DensityField) -> MonotoneMap:
    _check_pair(mu, nu)
    if mu.grid.is_circle:
        raise ValueError("monotone maps are defined on the line only")
    qa, qb = QuantileRep.from_density(mu), QuantileRep.from_density(nu)
    x = mu.grid.x
    return MonotoneMap(x, qb(qa.cdf(x)), mu)


@dataclass(frozen=True, eq=False)
class DisplacementPath:
    """Densities along ``s Q_mu + (1 - s) Q_nu``: ``s = 1`` is ``mu``, ``s = 0`` is ``nu``."""

    s: np.ndarray
    densities: List[DensityField]
    quantiles: List[QuantileRep]


def density_from_quantile(q: QuantileRep, measure) -> DensityField:
    """Regrid a cellwise-uniform measure: cell masses from the CDF, node densities
    as averages of the two adjacent cells, then renormalized."""
    grid = measure.grid
    x = grid.x
    h = grid.h
    F = q.cdf(x)
    cell = np.diff(F) / h
    rho = np.zeros(grid.n)
    rho[:-1] += 0.5 * cell
    rho[1:] += 0.5 * cell
    vals = rho / measure.lebesgue_density
    vals = vals / measure.integrate(vals)
    return DensityField(vals, measure)


def displacement(mu: DensityField, nu: DensityField, s_samples) -> DisplacementPath:
    _check_pair(mu, nu)
    if mu.grid.is_circle:
        raise ValueError("displacement interpolation is implemented on the line")
    s_samples = np.asarray(s_samples, dtype=float)
    if np.any((s_samples < 0) | (s_samples > 1)):
        raise ValueError("interpolation parameters lie in [0, 1]")
    qa, qb = QuantileRep.from_density(mu), QuantileRep.from_density(nu)
    dens, quants = [], []
    for s in s_samples:
        q = qa.combine(qb, s, 1.0 - s)
        quants.append(q)
        if s == 1.0:
            dens.append(mu)
        elif s == 0.0:
            dens.append(nu)
        else:
            dens.append(density_from_quantile(q, mu.measure))
    return DisplacementPath(s_samples, dens, quants)


def evolve_density(sg, t, f: DensityField) -> DensityField:
    """``P_t f`` as a density for the invariant measure (renormalized)."""
    if not sg.measure.probability:
        raise ValueError("needs a probability invariant measure")
    vals = apply_values(sg, t, f.values, tail="zero")
    vals = np.maximum(vals, 0.0)
    return DensityField(vals / sg.measure.integrate(vals), sg.measure)


def kuwada_gap(sg, f: DensityField, t: float) -> float:
    """``t [Ent(f) - Ent(P_t f)] - W2(P_t f mu, f mu)^2``."""
    if not sg.measure.probability:
        raise ValueError("Lebesgue-measure semigroups are not supported")
    if not t > 0:
        raise ValueError("t must be positive")
    ptf = evolve_density(sg, t, f)
    return t * (entropy(f) - entropy(ptf)) - w2_squared(ptf, f)
