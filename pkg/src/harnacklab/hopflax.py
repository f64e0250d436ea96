"""Hopf-Lax infimum-convolution ``Q_s f(x) = min_y f(y) + d(x, y)^2 / 2s``.

The minimum runs over grid nodes. On the line it is computed by the
lower-envelope-of-parabolas sweep (Felzenszwalb-Huttenlocher distance
transform) in linear time; on the circle the nodes are unrolled three times
over ``[-L, 2L)`` and the middle block is kept.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .fields import Grid, ScalarField
from .semigroup import EUCLIDEAN, GENERIC, Semigroup, log_apply_exp


class InfConvResult(NamedTuple):
    field: ScalarField
    argmin: np.ndarray


def _envelope(x, f, s):
    """Lower envelope of ``f[p] + (x - x[p])^2 / 2s``; returns values and argmin."""
    xs = x.tolist()
    fs = f.tolist()
    n = len(fs)
    v = [0] * n
    z = [0.0] * (n + 1)
    z[0] = -np.inf
    z[1] = np.inf
    k = 0
    for q in range(1, n):
        xq, fq = xs[q], fs[q]
        while True:
            p = v[k]
            # abscissa where the parabolas of p and q cross
            cross = s * (fq - fs[p]) / (xq - xs[p]) + 0.5 * (xq + xs[p])
            if cross <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        k += 1
        v[k] = q
        z[k] = cross if k > 0 else -np.inf
        z[k + 1] = np.inf
    out = [0.0] * n
    arg = [0] * n
    k = 0
    inv = 1.0 / (2.0 * s)
    for i in range(n):
        xi = xs[i]
        while z[k + 1] < xi:
            k += 1
        p = v[k]
        d = xi - xs[p]
        out[i] = fs[p] + d * d * inv
        arg[i] = p
    return np.array(out), np.array(arg, dtype=np.intp)


def inf_conv(f: ScalarField, s: float) -> InfConvResult:
    """Exact node-restricted Hopf-Lax transform of ``f`` at time ``s``."""
    if not s > 0:
        raise ValueError("inf_conv needs s > 0")
    grid = f.grid
    if not grid.is_circle:
        vals, arg = _envelope(grid.x, f.values, s)
        return InfConvResult(f.with_values(vals), arg)
    n, L = grid.n, grid.length
    x3 = np.concatenate([grid.x - L, grid.x, grid.x + L])
    f3 = np.tile(f.values, 3)
    vals, arg = _envelope(x3, f3, s)
    return InfConvResult(f.with_values(vals[n:2 * n]), arg[n:2 * n] % n)


def brute_force_inf_conv(f: ScalarField, s: float) -> InfConvResult:
    """Dense ``O(n^2)`` evaluation of :func:`inf_conv`; the reference oracle."""
    if not s > 0:
        raise ValueError("inf_conv needs s > 0")
    grid = f.grid
    x = grid.x
    out = np.empty(grid.n)
    arg = np.empty(grid.n, dtype=np.intp)
    for start in range(0, grid.n, 512):
        rows = slice(start, min(grid.n, start + 512))
        # node coordinates differ by less than one period, so no reduction mod L is needed
        cost = np.abs(x[rows, None] - x[None, :])
        if grid.is_circle:
            np.minimum(cost, grid.length - cost, out=cost)
        cost *= cost
        cost /= 2.0 * s
        cost += f.values[None, :]
        arg[rows] = np.argmin(cost, axis=1)
        out[rows] = cost[np.arange(cost.shape[0]), arg[rows]]
    return InfConvResult(f.with_values(out), arg)


def _signed_offset(grid: Grid, x, y):
    """``x - y`` on the line, its shortest representative on the circle."""
    diff = np.asarray(x) - np.asarray(y)
    if grid.is_circle:
        L = grid.length
        diff = diff - L * np.round(diff / L)
    return diff


def hj_residual(f: ScalarField, s: float, ds: float, gap=1e-9):
    """Residual of ``du/ds + |u'|^2 / 2 = 0`` for ``u = Q_s f``.

    The time derivative is a centred difference; the slope is that of the
    active parabola, ``(x - y*)/s``. Nodes are dropped where the minimizer is
    on a segment end, jumps between neighbours (a shock), or is not unique up
    to ``gap`` among the minimizers seen at neighbouring nodes and times.

    Returns
    -------
    residual : ScalarField
        Zero off the reported sub-grid.
    valid : ndarray of bool
    """
    if not (s > ds > 0):
        raise ValueError("hj_residual needs s > ds > 0")
    grid = f.grid
    x = grid.x
    n = grid.n
    mid = inf_conv(f, s)
    hi = inf_conv(f, s + ds)
    lo = inf_conv(f, s - ds)
    ystar = x[mid.argmin]
    slope = _signed_offset(grid, x, ystar) / s
    res = (hi.field.values - lo.field.values) / (2 * ds) + 0.5 * slope**2

    arg = mid.argmin
    valid = np.ones(n, dtype=bool)
    if not grid.is_circle:
        valid &= (arg > 0) & (arg < n - 1)
        valid[[0, -1]] = False
    # neighbours' and nearby times' minimizers competing at this node
    cands = [np.roll(arg, 1), np.roll(arg, -1), hi.argmin, lo.argmin]
    for j, c in enumerate(cands):
        jump = np.abs(_signed_offset(grid, x[c], ystar)) > 2.5 * grid.h
        d = _signed_offset(grid, x, x[c])
        other = f.values[c] + d * d / (2 * s)
        valid &= ~(jump & (other - mid.field.values < gap))
        if j < 2:
            valid &= ~jump
    out = np.where(valid, res, 0.0)
    return ScalarField(grid, out), valid


def semigroup_property_gap(f: ScalarField, t: float, s: float) -> float:
    """``sup |Q_t Q_s f - Q_{t+s} f|`` over nodes."""
    if not (t > 0 and s > 0):
        raise ValueError("t and s must be positive")
    two = inf_conv(inf_conv(f, s).field, t).field.values
    one = inf_conv(f, t + s).field.values
    return float(np.max(np.abs(two - one)))


@dataclass(frozen=True)
class ViscousConfig:
    """Viscosity ``epsilon`` and the diffusion used in ``-2 eps log P_{eps t} exp(-f / 2 eps)``."""

    epsilon: float
    semigroup: Semigroup

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.semigroup.kind not in (EUCLIDEAN, GENERIC):
            raise ValueError("the viscous transform uses the heat semigroup matching d")

    @classmethod
    def for_grid(cls, grid, epsilon):
        if grid.is_circle:
            return cls(epsilon, Semigroup.flat_circle(grid))
        return cls(epsilon, Semigroup.euclidean(grid))


def viscous_infconv(cfg: ViscousConfig, f: ScalarField, t: float) -> ScalarField:
    """Vanishing-viscosity approximation of ``Q_t f``; log-sum-exp throughout."""
    if not t > 0:
        raise ValueError("t must be positive")
    eps = cfg.epsilon
    g = -f.values / (2 * eps)
    return f.with_values(-2 * eps * log_apply_exp(cfg.semigroup, eps * t, g))
