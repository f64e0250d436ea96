"""Grids, fields, measures and the discrete calculus used by every engine.

Two model spaces are supported: a segment of the real line (fields are
extended beyond the segment according to a declared tail policy) and a circle
of circumference ``L`` with its geodesic distance.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import xlogy

FISHER_FLOOR = 1e-30
_MASS_TOL = 1e-6


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a segment ``[a, b]`` (kind ``"line"``) or a circle ``[0, L)``."""

    kind: str
    n: int
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("line", "circle"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.n < 16:
            raise ValueError("grids need at least 16 nodes")
        if not self.b > self.a:
            raise ValueError("empty grid extent")

    @classmethod
    def line(cls, a, b, n):
        return cls("line", int(n), float(a), float(b))

    @classmethod
    def circle(cls, length, n):
        return cls("circle", int(n), 0.0, float(length))

    @property
    def is_circle(self):
        return self.kind == "circle"

    @property
    def length(self):
        return self.b - self.a

    @property
    def h(self):
        if self.is_circle:
            return self.length / self.n
        return self.length / (self.n - 1)

    @property
    def x(self):
        if self.is_circle:
            return self.a + self.h * np.arange(self.n)
        return np.linspace(self.a, self.b, self.n)

    def quadrature(self):
        """Trapezoid weights on the line, rectangle weights on the circle."""
        w = np.full(self.n, self.h)
        if not self.is_circle:
            w[0] = w[-1] = 0.5 * self.h
        return w

    def refined(self, factor=2):
        """Same domain with the spacing divided by ``factor``."""
        if self.is_circle:
            return Grid.circle(self.length, self.n * factor)
        return Grid.line(self.a, self.b, (self.n - 1) * factor + 1)

    def index_of(self, x):
        """Index of the node nearest to coordinate ``x``."""
        x = np.asarray(x, dtype=float)
        if self.is_circle:
            idx = np.rint((x - self.a) / self.h).astype(int) % self.n
        else:
            idx = np.clip(np.rint((x - self.a) / self.h).astype(int), 0, self.n - 1)
        return int(idx) if idx.ndim == 0 else idx


def geodesic_distance(grid: Grid, x, y):
    """Distance on the model space; ``x`` and ``y`` are coordinates."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    if grid.is_circle:
        d = np.mod(d, grid.length)
        d = np.minimum(d, grid.length - d)
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Samples of a function at the grid nodes.

    ``tail`` says how the function continues beyond a line segment:
    ``"constant"`` repeats the end values, ``"zero"`` sets it to 0.
    """

    grid: Grid
    values: np.ndarray
    tail: str = "constant"

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if self.tail not in ("constant", "zero"):
            raise ValueError(f"unknown tail policy {self.tail!r}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid, func, tail="constant"):
        return cls(grid, np.asarray(func(grid.x), dtype=float) * np.ones(grid.n), tail)

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.n, float(c)))

    def with_values(self, values):
        return ScalarField(self.grid, values, self.tail)

    def map(self, func):
        return self.with_values(func(self.values))

    def __len__(self):
        return self.grid.n

    def to_text(self):
        return columns_to_text(self.grid, self.values)


def columns_to_text(grid, *columns, header=None):
    """Flat columnar text: node coordinate followed by one column per array."""
    import io

    data = np.column_stack([grid.x] + [np.asarray(c, dtype=float) for c in columns])
    buf = io.StringIO()
    np.savetxt(buf, data, fmt="%.17g", header=header or "", comments="# ")
    return buf.getvalue()


def field_from_text(grid, text, column=1, tail="constant"):
    """Inverse of :meth:`ScalarField.to_text` for the given column."""
    import io

    data = np.loadtxt(io.StringIO(text), ndmin=2)
    if data.shape[0] != grid.n or not np.allclose(data[:, 0], grid.x, rtol=0, atol=1e-12 * max(1.0, abs(grid.b))):
        raise ValueError("text does not match the grid nodes")
    return ScalarField(grid, data[:, column], tail)


@dataclass(frozen=True, eq=False)
class Measure:
    """Reference measure: node weights approximating ``exp(-V) dx`` or ``dx``."""

    grid: Grid
    kind: str
    weights: np.ndarray
    potential: Optional[ScalarField] = None
    probability: bool = False

    def __post_init__(self):
        w = _frozen(self.weights)
        if np.any(w <= 0):
            raise ValueError("measure weights must be positive")
        if self.probability and abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"probability weights sum to {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def lebesgue(cls, grid):
        return cls(grid, "lebesgue", grid.quadrature())

    @classmethod
    def gaussian(cls, grid):
        """Standard Gaussian measure on a line grid."""
        if grid.is_circle:
            raise ValueError("the Gaussian measure lives on the line")
        x = grid.x
        V = ScalarField(grid, 0.5 * x * x + 0.5 * np.log(2 * np.pi))
        return cls(grid, "weighted", grid.quadrature() * np.exp(-V.values), V, True)

    @classmethod
    def gibbs(cls, grid, potential: ScalarField):
        """Normalized ``exp(-V)`` on a circle (or line) grid."""
        V = potential.values
        w = grid.quadrature() * np.exp(-(V - V.min()))
        w = w / w.sum()
        shift = np.log(np.sum(grid.quadrature() * np.exp(-(V - V.min())))) - V.min()
        pot = ScalarField(grid, V + shift)
        return cls(grid, "weighted", w, pot, True)

    @property
    def lebesgue_density(self):
        """Density of the measure with respect to ``dx`` at the nodes."""
        if self.potential is None:
            return np.ones(self.grid.n)
        return np.exp(-self.potential.values)

    def integrate(self, values):
        return float(np.dot(np.asarray(values, dtype=float), self.weights))


@dataclass(frozen=True, eq=False)
class DensityField:
    """Non-negative density with respect to a reference measure."""

    values: np.ndarray
    measure: Measure
    normalized: bool = True

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.measure.grid.n,):
            raise ValueError("density does not match the grid")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("densities must be finite and non-negative")
        if self.normalized and abs(self.mass - 1.0) > 1e-8:
            raise ValueError(f"density not normalized (mass {self.mass!r})")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, measure, func, normalize=True):
        vals = np.asarray(func(measure.grid.x), dtype=float)
        if normalize:
            vals = vals / measure.integrate(vals)
        return cls(vals, measure, normalize)

    @classmethod
    def from_lebesgue(cls, measure, rho, normalize=True):
        """Density given w.r.t. ``dx``, converted to the reference measure."""
        rho = np.asarray(rho, dtype=float)
        return cls.from_function(measure, lambda x: rho / measure.lebesgue_density, normalize)

    @property
    def grid(self):
        return self.measure.grid

    @property
    def mass(self):
        return self.measure.integrate(self.values)

    @property
    def field(self):
        return ScalarField(self.grid, self.values, "zero")

    @property
    def lebesgue_values(self):
        """Density of ``f mu`` with respect to ``dx``."""
        return self.values * self.measure.lebesgue_density

    def normalize(self):
        return DensityField(self.values / self.mass, self.measure, True)


def grad(f: ScalarField) -> ScalarField:
    """Central differences; periodic on the circle, second-order one-sided at line ends."""
    v = f.values
    h = f.grid.h
    if f.grid.is_circle:
        d = (np.roll(v, -1) - np.roll(v, 1)) / (2 * h)
    else:
        d = np.gradient(v, h, edge_order=2)
    return f.with_values(d)


def entropy(f: DensityField) -> float:
    """``sum f log f`` against the measure weights, with ``0 log 0 = 0``."""
    return float(np.dot(xlogy(f.values, f.values), f.measure.weights))


class FisherInfo(NamedTuple):
    value: float
    floor_hit: bool


def fisher_info(f: DensityField, floor=FISHER_FLOOR) -> FisherInfo:
    """Fisher information ``sum |grad f|^2 / f`` against the measure weights.

    Nodes where ``f <= floor`` but the gradient is non-zero set ``floor_hit``.
    """
    g = grad(f.field).values
    denom = np.maximum(f.values, floor)
    hit = bool(np.any((f.values <= floor) & (g != 0)))
    return FisherInfo(float(np.dot(g * g / denom, f.measure.weights)), hit)


def _merge_intervals(intervals):
    ivs = sorted((float(lo), float(hi)) for lo, hi in intervals if hi >= lo)
    out = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _merge_arcs(arcs, L):
    """Merge arcs ``(lo, hi)`` on a circle; returns None for the full circle."""
    norm = []
    for lo, hi in arcs:
        if hi - lo >= L:
            return None
        lo0 = lo % L
        norm.append((lo0, lo0 + (hi - lo)))
    norm.sort()
    merged = []
    for lo, hi in norm:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    # wrap-around: the last arc may reach past L into the first one
    while len(merged) > 1 and merged[-1][1] >= merged[0][0] + L:
        lo, hi = merged.pop()
        first = merged.pop(0)
        merged.append((lo, max(hi, first[1] + L)))
        merged.sort()
    if any(hi - lo >= L for lo, hi in merged):
        return None
    return merged


@dataclass(frozen=True, eq=False)
class RegionMask:
    """A set on the model space: a finite union of closed intervals (or arcs).

    ``member`` marks the nodes inside the set. Masks built from node booleans
    get intervals whose endpoints are nodes; on the line a run touching an end
    of the segment is continued to infinity, matching the constant tail policy.
    """

    grid: Grid
    intervals: tuple
    full: bool = False

    @classmethod
    def from_intervals(cls, grid, intervals):
        if grid.is_circle:
            arcs = _merge_arcs(intervals, grid.length)
            if arcs is None:
                return cls(grid, (), True)
            return cls(grid, tuple(arcs))
        return cls(grid, tuple(_merge_intervals(intervals)))

    @classmethod
    def from_members(cls, grid, member):
        member = np.asarray(member, dtype=bool)
        if member.shape != (grid.n,):
            raise ValueError("mask does not match the grid")
        x = grid.x
        if grid.is_circle and member.all():
            return cls(grid, (), True)
        idx = np.flatnonzero(member)
        if idx.size == 0:
            return cls(grid, ())
        runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        ivs = []
        for r in runs:
            lo, hi = x[r[0]], x[r[-1]]
            if not grid.is_circle:
                if r[0] == 0:
                    lo = -np.inf
                if r[-1] == grid.n - 1:
                    hi = np.inf
            ivs.append((lo, hi))
        if grid.is_circle and len(ivs) > 1 and member[0] and member[-1]:
            last = ivs.pop()
            first = ivs.pop(0)
            ivs.append((last[0], first[1] + grid.length))
        return cls.from_intervals(grid, ivs)

    @property
    def member(self):
        return self.contains(self.grid.x)

    @property
    def is_empty(self):
        return not self.full and len(self.intervals) == 0

    def contains(self, x, slack=1e-12):
        x = np.asarray(x, dtype=float)
        if self.full:
            return np.ones(x.shape, dtype=bool)
        out = np.zeros(x.shape, dtype=bool)
        tol = slack * max(1.0, abs(self.grid.a), abs(self.grid.b))
        for lo, hi in self.intervals:
            if self.grid.is_circle:
                out |= np.mod(x - lo + tol, self.grid.length) <= hi - lo + 2 * tol
            else:
                out |= (x >= lo - tol) & (x <= hi + tol)
        return out

    def complement(self):
        """Closure of the complement (differs from the true complement by a null set)."""
        if self.full:
            return RegionMask(self.grid, ())
        if self.is_empty:
            if self.grid.is_circle:
                return RegionMask(self.grid, (), True)
            return RegionMask(self.grid, ((-np.inf, np.inf),))
        ivs = self.intervals
        gaps = []
        if self.grid.is_circle:
            L = self.grid.length
            for (_, hi), (lo, _) in zip(ivs, ivs[1:] + (( ivs[0][0] + L, None),)):
                if lo > hi:
                    gaps.append((hi, lo))
            return RegionMask.from_intervals(self.grid, gaps)
        edges = [-np.inf] + [e for iv in ivs for e in iv] + [np.inf]
        for lo, hi in zip(edges[::2], edges[1::2]):
            if hi > lo:
                gaps.append((lo, hi))
        return RegionMask(self.grid, tuple(gaps))

    def coverage(self):
        """Fraction of each node's cell ``[x - h/2, x + h/2]`` lying in the set."""
        grid = self.grid
        if self.full:
            return np.ones(grid.n)
        x, h = grid.x, grid.h
        left, right = x - 0.5 * h, x + 0.5 * h
        out = np.zeros(grid.n)
        shifts = (-grid.length, 0.0, grid.length) if grid.is_circle else (0.0,)
        for lo, hi in self.intervals:
            for sh in shifts:
                out += np.clip(np.minimum(right, hi + sh) - np.maximum(left, lo + sh), 0.0, None)
        return np.clip(out / h, 0.0, 1.0)

    def distance(self, x):
        """Geodesic distance from coordinates ``x`` to the set."""
        x = np.asarray(x, dtype=float)
        if self.full:
            return np.zeros(x.shape)
        d = np.full(x.shape, np.inf)
        L = self.grid.length
        for lo, hi in self.intervals:
            if self.grid.is_circle:
                off = np.mod(x - lo, L)
                inside = off <= hi - lo
                dd = np.minimum(np.abs(off - (hi - lo)), L - off)
                d = np.minimum(d, np.where(inside, 0.0, dd))
            else:
                d = np.minimum(d, np.maximum(0.0, np.maximum(lo - x, x - hi)))
        return d


def neighborhood(mask: RegionMask, eps: float) -> RegionMask:
    """Closed ``eps``-neighborhood of the set in the geodesic distance."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0 or mask.full or mask.is_empty:
        return mask
    return RegionMask.from_intervals(mask.grid, [(lo - eps, hi + eps) for lo, hi in mask.intervals])


@dataclass(frozen=True, eq=False)
class DistributionFunction:
    """Right-continuous step distribution function with atoms at ``support``.

    ``atom_masses`` optionally keeps the individual atom masses; masses far in
    the upper tail cannot be recovered from differences of a cumulative sum
    that has already rounded to 1.
    """

    support: np.ndarray
    cumulative: np.ndarray
    atom_masses: Optional[np.ndarray] = None

    def __post_init__(self):
        r = _frozen(self.support)
        F = _frozen(self.cumulative)
        if r.shape != F.shape or r.size == 0:
            raise ValueError("support and cumulative masses must align")
        if np.any(np.diff(r) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(np.diff(F) < 0) or F[0] < 0:
            raise ValueError("distribution function must be non-decreasing")
        if abs(F[-1] - 1.0) > 1e-10:
            raise ValueError(f"final mass {F[-1]!r} differs from 1")
        object.__setattr__(self, "support", r)
        object.__setattr__(self, "cumulative", F)
        if self.atom_masses is not None:
            m = _frozen(self.atom_masses)
            if m.shape != r.shape or np.any(m < 0):
                raise ValueError("atom masses must be non-negative and align with the support")
            object.__setattr__(self, "atom_masses", m)

    @classmethod
    def from_atoms(cls, values, masses):
        values = np.asarray(values, dtype=float)
        masses = np.asarray(masses, dtype=float)
        r, inv = np.unique(values, return_inverse=True)
        m = np.bincount(inv.ravel(), weights=masses.ravel(), minlength=r.size)
        m = m / m.sum()
        F = np.cumsum(m)
        F = F / F[-1]
        return cls(r, F, m)

    @property
    def masses(self):
        if self.atom_masses is not None:
            return self.atom_masses
        return np.diff(np.concatenate([[0.0], self.cumulative]))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(self.support, r, side="right") - 1
        out = np.where(idx >= 0, self.cumulative[np.clip(idx, 0, None)], 0.0)
        return float(out) if out.ndim == 0 else out

    def expect(self, func=None):
        """Stieltjes integral of ``func(r)`` (identity by default) against ``dF``."""
        vals = self.support if func is None else func(self.support)
        return float(np.dot(vals, self.masses))


def kernel_cdf(sg, t: float, f: ScalarField, y: int) -> DistributionFunction:
    """Law of ``f`` under the kernel of ``sg`` at time ``t`` started at node ``y``."""
    if t <= 0:
        raise ValueError("kernel_cdf needs t > 0")
    row = sg.kernel_row(t, y)
    total = row.sum()
    if abs(total - 1.0) > _MASS_TOL:
        raise ValueError(f"kernel row at node {y} has mass {total!r}")
    return DistributionFunction.from_atoms(f.values, row)
