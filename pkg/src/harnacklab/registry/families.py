"""Versioned suites of test functions, sets and densities.

Every function carries its analytic derivative so that checks involving
``|grad f|`` are not polluted by finite differences of the input. Suites are
built for a given grid: on a circle the trigonometric members use the
circle's own frequencies and the rest are made periodic.
"""

from typing import Callable, NamedTuple

import numpy as np
from scipy.special import ndtr

from ..fields import DensityField, Grid, RegionMask
from ..scalar import norm_pdf

FAMILY_VERSION = 1

_SQRT2PI = np.sqrt(2 * np.pi)


class TestFunction(NamedTuple):
    name: str
    value: Callable
    deriv: Callable

    def __call__(self, x):
        return self.value(x)


class TestSet(NamedTuple):
    name: str
    intervals: tuple

    def mask(self, grid):
        return RegionMask.from_intervals(grid, self.intervals)


class TestDensity(NamedTuple):
    name: str
    density: DensityField


def _gauss_bump(c, w, floor):
    def val(x):
        return floor + np.exp(-0.5 * ((x - c) / w) ** 2)

    def der(x):
        return -(x - c) / w**2 * np.exp(-0.5 * ((x - c) / w) ** 2)

    return TestFunction(f"bump(c={c:g},w={w:g},floor={floor:g})", val, der)


def _trig(a, k, b, phase=0.0):
    return TestFunction(
        f"{b:g}+{a:g}sin({k:g}x+{phase:g})",
        lambda x: b + a * np.sin(k * x + phase),
        lambda x: a * k * np.cos(k * x + phase),
    )


def _exp(beta):
    return TestFunction(f"exp({beta:g}x)", lambda x: np.exp(beta * x), lambda x: beta * np.exp(beta * x))


def _probit_ramp(c, w, sign=1.0):
    return TestFunction(
        f"Phi({sign:+g}(x-{c:g})/{w:g})",
        lambda x: ndtr(sign * (x - c) / w),
        lambda x: sign / w * norm_pdf(sign * (x - c) / w),
    )


def _affine(a, b):
    return TestFunction(f"{a:g}x+{b:g}", lambda x: a * x + b, lambda x: np.full(np.shape(x), float(a)))


def _clipped_quadratic(c, cap):
    return TestFunction(
        f"min({c:g}x^2,{cap:g})",
        lambda x: np.minimum(c * x * x, cap),
        lambda x: np.where(c * x * x < cap, 2 * c * x, 0.0),
    )


def _tanh(k):
    return TestFunction(f"tanh({k:g}x)", lambda x: np.tanh(k * x), lambda x: k / np.cosh(k * x) ** 2)


def _random_smooth(rng, period, modes, scale, offset, label):
    """Seeded trigonometric polynomial with decaying amplitudes."""
    ks = np.arange(1, modes + 1)
    amp = rng.normal(size=(2, modes)) / ks**2
    w = 2 * np.pi * ks / period

    def val(x):
        x = np.asarray(x, dtype=float)[..., None]
        return offset + scale * np.sum(amp[0] * np.cos(w * x) + amp[1] * np.sin(w * x), axis=-1)

    def der(x):
        x = np.asarray(x, dtype=float)[..., None]
        return scale * np.sum(w * (-amp[0] * np.sin(w * x) + amp[1] * np.cos(w * x)), axis=-1)

    return TestFunction(label, val, der)


def _circle_trig(grid, a, m, b, phase=0.0):
    k = 2 * np.pi * m / grid.length
    return _trig(a, k, b, phase)


def functions(name: str, grid: Grid, seed: int = 0):
    """Test functions of suite ``name`` adapted to ``grid``.

    Suites: ``positive`` (bounded below by a positive constant), ``unit``
    (valued in ``[0, 1]``), ``bounded`` (real valued, for infimum
    convolutions), ``smooth`` (for pointwise curvature identities).
    """
    rng = np.random.default_rng([FAMILY_VERSION, seed, sum(map(ord, name))])
    circ = grid.is_circle
    L = grid.length
    if name == "positive":
        if circ:
            out = [_circle_trig(grid, 0.5, 1, 1.0), _circle_trig(grid, 0.9, 2, 1.0, 0.3)]
            c = grid.a + 0.5 * L
            out.append(
                TestFunction(
                    "exp(2cos(x-c))",
                    lambda x: np.exp(2 * np.cos(2 * np.pi * (x - c) / L)),
                    lambda x: -4 * np.pi / L * np.sin(2 * np.pi * (x - c) / L)
                    * np.exp(2 * np.cos(2 * np.pi * (x - c) / L)),
                )
            )
            out.append(_random_smooth(rng, L, 6, 0.4, 1.0, f"random-positive(seed={seed})"))
            return out
        return [
            _gauss_bump(0.0, 0.3, 1e-3),
            _gauss_bump(1.0, 1.0, 0.05),
            _trig(0.5, 1.0, 1.0),
            _exp(0.7),
            _exp(-1.5),
            _random_smooth(rng, 8.0, 6, 0.3, 1.0, f"random-positive(seed={seed})"),
        ]
    if name == "unit":
        if circ:
            return [
                _circle_trig(grid, 0.45, 1, 0.5),
                _circle_trig(grid, 0.3, 3, 0.5, 1.0),
                TestFunction(
                    "exp(cos(x)-1)",
                    lambda x: np.exp(np.cos(2 * np.pi * x / L) - 1),
                    lambda x: -2 * np.pi / L * np.sin(2 * np.pi * x / L) * np.exp(np.cos(2 * np.pi * x / L) - 1),
                ),
            ]
        return [
            _probit_ramp(0.0, 0.5),
            _probit_ramp(0.0, 2.0),
            _probit_ramp(1.0, 1.0, -1.0),
            _trig(0.45, 1.0, 0.5),
            _gauss_bump(0.0, 0.7, 0.0),
            TestFunction(
                "Phi(x+1)Phi(1-x)",
                lambda x: ndtr(x + 1) * ndtr(1 - x),
                lambda x: norm_pdf(x + 1) * ndtr(1 - x) - ndtr(x + 1) * norm_pdf(1 - x),
            ),
        ]
    if name == "bounded":
        if circ:
            return [
                _circle_trig(grid, 1.0, 1, 0.0),
                _circle_trig(grid, 0.5, 2, 0.0, 0.7),
                TestFunction(
                    "min(4sin^2(x/2),1.5)",
                    lambda x: np.minimum(4 * np.sin(np.pi * x / L) ** 2, 1.5),
                    lambda x: np.where(
                        4 * np.sin(np.pi * x / L) ** 2 < 1.5,
                        4 * np.pi / L * np.sin(2 * np.pi * x / L),
                        0.0,
                    ),
                ),
                _random_smooth(rng, L, 6, 1.0, 0.0, f"random-bounded(seed={seed})"),
            ]
        return [
            _affine(0.7, 0.0),
            _clipped_quadratic(1.0, 4.0),
            TestFunction(
                "max(-x^2/4,-4)",
                lambda x: np.maximum(-0.25 * x * x, -4.0),
                lambda x: np.where(-0.25 * x * x > -4.0, -0.5 * x, 0.0),
            ),
            _trig(1.0, 1.0, 0.0),
            _tanh(2.0),
            _random_smooth(rng, 8.0, 6, 1.0, 0.0, f"random-bounded(seed={seed})"),
        ]
    if name == "smooth":
        if circ:
            return [
                _circle_trig(grid, 1.0, 1, 0.0),
                _circle_trig(grid, 0.5, 3, 0.0, 0.4),
                _random_smooth(rng, L, 5, 1.0, 0.0, f"random-smooth(seed={seed})"),
            ]
        return [
            _trig(1.0, 1.0, 0.0),
            _trig(0.5, 2.0, 0.0, 0.3),
            _gauss_bump(0.0, 1.0, 0.0),
            _tanh(1.0),
            _affine(1.3, -0.2),
            TestFunction("x^2/2", lambda x: 0.5 * x * x, lambda x: x),
        ]
    raise KeyError(f"unknown function family {name!r}")


def sets(grid: Grid):
    """Half-lines, intervals and finite unions (arcs on the circle)."""
    if grid.is_circle:
        L = grid.length
        return [
            TestSet("arc(0,L/4)", ((0.0, 0.25 * L),)),
            TestSet("arc(L/2,L/2+0.3)", ((0.5 * L, 0.5 * L + 0.3),)),
            TestSet("two-arcs", ((0.1 * L, 0.2 * L), (0.55 * L, 0.7 * L))),
        ]
    return [
        TestSet("(-inf,0]", ((-np.inf, 0.0),)),
        TestSet("[0.5,inf)", ((0.5, np.inf),)),
        TestSet("[-1,1]", ((-1.0, 1.0),)),
        TestSet("[-3,-2]u[0,1]", ((-3.0, -2.0), (0.0, 1.0))),
        TestSet("[-0.1,0.1]", ((-0.1, 0.1),)),
    ]


def densities(name: str, measure, seed: int = 0):
    """Probability densities with respect to ``measure``.

    ``gaussian-ratio``: Lebesgue densities of ``N(m, s^2)`` divided by the
    reference density; ``smooth``: positive periodic perturbations (circle) or
    mixtures (line).
    """
    grid = measure.grid
    rng = np.random.default_rng([FAMILY_VERSION, seed, sum(map(ord, name))])
    x = grid.x
    out = []
    if name == "gaussian-ratio":
        if grid.is_circle:
            raise KeyError("gaussian-ratio densities live on the line")
        for m, s in [(0.5, 1.0), (-1.0, 1.0), (2.0, 1.0), (0.0, 0.6), (1.0, 1.4)]:
            rho = np.exp(-0.5 * ((x - m) / s) ** 2) / (s * _SQRT2PI)
            out.append(TestDensity(f"N({m:g},{s:g}^2)", DensityField.from_lebesgue(measure, rho)))
        return out
    if name == "smooth":
        if grid.is_circle:
            L = grid.length
            th = 2 * np.pi * (x - grid.a) / L
            specs = [("1+0.5cos", 1 + 0.5 * np.cos(th)), ("vonmises(3,1)", np.exp(3 * np.cos(th - 1.0))),
                     ("vonmises(1,4)", np.exp(np.cos(th - 4.0)))]
            f = _random_smooth(rng, L, 5, 0.5, 0.0, "")
            specs.append((f"exp-random(seed={seed})", np.exp(f(x))))
            for label, v in specs:
                out.append(TestDensity(label, DensityField.from_function(measure, lambda _x, v=v: v)))
            return out
        mixes = [("mix(-1,1)", [(-1.0, 0.7, 0.5), (1.0, 0.7, 0.5)]), ("mix(0,2;skew)", [(0.0, 1.0, 0.7), (2.0, 0.5, 0.3)])]
        for label, comps in mixes:
            rho = sum(wt * np.exp(-0.5 * ((x - m) / s) ** 2) / (s * _SQRT2PI) for m, s, wt in comps)
            out.append(TestDensity(label, DensityField.from_lebesgue(measure, rho)))
        return out
    raise KeyError(f"unknown density family {name!r}")
