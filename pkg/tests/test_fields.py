import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from harnacklab.fields import (
    DensityField,
    DistributionFunction,
    Grid,
    Measure,
    RegionMask,
    ScalarField,
    entropy,
    field_from_text,
    fisher_info,
    geodesic_distance,
    grad,
    kernel_cdf,
    neighborhood,
)
from harnacklab.semigroup import Semigroup, apply


# -- grids ---------------------------------------------------------------------


def test_grid_spacing_and_nodes():
    g = Grid.line(-1, 1, 21)
    assert g.h == pytest.approx(0.1)
    assert np.all(np.diff(g.x) > 0)
    c = Grid.circle(10.0, 20)
    assert c.h == 0.5 and c.x[-1] == pytest.approx(9.5)


def test_grid_rejects_small_or_empty():
    with pytest.raises(ValueError):
        Grid.line(0, 1, 8)
    with pytest.raises(ValueError):
        Grid.line(1, 1, 32)


def test_refined_grid_keeps_nodes():
    g = Grid.line(-2, 3, 51)
    assert np.allclose(g.refined(2).x[::2], g.x)
    c = Grid.circle(2 * np.pi, 32)
    assert np.allclose(c.refined(4).x[::4], c.x)


# -- geodesic distance ---------------------------------------------------------


def test_geodesic_distance_examples():
    line = Grid.line(0, 10, 101)
    circ = Grid.circle(10.0, 100)
    assert geodesic_distance(line, 3.0, 3.0) == 0.0
    assert geodesic_distance(circ, 1.0, 9.0) == pytest.approx(2.0)
    assert geodesic_distance(circ, 0.0, 5.0) == pytest.approx(5.0)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_circle_distance_is_a_metric(x, y, z):
    g = Grid.circle(10.0, 64)
    dxy = geodesic_distance(g, x, y)
    assert dxy == pytest.approx(geodesic_distance(g, y, x))
    assert 0 <= dxy <= 5.0 + 1e-12
    assert dxy <= geodesic_distance(g, x, z) + geodesic_distance(g, z, y) + 1e-12


# -- fields and text format ----------------------------------------------------


def test_scalar_field_validation():
    g = Grid.line(0, 1, 17)
    with pytest.raises(ValueError):
        ScalarField(g, np.ones(5))
    with pytest.raises(ValueError):
        ScalarField(g, np.full(17, np.nan))
    f = ScalarField.constant(g, 2.0)
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_field_text_round_trip():
    g = Grid.line(-3, 3, 61)
    f = ScalarField.from_function(g, np.sin)
    back = field_from_text(g, f.to_text())
    assert np.array_equal(back.values, f.values)
    with pytest.raises(ValueError):
        field_from_text(Grid.line(-3, 3, 31), f.to_text())


# -- gradient ------------------------------------------------------------------


def test_grad_constant_and_affine():
    g = Grid.line(-2, 2, 41)
    assert np.all(grad(ScalarField.constant(g, 3.0)).values == 0)
    d = grad(ScalarField.from_function(g, lambda x: x)).values
    assert np.allclose(d, 1.0, atol=1e-12)


def _circle_grad_error(n, L=7.0):
    g = Grid.circle(L, n)
    k = 2 * np.pi / L
    d = grad(ScalarField.from_function(g, lambda x: np.sin(k * x))).values
    return np.max(np.abs(d - k * np.cos(k * g.x)))


def test_grad_second_order_on_circle():
    e1, e2 = _circle_grad_error(64), _circle_grad_error(128)
    assert e1 / e2 >= 3.5


def test_grad_second_order_on_line():
    def err(n):
        g = Grid.line(-1, 2, n)
        d = grad(ScalarField.from_function(g, np.exp)).values
        return np.max(np.abs(d - np.exp(g.x)))

    assert err(101) / err(201) >= 3.5


# -- measures and densities ----------------------------------------------------


def test_measures():
    g = Grid.line(-10, 10, 2001)
    gam = Measure.gaussian(g)
    assert gam.probability and gam.weights.sum() == pytest.approx(1.0, abs=1e-10)
    c = Grid.circle(2 * np.pi, 64)
    gib = Measure.gibbs(c, ScalarField.from_function(c, np.cos))
    assert gib.weights.sum() == pytest.approx(1.0, abs=1e-12)
    # potential is normalized so that exp(-V) dx integrates to 1
    assert np.sum(np.exp(-gib.potential.values) * c.quadrature()) == pytest.approx(1.0, rel=1e-12)


def test_density_validation():
    g = Grid.circle(1.0, 16)
    mu = Measure.gibbs(g, ScalarField.constant(g, 0.0))
    with pytest.raises(ValueError):
        DensityField(np.full(16, 2.0), mu)
    with pytest.raises(ValueError):
        DensityField(-np.ones(16), mu, normalized=False)


# -- entropy -------------------------------------------------------------------


def test_entropy_of_constant_is_zero():
    g = Grid.circle(2 * np.pi, 64)
    mu = Measure.gibbs(g, ScalarField.from_function(g, np.cos))
    assert entropy(DensityField(np.ones(64), mu)) == pytest.approx(0, abs=1e-14)


def test_entropy_of_gaussian_density():
    g = Grid.line(-10, 10, 4001)
    f = DensityField.from_function(Measure.lebesgue(g), norm.pdf)
    assert entropy(f) == pytest.approx(-0.5 * np.log(2 * np.pi * np.e), abs=1e-4)


def test_entropy_of_half_support_uniform():
    # equal weights; density 2 on half the nodes and 0 elsewhere
    g = Grid.circle(1.0, 16)
    mu = Measure.gibbs(g, ScalarField.constant(g, 0.0))
    f = DensityField(np.tile([2.0, 0.0], 8), mu)
    assert entropy(f) == pytest.approx(np.log(2), rel=1e-14)


@given(st.lists(st.floats(0, 5), min_size=32, max_size=32).filter(lambda v: sum(v) > 1e-3))
def test_entropy_nonnegative_against_probability(vals):
    g = Grid.circle(1.0, 32)
    mu = Measure.gibbs(g, ScalarField.from_function(g, lambda x: np.sin(2 * np.pi * x)))
    f = DensityField.from_function(mu, lambda x: np.array(vals))
    assert entropy(f) >= -1e-10


# -- Fisher information --------------------------------------------------------


def test_fisher_of_constant_is_zero():
    g = Grid.line(-10, 10, 401)
    f = DensityField.from_function(Measure.gaussian(g), lambda x: np.ones_like(x))
    fi = fisher_info(f)
    assert fi.value == 0 and not fi.floor_hit


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_fisher_of_gaussian(s):
    g = Grid.line(-10 * s, 10 * s, 4001)
    f = DensityField.from_function(Measure.lebesgue(g), lambda x: norm.pdf(x, scale=s))
    assert fisher_info(f).value == pytest.approx(1 / s**2, abs=1e-3)


def test_fisher_scaling_law():
    def fi(s):
        g = Grid.line(-20, 20, 8001)
        return fisher_info(DensityField.from_function(Measure.lebesgue(g), lambda x: norm.pdf(x, scale=s))).value

    assert fi(1.0) / fi(2.0) == pytest.approx(4.0, rel=1e-4)


def test_fisher_floor_flag():
    g = Grid.line(-1, 1, 33)
    vals = np.where(g.x > 0, 1.0, 0.0)
    f = DensityField.from_function(Measure.lebesgue(g), lambda x: vals)
    assert fisher_info(f).floor_hit


# -- masks and neighborhoods ---------------------------------------------------


def test_neighborhood_examples():
    g = Grid.line(-5, 5, 101)
    A = RegionMask.from_intervals(g, [(-np.inf, 0.0)])
    assert neighborhood(A, 0.0) is A
    B = neighborhood(A, 1.0)
    assert np.array_equal(B.member, g.x <= 1.0 + 1e-12)
    c = Grid.circle(10.0, 100)
    arc = RegionMask.from_intervals(c, [(2.0, 5.0)])
    assert neighborhood(arc, 4.0).full
    assert neighborhood(arc, 4.0).member.all()


def test_neighborhood_rejects_negative():
    g = Grid.line(-1, 1, 21)
    with pytest.raises(ValueError):
        neighborhood(RegionMask.from_intervals(g, [(0, 0.5)]), -0.1)


def test_neighborhood_matches_node_distance_definition():
    g = Grid.circle(10.0, 200)
    A = RegionMask.from_intervals(g, [(1.0, 2.0), (6.0, 6.5)])
    eps = 0.73
    brute = np.array([
        any(geodesic_distance(g, x, y) <= eps + 1e-12 for y in g.x[A.member]) for x in g.x
    ])
    # intervals are exact, the brute force only sees member nodes (one cell slack)
    got = neighborhood(A, eps).member
    assert np.all(brute <= got)
    assert np.all(neighborhood(A, eps - g.h).member <= brute)


@given(st.floats(0, 3), st.floats(0, 3), st.floats(0, 9), st.floats(0.1, 4))
def test_neighborhood_monotone_and_additive(a, b, lo, width):
    g = Grid.circle(10.0, 128)
    A = RegionMask.from_intervals(g, [(lo, lo + width)])
    small, big = sorted((a, b))
    assert np.all(neighborhood(A, small).member <= neighborhood(A, big).member)
    assert np.array_equal(neighborhood(neighborhood(A, a), b).member, neighborhood(A, a + b).member)


def test_mask_from_members_and_complement():
    g = Grid.circle(10.0, 40)
    member = (g.x < 2.0) | (g.x > 8.5)
    A = RegionMask.from_members(g, member)
    assert len(A.intervals) == 1
    assert np.array_equal(A.member, member)
    C = A.complement()
    assert np.all(A.member | C.member)
    assert np.sum(A.coverage() + C.coverage()) == pytest.approx(g.n)


def test_mask_distance():
    g = Grid.line(-5, 5, 101)
    A = RegionMask.from_intervals(g, [(0.0, 1.0)])
    assert np.allclose(A.distance(np.array([-2.0, 0.5, 3.0])), [2.0, 0.0, 2.0])


# -- distribution functions ----------------------------------------------------


def test_distribution_function_validation():
    with pytest.raises(ValueError):
        DistributionFunction(np.array([0.0, 1.0]), np.array([0.6, 0.5]))
    with pytest.raises(ValueError):
        DistributionFunction(np.array([0.0, 1.0]), np.array([0.2, 0.9]))
    with pytest.raises(ValueError):
        DistributionFunction(np.array([1.0, 0.0]), np.array([0.5, 1.0]))


def test_from_atoms_merges_ties_right_continuous():
    F = DistributionFunction.from_atoms([2.0, 1.0, 2.0], [1.0, 2.0, 1.0])
    assert np.array_equal(F.support, [1.0, 2.0])
    assert F(1.0) == pytest.approx(0.5)
    assert F(0.999) == 0.0
    assert F(2.0) == 1.0
    assert F.expect() == pytest.approx(1.5)


def test_kernel_cdf_constant_is_unit_jump():
    g = Grid.line(-10, 10, 401)
    sg = Semigroup.euclidean(g)
    F = kernel_cdf(sg, 0.5, ScalarField.constant(g, 3.0), 200)
    assert F.support.size == 1 and F(3.0) == 1.0 and F(2.99) == 0.0


def test_kernel_cdf_heat_identity_function():
    g = Grid.line(-12, 12, 4801)
    sg = Semigroup.euclidean(g)
    t = 0.5
    F = kernel_cdf(sg, t, ScalarField.from_function(g, lambda x: x), 2400)
    # atoms sit at nodes and carry the kernel mass of their cell; compare at cell edges
    r = g.x[1800:3001:20] + g.h / 2
    assert np.max(np.abs(F(r) - norm.cdf(r, scale=np.sqrt(2 * t)))) < 1e-6


def test_kernel_cdf_expectation_matches_apply():
    g = Grid.line(-12, 12, 1201)
    sg = Semigroup.euclidean(g)
    f = ScalarField.from_function(g, lambda x: np.tanh(x) + 0.1 * x)
    F = kernel_cdf(sg, 0.7, f, 500)
    assert F.expect() == pytest.approx(apply(sg, 0.7, f).values[500], abs=1e-8)


@pytest.mark.parametrize("kind", ["euclidean", "ou", "circle"])
@pytest.mark.parametrize("t", [1e-3, 0.1, 1.0, 10.0])
def test_kernel_cdf_total_mass(kind, t):
    if kind == "circle":
        g = Grid.circle(2 * np.pi, 64)
        sg = Semigroup.diffusion(g, 0.5 * np.cos(g.x))
        y = 10
    else:
        g = Grid.line(-10, 10, 401)
        sg = Semigroup.euclidean(g) if kind == "euclidean" else Semigroup.ornstein_uhlenbeck(g)
        y = 200
    F = kernel_cdf(sg, t, ScalarField.from_function(g, np.sin), y)
    assert F.masses.sum() == pytest.approx(1.0, abs=1e-8)


def test_kernel_cdf_rejects_zero_time():
    g = Grid.line(-1, 1, 21)
    with pytest.raises(ValueError):
        kernel_cdf(Semigroup.euclidean(g), 0.0, ScalarField.constant(g, 1.0), 3)
