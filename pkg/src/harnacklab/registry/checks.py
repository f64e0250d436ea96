"""Every inequality as a named check returning signed margins (RHS - LHS)."""

from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri, xlogy

from ..fields import DensityField, ScalarField, entropy, fisher_info, kernel_cdf, neighborhood
from ..hopflax import ViscousConfig, inf_conv, viscous_infconv
from ..scalar import EPS_CLAMP, iso_profile, kappa, sigma
from ..semigroup import (
    apply,
    apply_derivatives,
    apply_region,
    apply_values,
    gamma2_margin,
    generator,
    gradient_bound_margin,
    li_yau_margin,
    log_apply_exp,
    region_probit,
)
from ..transport import kuwada_gap, kantorovich_gap, w2_squared
from . import families
from .core import Check, Component, cosine_potential, node_component, pair_component

LINE_KINDS = ("euclidean", "ornstein-uhlenbeck")
ALL_KINDS = ("euclidean", "ornstein-uhlenbeck", "generic-diffusion")
PROBABILITY_KINDS = ("ornstein-uhlenbeck", "generic-diffusion")
#: (t, s) pairs for the dimensional forms; s = 0 compares with the initial datum
DEFAULT_TS = [[0.1, 0.1], [0.5, 0.1], [0.1, 0.5], [0.5, 0.5], [1.0, 0.25]]

_DENSITY_CACHE = {}


@lru_cache(maxsize=128)
def _function_table(family, grid, seed):
    return {f.name: f for f in families.functions(family, grid, seed)}


@lru_cache(maxsize=32)
def _set_table(grid):
    return {s.name: s for s in families.sets(grid)}


def _fn(cfg, name):
    return _function_table(cfg.family, cfg.semigroup().grid, cfg.seed)[name]


def _names(cfg):
    return list(_function_table(cfg.family, cfg.semigroup().grid, cfg.seed))


def _mask(cfg, name):
    grid = cfg.semigroup().grid
    return _set_table(grid)[name].mask(grid)


def _set_names(cfg):
    return list(_set_table(cfg.semigroup().grid))


def _densities(cfg):
    sg = cfg.semigroup()
    key = (cfg.family, id(sg), cfg.seed)
    if key not in _DENSITY_CACHE:
        _DENSITY_CACHE[key] = (sg, {d.name: d.density for d in families.densities(cfg.family, sg.measure, cfg.seed)})
    return _DENSITY_CACHE[key][1]


def _field(cfg, name):
    sg = cfg.semigroup()
    return ScalarField(sg.grid, _fn(cfg, name)(sg.grid.x))


def _pair_probe(cfg, times):
    return cfg.probe(times, stride=int(cfg.sweeps.get("pair_stride", 3 * cfg.stride)))


def _scalar(name, value, asserted=True, flags=()):
    return Component(name, np.array([float(value)]), np.zeros((1, 0)), asserted, frozenset(flags))


def _probit(p, q):
    """``norm_ppf(p)`` using the complementary probability ``q = 1 - p`` above 1/2.

    Returns the values and a mask of entries that had to be clamped.
    """
    z = np.where(p <= 0.5, ndtri(np.clip(p, 0.0, 0.5)), -ndtri(np.clip(q, 0.0, 0.5)))
    bad = ~np.isfinite(z)
    z = np.where(bad, np.sign(z) * -ndtri(EPS_CLAMP), z)
    return z, bad


def distributional_rhs(r, masses, delta):
    """``exp(-delta^2/2) int exp(delta norm_ppf(F(r))) r dF(r)`` for a step ``F``.

    Atom ``k`` at ``r_k`` covers the probability band ``[F_{k-1}, F_k]``;
    integrating ``exp(delta norm_ppf(v))`` across the band gives
    ``exp(delta^2/2) [Phi(z_k - delta) - Phi(z_{k-1} - delta)]`` with
    ``z = norm_ppf(F)``, so the prefactor cancels. Survival sums keep the upper
    bands accurate; bands right of ``delta`` are differenced on the upper tail.
    """
    r = np.asarray(r, dtype=float)
    masses = np.asarray(masses, dtype=float)
    keep = masses > 0
    r, masses = r[keep], masses[keep]
    F = np.cumsum(masses)
    S = np.concatenate([np.cumsum(masses[::-1])[::-1][1:], [0.0]])
    with np.errstate(divide="ignore"):
        z = np.where(F <= 0.5, ndtri(np.clip(F, 0, 0.5)), -ndtri(np.clip(S, 0, 0.5)))
    z = np.concatenate([[-np.inf], np.where(S <= 0, np.inf, z)])
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    u = z[:, None] - delta[None, :]
    lower, upper = ndtr(u), ndtr(-u)
    band = np.where(u[:-1] > 0, upper[:-1] - upper[1:], lower[1:] - lower[:-1])
    return r @ band


def _evolve(sg, t, f: DensityField):
    """``P_t f`` as a normalized density and the relative mass lost off the grid."""
    vals = np.maximum(apply_values(sg, t, f.values, tail="zero"), 0.0)
    mass = sg.measure.integrate(vals)
    return DensityField(vals / mass, sg.measure), abs(mass - 1.0)


def _tail_ok(cfg, *probs):
    """Nodes whose probabilities stay at least ``p_floor`` away from 0 and 1.

    Time-stepped kernels are accurate in absolute, not relative, terms, so a
    probit of a far-tail value carries no information. Exact kernels keep
    every node.
    """
    sg = cfg.semigroup()
    ok = np.ones(sg.grid.n, dtype=bool)
    if sg.exact_kernel:
        return ok
    floor = float(cfg.sweeps.get("p_floor", 1e-2))
    for p in probs:
        ok &= (p >= floor) & (p <= 1.0 - floor)
    return ok


def _require_values(cfg, lo=None, hi=None, positive=False):
    """Reject families whose members leave the admissible range on the grid."""
    x = cfg.semigroup().grid.x
    for name in _names(cfg):
        v = _fn(cfg, name)(x)
        if positive and not np.all(v > 0):
            raise ValueError(f"{cfg.family} member {name} is not positive")
        if lo is not None and np.any(v < lo):
            raise ValueError(f"{cfg.family} member {name} is below {lo}")
        if hi is not None and np.any(v > hi):
            raise ValueError(f"{cfg.family} member {name} exceeds {hi}")


def _leak_flags(*leaks):
    return ("mass-leak",) if max(leaks) > 1e-9 else ()


# ---------------------------------------------------------------------------


class LiYau(Check):
    check_id = "li-yau"
    title = "Li-Yau gradient estimate for the heat semigroup"
    kinds = ("euclidean",)

    def points(self, cfg):
        return [{"t": t, "f": f} for t in cfg.sweep("t", [0.1, 0.5, 1.0]) for f in _names(cfg)]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        idx = cfg.probe([p["t"]])
        m = li_yau_margin(sg, p["t"], _field(cfg, p["f"])).values[idx]
        return [node_component("li-yau", m, sg.grid, idx)]


class ParabolicHarnack(Check):
    check_id = "harnack-parabolic"
    title = "Classical parabolic Harnack inequality"
    kinds = ("euclidean",)

    def points(self, cfg):
        return [
            {"t": t, "s": s, "f": f}
            for t in cfg.sweep("t", [0.1, 0.5])
            for s in cfg.sweep("s", [0.1, 0.5, 1.0])
            for f in _names(cfg)
        ]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        t, s = p["t"], p["s"]
        f = _field(cfg, p["f"])
        idx = _pair_probe(cfg, [t, t + s])
        lt = np.log(apply(sg, t, f).values[idx])
        lts = np.log(apply(sg, t + s, f).values[idx])
        d = cfg.distance_matrix(idx, idx)
        n = sg.N
        m = lts[None, :] + 0.5 * n * np.log((t + s) / t) + d * d / (4 * s) - lt[:, None]
        ly = li_yau_margin(sg, t, f).values[idx]
        return [
            pair_component("harnack", m, sg.grid, idx, idx),
            node_component("li-yau", ly, sg.grid, idx),
        ]


class Bochner(Check):
    check_id = "bochner"
    title = "Bochner-type curvature-dimension inequality and Hessian bound"
    kinds = ALL_KINDS
    default_family = "smooth"

    def points(self, cfg):
        return [{"f": f} for f in _names(cfg)]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        idx = cfg.probe(margin_nodes=4)
        f = _field(cfg, p["f"])
        m = gamma2_margin(sg, f).values[idx]
        df = np.abs(np.gradient(f.values, sg.grid.h))
        Lf = np.abs(generator(sg, f).values)
        h = sg.grid.h
        scale = (df * df / h**2 + df * Lf / h + Lf * Lf)[idx]
        x = sg.grid.x[idx]
        if cfg.semigroup_spec["kind"] == "generic-diffusion":
            _, V2, _ = cosine_potential(sg.grid, cfg.semigroup_spec)
            hess = V2(x) - sg.K
        elif sg.kind == "ornstein-uhlenbeck":
            hess = np.ones_like(x) - sg.K
        else:
            hess = np.zeros_like(x) - sg.K
        return [
            node_component("bochner", m, sg.grid, idx, scale=scale),
            node_component("hessian-bound", hess, sg.grid, idx),
        ]


class GradientCommutation(Check):
    check_id = "gradient-commutation"
    title = "Gradient commutation |grad P_t g| <= exp(-Kt) P_t|grad g|"
    kinds = ALL_KINDS
    default_family = "smooth"

    def points(self, cfg):
        return [{"t": t, "f": f} for t in cfg.sweep("t", [0.1, 0.5, 1.0]) for f in _names(cfg)]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        fn = _fn(cfg, p["f"])
        x = sg.grid.x
        idx = cfg.probe([p["t"]])
        m = gradient_bound_margin(sg, p["t"], ScalarField(sg.grid, fn(x)), slope=np.abs(fn.deriv(x)))
        return [node_component("gradient", m.values[idx], sg.grid, idx)]


class WangHarnack(Check):
    check_id = "wang-harnack"
    title = "Wang's dimension-free Harnack inequality"
    kinds = ALL_KINDS

    def validate(self, cfg):
        super().validate(cfg)
        _require_values(cfg, positive=True)

    def points(self, cfg):
        return [
            {"t": t, "alpha": a, "f": f}
            for t in cfg.sweep("t", [0.1, 0.5, 1.0])
            for a in cfg.sweep("alpha", [1.5, 2.0, 4.0])
            for f in _names(cfg)
        ]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        t, a = p["t"], p["alpha"]
        lf = np.log(_fn(cfg, p["f"])(sg.grid.x))
        idx = _pair_probe(cfg, [t])
        lp = log_apply_exp(sg, t, lf)[idx]
        lpa = log_apply_exp(sg, t, a * lf)[idx]
        d = cfg.distance_matrix(idx, idx)
        m = lpa[None, :] + a * d * d / (2 * (a - 1) * sigma(sg.K, t)) - a * lp[:, None]
        return [pair_component("wang", m, sg.grid, idx, idx)]


class LogHarnack(Check):
    check_id = "log-harnack"
    title = "Log-Harnack inequality, pointwise and in Hopf-Lax form"
    kinds = ALL_KINDS

    def validate(self, cfg):
        super().validate(cfg)
        _require_values(cfg, positive=True)

    def points(self, cfg):
        return [{"t": t, "f": f} for t in cfg.sweep("t", [0.1, 0.5, 1.0]) for f in _names(cfg)]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        t = p["t"]
        lf = np.log(_fn(cfg, p["f"])(sg.grid.x))
        A = apply_values(sg, t, lf)
        B = log_apply_exp(sg, t, lf)
        sig = sigma(sg.K, t)
        idx = _pair_probe(cfg, [t])
        d = cfg.distance_matrix(idx, idx)
        pointwise = B[idx][None, :] + d * d / (2 * sig) - A[idx][:, None]
        nodes = cfg.probe([t])
        q = inf_conv(ScalarField(sg.grid, B), sig).field.values
        return [
            pair_component("pointwise", pointwise, sg.grid, idx, idx),
            node_component("hopf-lax-form", q[nodes] - A[nodes], sg.grid, nodes),
        ]


class ReverseLogSobolev(Check):
    check_id = "reverse-log-sobolev"
    title = "Reverse local logarithmic Sobolev inequality"
    kinds = ALL_KINDS

    def validate(self, cfg):
        super().validate(cfg)
        _require_values(cfg, positive=True)

    def points(self, cfg):
        return [{"t": t, "f": f} for t in cfg.sweep("t", [0.001, 0.1, 0.5, 1.0]) for f in _names(cfg)]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        t = p["t"]
        f = _field(cfg, p["f"])
        P, d1, _ = apply_derivatives(sg, t, f)
        Pflogf = apply_values(sg, t, xlogy(f.values, f.values))
        idx = cfg.probe([t])
        grad_term = 0.5 * sigma(sg.K, t) * d1 * d1 / P
        m = Pflogf - P * np.log(P) - grad_term
        scale = np.abs(Pflogf) + np.abs(P * np.log(P)) + grad_term
        return [node_component("reverse-log-sobolev", m[idx], sg.grid, idx, scale=scale[idx])]


class ReverseIsoperimetry(Check):
    check_id = "reverse-isoperimetry"
    title = "Reverse isoperimetric heat-kernel inequality and probit Lipschitz bound"
    kinds = ALL_KINDS
    default_family = "unit"

    def validate(self, cfg):
        super().validate(cfg)
        _require_values(cfg, lo=0.0, hi=1.0)

    def points(self, cfg):
        ts = cfg.sweep("t", [0.1, 0.5, 1.0])
        return [{"t": t, "f": f} for t in ts for f in _names(cfg)] + [
            {"t": t, "set": s} for t in ts for s in _set_names(cfg)
        ]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        t = p["t"]
        sig = sigma(sg.K, t)
        if "set" in p:
            mask = _mask(cfg, p["set"])
            P, d1, _ = apply_derivatives(sg, t, mask)
            # I vanishes on an indicator
            PI = np.zeros_like(P)
            z, bad = region_probit(sg, t, mask)
        else:
            f = _field(cfg, p["f"])
            P, d1, _ = apply_derivatives(sg, t, f)
            PI = apply_values(sg, t, iso_profile(np.clip(f.values, 0.0, 1.0)))
            Q = apply_values(sg, t, 1.0 - f.values)
            z, bad = _probit(np.clip(P, 0.0, 1.0), np.clip(Q, 0.0, 1.0))
        nodes = cfg.probe([t])
        m16 = iso_profile(np.clip(P, 0.0, 1.0)) ** 2 - PI**2 - sig * d1 * d1
        idx = _pair_probe(cfg, [t])
        flags = ("clamp",) if np.any(bad[idx]) else ()
        idx = idx[~bad[idx] & _tail_ok(cfg, P)[idx]]
        d = cfg.distance_matrix(idx, idx)
        m17 = z[idx][None, :] + d / np.sqrt(sig) - z[idx][:, None]
        return [
            node_component("isoperimetric-gradient", m16[nodes], sg.grid, nodes),
            pair_component("probit-lipschitz", m17, sg.grid, idx, idx, flags=flags),
        ]


class DistributionalHarnack(Check):
    check_id = "distributional-harnack"
    title = "Harnack inequality for the distribution function under the heat kernel"
    kinds = ALL_KINDS
    default_family = "unit"

    def validate(self, cfg):
        super().validate(cfg)
        _require_values(cfg, lo=0.0)

    def points(self, cfg):
        ts = cfg.sweep("t", [0.1, 0.5, 1.0])
        return [{"t": t, "f": f} for t in ts for f in _names(cfg)] + [
            {"t": t, "set": s} for t in ts for s in _set_names(cfg)
        ]

    def evaluate(self, cfg, p):
        """Pairs with ``delta`` above ``delta_max`` are skipped: the bound then
        rests on kernel masses below double precision. The Cauchy-Schwarz chain
        is asserted in the scaled form ``sqrt(P_t f^2(y)) - exp(-delta^2/2) RHS``."""
        sg = cfg.semigroup()
        t = p["t"]
        xs = _pair_probe(cfg, [t])
        ys = cfg.probe([t], stride=int(cfg.sweeps.get("y_stride", 6 * cfg.stride)))
        delta = cfg.delta(cfg.distance_matrix(xs, ys), t)
        near = delta <= float(cfg.sweeps.get("delta_max", 5.0))
        if "set" in p:
            mask = _mask(cfg, p["set"])
            P = apply_region(sg, t, mask).values
            Pc = apply_region(sg, t, mask.complement()).values
            P2 = P

            def law(y):
                return np.array([0.0, 1.0]), np.array([Pc[y], P[y]])
        else:
            f = _field(cfg, p["f"])
            P, P2 = apply_values(sg, t, np.stack([f.values, f.values**2], axis=1)).T

            def law(y):
                F = kernel_cdf(sg, t, f, int(y))
                return F.support, F.masses

        main, chain = [], []
        for j, y in enumerate(ys):
            rows = np.flatnonzero(near[:, j])
            if rows.size == 0:
                continue
            r, masses = law(y)
            dj = delta[rows, j]
            rhs = distributional_rhs(r, masses, dj)
            main.append(rhs - P[xs[rows]])
            chain.append(np.sqrt(P2[y]) - np.exp(-0.5 * dj * dj) * rhs)
        cat = np.concatenate if main else (lambda _: np.zeros(0))
        X, Y = np.meshgrid(sg.grid.x[xs], sg.grid.x[ys], indexing="ij")
        coords = np.stack([X.T[near.T], Y.T[near.T]], axis=1)
        return [
            Component("distributional", cat(main), coords),
            Component("cauchy-schwarz-chain", cat(chain), coords),
        ]


class IsoperimetricComparison(Check):
    check_id = "isoperimetric-comparison"
    title = "Isoperimetric comparison for heat-kernel measures and its neighborhood form"
    kinds = ALL_KINDS
    default_family = "unit"

    def validate(self, cfg):
        super().validate(cfg)
        _require_values(cfg, lo=0.0, hi=1.0)

    def points(self, cfg):
        ts = cfg.sweep("t", [0.1, 0.5, 1.0])
        return [{"t": t, "f": f} for t in ts for f in _names(cfg)] + [
            {"t": t, "set": s, "eps": e} for t in ts for s in _set_names(cfg) for e in cfg.sweep("eps", [0.1, 0.5])
        ]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        t = p["t"]
        kt = kappa(sg.K, t)
        nodes = cfg.probe([t])
        if "set" in p:
            mask = _mask(cfg, p["set"])
            z, bad = region_probit(sg, t, mask)
            ze, bade = region_probit(sg, t, neighborhood(mask, p["eps"]))
            ok = ~(bad | bade)[nodes] & _tail_ok(cfg, ndtr(z), ndtr(ze))[nodes]
            flags = ("clamp",) if not np.all(ok) else ()
            nodes = nodes[ok]
            m = ze[nodes] - z[nodes] - p["eps"] / np.sqrt(kt)
            return [node_component("neighborhood", m, sg.grid, nodes, flags=flags)]
        fn = _fn(cfg, p["f"])
        x = sg.grid.x
        f = np.clip(fn(x), 0.0, 1.0)
        g = np.sqrt(iso_profile(f) ** 2 + kt * fn.deriv(x) ** 2)
        lhs = iso_profile(np.clip(apply_values(sg, t, f), 0.0, 1.0))
        m = apply_values(sg, t, g) - lhs
        return [node_component("comparison", m[nodes], sg.grid, nodes)]


class IsoperimetricHarnack(Check):
    check_id = "isoperimetric-harnack"
    title = "Isoperimetric-type Harnack inequality for sets"
    kinds = ALL_KINDS

    def points(self, cfg):
        return [{"t": t, "set": s} for t in cfg.sweep("t", [0.1, 0.5, 1.0]) for s in _set_names(cfg)]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        t = p["t"]
        mask = _mask(cfg, p["set"])
        if mask.is_empty:
            raise ValueError("empty set")
        idx = _pair_probe(cfg, [t])
        d = cfg.distance_matrix(idx, idx)
        PA = apply_region(sg, t, mask).values
        key = np.round(d, 10)
        rhs = np.empty_like(d)
        shrink = np.exp(-sg.K * t)
        for r in np.unique(key):
            sel = key == r
            Pr = apply_region(sg, t, neighborhood(mask, shrink * float(r))).values[idx]
            rhs[sel] = np.broadcast_to(Pr[None, :], d.shape)[sel]
        main = rhs - PA[idx][:, None]
        z, bad = region_probit(sg, t, mask)
        keep = ~bad[idx] & _tail_ok(cfg, PA)[idx]
        delta = d / np.sqrt(sigma(sg.K, t))
        lip = ndtr(z[idx][None, :] + delta) - PA[idx][:, None]
        flags = ("clamp",) if not np.all(keep) else ()
        return [
            pair_component("set-harnack", main, sg.grid, idx, idx),
            pair_component("probit-form", lip[:, keep], sg.grid, idx, idx[keep], flags=flags),
        ]


class Commutation(Check):
    check_id = "commutation"
    title = "Commutation between heat and Hopf-Lax semigroups (plain, viscous, dimensional)"
    kinds = ALL_KINDS
    default_family = "bounded"

    def points(self, cfg):
        sg = cfg.semigroup()
        names = _names(cfg)
        pts = [
            {"form": "hopf-lax", "t": t, "s": s, "f": f}
            for t in cfg.sweep("t", [0.1, 0.5, 1.0])
            for s in cfg.sweep("s", [0.5, 1.0, 2.0])
            for f in names
        ]
        if sg.K == 0:
            pts += [
                {"form": "viscous", "t": t, "eps": e, "f": f}
                for t in cfg.sweep("t", [0.1, 0.5, 1.0])
                for e in cfg.sweep("eps", [0.05, 0.2])
                for f in names
            ]
        if sg.N is not None and sg.K == 0:
            pts += [{"form": "dimensional", "t": t, "s": s, "f": f} for t, s in cfg.sweep("ts", DEFAULT_TS) for f in names]
        return pts

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        f = _field(cfg, p["f"])
        t = p["t"]
        form = p["form"]
        if form == "hopf-lax":
            s = p["s"]
            nodes = cfg.probe([t])
            lhs = apply(sg, t, inf_conv(f, s).field).values
            rhs = inf_conv(apply(sg, t, f), np.exp(2 * sg.K * t) * s).field.values
            return [node_component("hopf-lax", (rhs - lhs)[nodes], sg.grid, nodes)]
        if form == "viscous":
            vc = ViscousConfig.for_grid(sg.grid, p["eps"])
            nodes = cfg.probe([t, p["eps"]])
            lhs = apply(sg, t, viscous_infconv(vc, f, 1.0)).values
            rhs = viscous_infconv(vc, apply(sg, t, f), 1.0).values
            return [node_component("viscous", (rhs - lhs)[nodes], sg.grid, nodes)]
        if sg.N is None:
            raise ValueError("the dimensional commutation needs a finite dimension")
        s = p["s"]
        nodes = cfg.probe([t, s])
        lhs = apply(sg, t, inf_conv(f, 1.0).field).values
        rhs = inf_conv(apply(sg, s, f), 1.0).field.values + sg.N * (np.sqrt(t) - np.sqrt(s)) ** 2
        return [node_component("dimensional", (rhs - lhs)[nodes], sg.grid, nodes)]


class Hypercontractivity(Check):
    check_id = "hypercontractivity"
    title = "Hopf-Lax hypercontractivity along the heat flow"
    kinds = ("euclidean", "generic-diffusion")
    default_family = "bounded"

    def validate(self, cfg):
        super().validate(cfg)
        if cfg.semigroup().K != 0:
            raise ValueError("hypercontractivity is checked under zero curvature only")

    def points(self, cfg):
        return [{"t": t, "f": f} for t in cfg.sweep("t", [0.1, 0.5, 1.0]) for f in _names(cfg)]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        t = p["t"]
        psi = _field(cfg, p["f"])
        nodes = cfg.probe([t])
        q = inf_conv(psi, 2 * t).field.values
        m = apply(sg, t, psi).values - log_apply_exp(sg, t, q)
        return [node_component("hypercontractivity", m[nodes], sg.grid, nodes)]


def _density_pairs(cfg, same=False):
    names = list(_densities(cfg))
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
    if same:
        pairs += [(a, a) for a in names]
    return pairs


class WassersteinContraction(Check):
    check_id = "wasserstein-contraction"
    title = "Wasserstein contraction: squared exponential form, dimensional form"
    kinds = ALL_KINDS
    default_family = "smooth"

    def points(self, cfg):
        sg = cfg.semigroup()
        pts = []
        if sg.measure.probability:
            pts += [{"form": "exponential", "t": t, "f": f, "g": g} for t in cfg.sweep("t", [0.1, 0.5, 1.0])
                    for f, g in _density_pairs(cfg)]
        if sg.N is not None and sg.K == 0:
            pts += [{"form": "dimensional", "t": t, "s": s, "f": f, "g": g} for t, s in cfg.sweep("ts", DEFAULT_TS + [[0.1, 0.0], [0.5, 0.0]])
                    for f, g in _density_pairs(cfg, same=True)]
        return pts

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        dens = _densities(cfg)
        f, g = dens[p["f"]], dens[p["g"]]
        t = p["t"]
        w0 = w2_squared(f, g)
        if p["form"] == "exponential":
            ft, lf = _evolve(sg, t, f)
            gt, lg = _evolve(sg, t, g)
            wt = w2_squared(ft, gt)
            flags = _leak_flags(lf, lg)
            return [
                _scalar("squared", np.exp(-2 * sg.K * t) * w0 - wt, flags=flags),
                _scalar("as-printed", np.exp(-2 * sg.K * t) * np.sqrt(w0) - np.sqrt(wt), asserted=False),
            ]
        s = p["s"]
        ft, lf = _evolve(sg, t, f)
        gs, lg = (g, 0.0) if s == 0 else _evolve(sg, s, g)
        m = w0 + 2 * sg.N * (np.sqrt(t) - np.sqrt(s)) ** 2 - w2_squared(ft, gs)
        return [_scalar("dimensional", m, flags=_leak_flags(lf, lg))]


class EntropyTransport(Check):
    check_id = "entropy-transport"
    title = "Entropy-transport bounds, HWI and Kuwada's inequality"
    kinds = PROBABILITY_KINDS
    default_family = "smooth"

    def validate(self, cfg):
        super().validate(cfg)
        if not cfg.semigroup().measure.probability:
            raise ValueError("entropy-transport checks need a probability measure")

    def points(self, cfg):
        names = list(_densities(cfg))
        pts = [{"form": "single", "t": t, "f": f} for t in cfg.sweep("t", [0.1, 0.5, 1.0]) for f in names]
        if cfg.semigroup().K >= 0:
            pts += [{"form": "pair", "t": t, "f": f, "g": g} for t in cfg.sweep("t", [0.1, 0.5, 1.0])
                    for f, g in _density_pairs(cfg)]
            pts += [{"form": "hwi", "f": f} for f in names]
        return pts

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        dens = _densities(cfg)
        f = dens[p["f"]]
        one = DensityField(np.ones(sg.grid.n), sg.measure)
        if p["form"] == "hwi":
            fi = fisher_info(f)
            flags = ("fisher-floor",) if fi.floor_hit else ()
            return [_scalar("hwi", np.sqrt(w2_squared(f, one) * fi.value) - entropy(f), flags=flags)]
        t = p["t"]
        ft, leak = _evolve(sg, t, f)
        flags = _leak_flags(leak)
        if p["form"] == "pair":
            g = dens[p["g"]]
            return [_scalar("with-reference", w2_squared(f, g) / (4 * t) + entropy(g) - entropy(ft), flags=flags)]
        out = [_scalar("kuwada", kuwada_gap(sg, f, t), flags=flags)]
        if sg.K >= 0:
            out.append(_scalar("entropy-decay", w2_squared(f, one) / (4 * t) - entropy(ft), flags=flags))
        return out


class EVI(Check):
    check_id = "evi"
    title = "Evolution variational inequality (integrated and differential)"
    kinds = PROBABILITY_KINDS
    default_family = "smooth"

    def points(self, cfg):
        pairs = _density_pairs(cfg, same=True)
        pts = [{"form": "integrated", "t": t, "f": f, "g": g} for t in cfg.sweep("t", [0.1, 0.5]) for f, g in pairs]
        pts += [{"form": "derivative", "t": t, "f": f, "g": g} for t in cfg.sweep("t_derivative", [1e-2, 1e-3])
                for f, g in pairs]
        return pts

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        dens = _densities(cfg)
        f, g = dens[p["f"]], dens[p["g"]]
        t = p["t"]
        ft, leak = _evolve(sg, t, f)
        asserted = sg.K == 0
        if p["form"] == "integrated":
            w0, wt = w2_squared(f, g), w2_squared(ft, g)
            gap = entropy(g) - entropy(ft)
            out = [_scalar("integrated", w0 + 2 * t * gap - wt, asserted=asserted, flags=_leak_flags(leak))]
            if not asserted:
                # curvature-adapted form, exp(Kt) W_t^2 <= W_0^2 + 2 (exp(Kt) - 1)/K [Ent g - Ent P_t f]
                ik = np.expm1(sg.K * t) / sg.K
                out.append(_scalar("integrated-K", w0 + 2 * ik * gap - np.exp(sg.K * t) * wt, asserted=False))
            return out
        tau = 0.1 * t
        ftt, _ = _evolve(sg, t + tau, f)
        quotient = 0.5 * (w2_squared(ftt, g) - w2_squared(ft, g)) / tau
        return [_scalar("differential", entropy(g) - entropy(ft) - quotient, asserted=False)]


class GradientDimensional(Check):
    check_id = "cd0n-gradient"
    title = "Dimensional gradient bound and its infinite-dimensional weak form"
    kinds = ALL_KINDS
    default_family = "smooth"

    def points(self, cfg):
        return [{"s": s, "f": f} for s in cfg.sweep("s", [0.1, 0.5, 1.0]) for f in _names(cfg)]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        s = p["s"]
        fn = _fn(cfg, p["f"])
        x = sg.grid.x
        f = ScalarField(sg.grid, fn(x))
        P, d1, d2 = apply_derivatives(sg, s, f)
        Pg2 = apply_values(sg, s, fn.deriv(x) ** 2)
        nodes = cfg.probe([s], margin_nodes=2)
        out = [node_component("weak", (np.exp(-2 * sg.K * s) * Pg2 - d1 * d1)[nodes], sg.grid, nodes)]
        if sg.N is not None and sg.K == 0:
            LP = d2 if sg.exact_kernel else generator(sg, ScalarField(sg.grid, P)).values
            m = Pg2 - 2 * s / sg.N * LP**2 - d1 * d1
            out.append(node_component("dimensional", m[nodes], sg.grid, nodes))
        return out


class KantorovichDuality(Check):
    check_id = "kantorovich-duality"
    title = "Weak Kantorovich duality for the quadratic cost"
    kinds = ALL_KINDS
    default_family = "smooth"

    def points(self, cfg):
        phis = list(_function_table("bounded", cfg.semigroup().grid, cfg.seed))
        return [{"f": f, "g": g, "phi": phi} for f, g in _density_pairs(cfg, same=True) for phi in phis]

    def evaluate(self, cfg, p):
        sg = cfg.semigroup()
        dens = _densities(cfg)
        f, g = dens[p["f"]], dens[p["g"]]
        phi = ScalarField(sg.grid, _function_table("bounded", sg.grid, cfg.seed)[p["phi"]](sg.grid.x))
        gap = kantorovich_gap(f, g, phi)
        half = 0.5 * w2_squared(f, g)
        return [
            _scalar("weak-duality", gap),
            _scalar("relative-residual", gap / half if half > 0 else 0.0, asserted=False),
        ]


CHECKS = {
    c.check_id: c
    for c in (
        LiYau(), ParabolicHarnack(), Bochner(), GradientCommutation(), WangHarnack(), LogHarnack(),
        ReverseLogSobolev(), ReverseIsoperimetry(), DistributionalHarnack(), IsoperimetricComparison(),
        IsoperimetricHarnack(), Commutation(), Hypercontractivity(), WassersteinContraction(),
        EntropyTransport(), EVI(), GradientDimensional(), KantorovichDuality(),
    )
}
