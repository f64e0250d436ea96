"""Check configurations, reports and the sweep runner.

A check enumerates configuration points (times, functions, sets, ...) and,
for each point, returns named margin arrays over grid nodes or node pairs.
The runner reduces them to the worst asserted margin and remembers where it
was attained, so that any report can be reproduced by re-evaluating a single
point.
"""

import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from ..fields import Grid, ScalarField, geodesic_distance
from ..scalar import sigma
from ..semigroup import Semigroup

#: exact-kernel and time-stepped default tolerances
TOL_EXACT = 1e-5
TOL_STEPPED = 1e-3
#: kernel mass allowed outside a line segment at an evaluation node
OUTSIDE_MASS = 1e-10
#: margins this close to zero are rounding, not discretization error
ROUNDOFF = 1e-11
#: rounding allowance per unit of term magnitude (see ``Component.scale``)
ROUNDOFF_REL = 64 * np.finfo(float).eps
#: flags that make a report inconclusive rather than pass
DISQUALIFYING = frozenset({"fisher-floor", "nonfinite", "mass-leak"})


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=float)


@lru_cache(maxsize=64)
def _build_semigroup(spec_json, refine):
    spec = json.loads(spec_json)
    kind = spec["kind"]
    if kind in ("euclidean", "ornstein-uhlenbeck"):
        n = (int(spec["n"]) - 1) * refine + 1
        grid = Grid.line(spec["a"], spec["b"], n)
        if kind == "euclidean":
            return Semigroup.euclidean(grid, spec.get("N", 1))
        return Semigroup.ornstein_uhlenbeck(grid)
    L = float(spec.get("L", 2 * np.pi))
    grid = Grid.circle(L, int(spec["n"]) * refine)
    if kind == "flat-circle":
        return Semigroup.flat_circle(grid)
    if kind == "generic-diffusion":
        V, _, K = cosine_potential(grid, spec)
        return Semigroup.diffusion(grid, V(grid.x), K=spec.get("K", K), dimension=spec.get("N"))
    raise ValueError(f"unknown semigroup kind {kind!r}")


def cosine_potential(grid, spec):
    """``V = a cos(2 pi m x / L)``, its second derivative and its minimum."""
    a = float(spec.get("amplitude", 0.5))
    k = 2 * np.pi * float(spec.get("mode", 1)) / grid.length

    def V(x):
        return a * np.cos(k * x)

    def V2(x):
        return -a * k * k * np.cos(k * x)

    return V, V2, -abs(a) * k * k


@dataclass(frozen=True, eq=False)
class CheckConfig:
    """One check run on one semigroup with its sweeps.

    ``delta(d, t)`` gives the normalized distance ``d / sqrt(sigma(t))`` used by
    the distributional and Wang-type bounds.
    """

    check_id: str
    semigroup_name: str
    semigroup_spec: dict
    sweeps: dict
    family: str
    tol: float
    seed: int = 0
    stride: int = 8
    refine: int = 1

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        for t in list(self.sweeps.get("t", [])) + list(self.sweeps.get("s", [])):
            if not t > 0:
                raise ValueError("times must be positive")
        for a in self.sweeps.get("alpha", []):
            if not a > 1:
                raise ValueError("alpha must exceed 1")

    def as_dict(self):
        return {
            "check_id": self.check_id,
            "semigroup": self.semigroup_name,
            "semigroup_spec": self.semigroup_spec,
            "sweeps": self.sweeps,
            "family": self.family,
            "tol": self.tol,
            "seed": self.seed,
            "stride": self.stride,
            "refine": self.refine,
        }

    @property
    def digest(self):
        d = self.as_dict()
        d.pop("refine")
        return hashlib.sha1(_canonical(d).encode()).hexdigest()[:12]

    def semigroup(self) -> Semigroup:
        return _build_semigroup(_canonical(self.semigroup_spec), self.refine)

    def refined(self, factor=2):
        return replace(self, refine=self.refine * factor)

    def sweep(self, key, default=None):
        return list(self.sweeps.get(key, default if default is not None else []))

    def delta(self, d, t):
        return np.asarray(d) / np.sqrt(sigma(self.semigroup().K, t))

    def probe(self, times=(), margin_nodes=0, stride=None):
        """Evaluation nodes: every ``stride``-th node (in units of the unrefined
        grid), keeping the kernel mass outside a line segment below
        ``OUTSIDE_MASS`` for every time in ``times``."""
        sg = self.semigroup()
        step = (stride or self.stride) * self.refine
        idx = np.arange(0, sg.grid.n, step)
        if sg.grid.is_circle:
            return idx
        keep = np.ones(idx.size, dtype=bool)
        x = sg.grid.x[idx]
        for t in times:
            if t > 0:
                keep &= sg.outside_mass(t, x) < OUTSIDE_MASS
        if margin_nodes:
            keep &= (idx >= margin_nodes * self.refine) & (idx <= sg.grid.n - 1 - margin_nodes * self.refine)
        return idx[keep]

    def distance_matrix(self, ix, iy):
        g = self.semigroup().grid
        return geodesic_distance(g, g.x[ix][:, None], g.x[iy][None, :])


class Component(NamedTuple):
    """Margins of one inequality at one configuration point.

    ``scale`` optionally gives, per entry, the magnitude of the terms whose
    difference forms the margin; rounding error is proportional to it.
    """

    name: str
    values: np.ndarray
    coords: np.ndarray
    asserted: bool = True
    flags: frozenset = frozenset()
    scale: Optional[np.ndarray] = None


def node_component(name, values, grid, idx, asserted=True, flags=(), scale=None):
    scale = None if scale is None else np.asarray(scale, dtype=float)
    return Component(name, np.asarray(values, dtype=float), grid.x[idx][:, None], asserted, frozenset(flags), scale)


def pair_component(name, matrix, grid, ix, iy, asserted=True, flags=()):
    X, Y = np.meshgrid(grid.x[ix], grid.x[iy], indexing="ij")
    coords = np.stack([X.ravel(), Y.ravel()], axis=1)
    return Component(name, np.asarray(matrix, dtype=float).ravel(), coords, asserted, frozenset(flags))


@dataclass
class CheckReport:
    check_id: str
    semigroup: str
    digest: str
    margin: float
    tol: float
    verdict: str
    location: dict
    flags: List[str]
    wall_ms: float
    reported: Dict[str, dict] = field(default_factory=dict)
    point_margins: List[dict] = field(default_factory=list)

    @property
    def passed(self):
        return self.verdict == "pass"

    def row(self):
        return {
            "check_id": self.check_id,
            "config_digest": self.digest,
            "margin": f"{self.margin:.6e}",
            "tol": f"{self.tol:.1e}",
            "verdict": self.verdict,
            "flags": ";".join(self.flags),
            "wall_ms": f"{self.wall_ms:.0f}",
        }

    def to_json(self):
        return {
            "check_id": self.check_id,
            "semigroup": self.semigroup,
            "config_digest": self.digest,
            "margin": self.margin,
            "tol": self.tol,
            "verdict": self.verdict,
            "flags": self.flags,
            "location": self.location,
            "reported": self.reported,
        }


class Check:
    """Base class: subclasses implement :meth:`points` and :meth:`evaluate`."""

    check_id = ""
    title = ""
    kinds = ("euclidean", "ornstein-uhlenbeck", "generic-diffusion")
    default_family = "positive"

    def validate(self, cfg: CheckConfig):
        sg = cfg.semigroup()
        if sg.kind not in self.kinds:
            raise ValueError(f"{self.check_id} does not apply to {sg.kind} semigroups")

    def points(self, cfg: CheckConfig) -> List[dict]:
        raise NotImplementedError

    def evaluate(self, cfg: CheckConfig, point: dict) -> List[Component]:
        raise NotImplementedError


def _clean(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def run_check(check: Check, cfg: CheckConfig) -> CheckReport:
    """Evaluate every point of ``cfg`` and reduce to a report."""
    t0 = time.perf_counter()
    check.validate(cfg)
    worst = None
    flags = set()
    reported = {}
    point_margins = []
    for point in check.points(cfg):
        for comp in check.evaluate(cfg, point):
            flags |= set(comp.flags)
            vals = comp.values
            if vals.size == 0:
                continue
            if not np.all(np.isfinite(vals)):
                flags.add("nonfinite")
                vals = np.where(np.isfinite(vals), vals, -np.inf)
            j = int(np.argmin(vals))
            loc = {
                "point": {k: _clean(v) for k, v in point.items()},
                "component": comp.name,
                "index": j,
                "coords": [float(c) for c in comp.coords[j]],
            }
            m = float(vals[j])
            if comp.asserted:
                noise = ROUNDOFF if comp.scale is None else max(ROUNDOFF, ROUNDOFF_REL * float(comp.scale[j]))
                point_margins.append({"point": loc["point"], "component": comp.name, "margin": m, "noise": noise})
                if worst is None or m < worst[0]:
                    worst = (m, loc)
            else:
                prev = reported.get(comp.name)
                if prev is None or m < prev["margin"]:
                    reported[comp.name] = {"margin": m, "location": loc}
    if worst is None:
        margin, location, verdict = float("nan"), {}, "inconclusive"
        flags.add("reported-only" if reported else "no-admissible-points")
    else:
        margin, location = worst
        if flags & DISQUALIFYING:
            verdict = "inconclusive"
        else:
            verdict = "pass" if margin >= -cfg.tol else "fail"
    wall = 1000 * (time.perf_counter() - t0)
    return CheckReport(
        cfg.check_id, cfg.semigroup_name, cfg.digest, margin, cfg.tol, verdict,
        location, sorted(flags), wall, reported, point_margins,
    )


def reevaluate(check: Check, cfg: CheckConfig, location: dict) -> float:
    """Margin at a recorded location (point, component, index)."""
    for comp in check.evaluate(cfg, location["point"]):
        if comp.name == location["component"]:
            return float(comp.values[location["index"]])
    raise KeyError(location["component"])


class RefinementRecord(NamedTuple):
    check_id: str
    semigroup: str
    point: dict
    component: str
    coarse: float
    fine: float

    @property
    def improved(self):
        return self.fine > self.coarse


def refinement_candidates(report: CheckReport):
    """Asserted point margins in ``[-tol, 0)`` that exceed the rounding level
    of their terms: small violations attributable to the scheme."""
    return [pm for pm in report.point_margins if -report.tol <= pm["margin"] < -pm.get("noise", ROUNDOFF)]


def refinement_study(check: Check, cfg: CheckConfig, report: CheckReport, factor=2):
    """Re-evaluate small violations on a grid refined by ``factor``.

    The probe nodes of the refined grid are the same coordinates as before, so
    margins are compared at identical locations.
    """
    fine_cfg = cfg.refined(factor)
    out = []
    for pm in refinement_candidates(report):
        comps = {c.name: c for c in check.evaluate(fine_cfg, pm["point"])}
        fine = float(np.min(comps[pm["component"]].values))
        out.append(RefinementRecord(cfg.check_id, cfg.semigroup_name, pm["point"], pm["component"], pm["margin"], fine))
    return out
