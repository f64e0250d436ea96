"""Campaign files: loading, running and writing reports.

A campaign is a YAML document::

    seed: 0
    semigroups:
      heat: {kind: euclidean, a: -12, b: 12, n: 1201, N: 1}
    checks:
      - id: wang-harnack
        semigroups: [heat]
        family: positive        # optional, the check's default otherwise
        sweeps: {t: [0.1, 0.5], alpha: [2.0]}
        tol: 1.0e-5             # optional
        stride: 8               # optional

Each (check, semigroup) entry yields one report.
"""

import csv
import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import List, Optional

import yaml

from .checks import CHECKS
from .core import TOL_EXACT, TOL_STEPPED, CheckConfig, CheckReport, refinement_study, run_check

CSV_FIELDS = ("check_id", "config_digest", "margin", "tol", "verdict", "flags", "wall_ms")
_SEMIGROUP_KINDS = ("euclidean", "ornstein-uhlenbeck", "flat-circle", "generic-diffusion")


class ConfigError(ValueError):
    """Malformed campaign; the message names the offending entry."""


@dataclass
class Campaign:
    seed: int
    configs: List[CheckConfig]


def default_config_path():
    return resources.files("harnacklab.registry") / "default_campaign.yaml"


def _require(cond, where, msg):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def parse_campaign(doc, seed: Optional[int] = None, only=None) -> Campaign:
    """Validate a loaded YAML document and expand it into check configs."""
    _require(isinstance(doc, dict), "campaign", "top level must be a mapping")
    unknown = set(doc) - {"seed", "semigroups", "checks"}
    _require(not unknown, "campaign", f"unknown keys {sorted(unknown)}")
    seed = int(doc.get("seed", 0) if seed is None else seed)
    sgs = doc.get("semigroups") or {}
    _require(isinstance(sgs, dict), "semigroups", "must be a mapping")
    for name, spec in sgs.items():
        _require(isinstance(spec, dict) and spec.get("kind") in _SEMIGROUP_KINDS,
                 f"semigroups.{name}", f"kind must be one of {_SEMIGROUP_KINDS}")
        _require("n" in spec, f"semigroups.{name}", "missing grid size n")
    entries = doc.get("checks") or []
    _require(isinstance(entries, list), "checks", "must be a list")
    if only is not None:
        missing = set(only) - set(CHECKS)
        _require(not missing, "--only", f"unknown check ids {sorted(missing)}")
    configs = []
    for i, entry in enumerate(entries):
        where = f"checks[{i}]"
        _require(isinstance(entry, dict) and "id" in entry, where, "needs an id")
        cid = entry["id"]
        _require(cid in CHECKS, where, f"unknown check id {cid!r}")
        if only is not None and cid not in only:
            continue
        names = entry.get("semigroups")
        _require(isinstance(names, list) and names, where, "needs a non-empty semigroups list")
        sweeps = entry.get("sweeps") or {}
        _require(isinstance(sweeps, dict), where, "sweeps must be a mapping")
        for name in names:
            _require(name in sgs, where, f"unknown semigroup {name!r}")
            spec = sgs[name]
            tol = entry.get("tol", TOL_STEPPED if "circle" in spec["kind"] or spec["kind"] == "generic-diffusion"
                            else TOL_EXACT)
            try:
                cfg = CheckConfig(
                    check_id=cid,
                    semigroup_name=name,
                    semigroup_spec=dict(spec),
                    sweeps=dict(sweeps),
                    family=entry.get("family", CHECKS[cid].default_family),
                    tol=float(tol),
                    seed=seed,
                    stride=int(entry.get("stride", 8)),
                )
                CHECKS[cid].validate(cfg)
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"{where} on {name}: {exc}") from exc
            configs.append(cfg)
    return Campaign(seed, configs)


def load_campaign(path=None, seed=None, only=None) -> Campaign:
    text = Path(path).read_text() if path is not None else default_config_path().read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"campaign: not valid YAML ({exc})") from exc
    return parse_campaign(doc if doc is not None else {}, seed=seed, only=only)


def _order(reports):
    return sorted(reports, key=lambda r: (r.check_id, r.digest))


def run_campaign(campaign: Campaign, progress=None) -> List[CheckReport]:
    """Run every config; reports are sorted by check id, then config digest."""
    reports = []
    for cfg in campaign.configs:
        rep = run_check(CHECKS[cfg.check_id], cfg)
        if progress is not None:
            progress(rep)
        reports.append(rep)
    return _order(reports)


def refinement_campaign(campaign: Campaign, reports, factor=2):
    """Refinement records for every small asserted violation of ``reports``."""
    by_digest = {cfg.digest: cfg for cfg in campaign.configs}
    out = []
    for rep in reports:
        cfg = by_digest[rep.digest]
        out.extend(refinement_study(CHECKS[cfg.check_id], cfg, rep, factor))
    return out


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def reports_json(reports, seed) -> str:
    """Deterministic JSON (wall time lives in the CSV only)."""
    doc = {"seed": seed, "reports": [r.to_json() for r in reports]}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_reports(reports, seed, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(reports_csv(reports))
    (out / "report.json").write_text(reports_json(reports, seed))
    return out


def read_report_json(path):
    return json.loads(Path(path).read_text())
