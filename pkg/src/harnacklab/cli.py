"""Command line: ``python -m harnacklab {run,list,report}``."""

import argparse
import json
import sys
from pathlib import Path

from .registry import CHECKS, ConfigError, load_campaign, refinement_campaign, run_campaign, write_reports
from .registry.campaign import reports_csv, read_report_json

#: share of refined small violations that must improve
REFINEMENT_QUORUM = 0.9


def _progress(rep):
    print(f"{rep.check_id:26s} {rep.semigroup:10s} {rep.verdict:12s} margin={rep.margin: .3e} "
          f"tol={rep.tol:.0e} {rep.wall_ms / 1000:7.2f}s", file=sys.stderr, flush=True)


def cmd_run(args):
    only = [s for s in args.only.split(",") if s] if args.only else None
    try:
        campaign = load_campaign(args.config, seed=args.seed, only=only)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    reports = run_campaign(campaign, progress=None if args.quiet else _progress)
    out = write_reports(reports, campaign.seed, args.out)
    failed = [r for r in reports if r.verdict == "fail"]
    status = 1 if failed else 0
    if args.refinement:
        records = refinement_campaign(campaign, reports)
        improved = sum(r.improved for r in records)
        share = improved / len(records) if records else 1.0
        doc = {
            "improved": improved,
            "total": len(records),
            "share": share,
            "records": [r._asdict() | {"improved": r.improved} for r in records],
        }
        (out / "refinement.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        print(f"refinement: {improved}/{len(records)} small violations improved", file=sys.stderr)
        if share < REFINEMENT_QUORUM:
            status = 1
    print(f"{len(reports)} reports, {len(failed)} failed; written to {out}", file=sys.stderr)
    return status


def cmd_list(args):
    for cid, check in sorted(CHECKS.items()):
        print(f"{cid:26s} {check.title}  [{', '.join(check.kinds)}]")
    return 0


def cmd_report(args):
    path = Path(args.input) / "report.json"
    try:
        doc = read_report_json(path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.format == "json":
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        csv_path = Path(args.input) / "report.csv"
        sys.stdout.write(csv_path.read_text() if csv_path.exists() else "")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="harnacklab", description="Numerical margins of heat-kernel inequalities.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a campaign")
    r.add_argument("--config", help="campaign YAML (default: the bundled campaign)")
    r.add_argument("--only", help="comma separated check ids")
    r.add_argument("--seed", type=int, help="override the campaign seed")
    r.add_argument("--out", default="harnack-report", help="output directory")
    r.add_argument("--refinement", action="store_true", help="re-run small violations on a doubled grid")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list check ids")
    ls.set_defaults(func=cmd_list)
    rp = sub.add_parser("report", help="print a written report")
    rp.add_argument("--format", choices=("csv", "json"), default="csv")
    rp.add_argument("--in", dest="input", default="harnack-report", help="directory written by run")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
