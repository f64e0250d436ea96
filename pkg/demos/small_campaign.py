"""Run a handful of checks and print their worst margins.

The full default campaign is available from the command line:
    python -m harnacklab run --out reports --refinement
"""

from harnacklab.registry import parse_campaign, run_campaign

campaign = parse_campaign({
    "seed": 0,
    "semigroups": {
        "heat": {"kind": "euclidean", "a": -12, "b": 12, "n": 1201, "N": 1},
        "ou": {"kind": "ornstein-uhlenbeck", "a": -10, "b": 10, "n": 1001},
        "circle": {"kind": "flat-circle", "n": 256},
    },
    "checks": [
        {"id": "li-yau", "semigroups": ["heat"]},
        {"id": "wang-harnack", "semigroups": ["heat", "ou", "circle"]},
        {"id": "log-harnack", "semigroups": ["ou", "circle"]},
        {"id": "wasserstein-contraction", "semigroups": ["ou"]},
    ],
})
for rep in run_campaign(campaign):
    extra = "".join(f"  [{k}: {v['margin']:.2e}]" for k, v in rep.reported.items())
    print(f"{rep.check_id:<24} {rep.semigroup:<7} {rep.verdict:<5} margin {rep.margin: .3e}{extra}")
