#!/usr/bin/env python3
"""Regenerate the bundled synthetic cases and scenario configs.

Run from the repository root:  python3 tools/make_cases.py
Deterministic: same seeds, same files.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from derdispatch import gridgen
from derdispatch.caseio import build_deras, serialize_case

DATA = os.path.join(os.path.dirname(__file__), "..", "src", "derdispatch", "data")

SCENARIO_INI = """\
[run]
horizon = {horizon}
interval_minutes = 5
strategy = const
penalty_price = 5000
n_vulnerable = 5
day_ahead_hours = 24
use_day_ahead = true

[dera]
fraction = 0.5
group_size = {group_size}
threshold = 0
tder_cost_mode = independent
tder_smoothing = 0.9

[bids]
base_lmp = 30.0

[icci]
k = 5
tol = 1e-6
max_iter = 50

[seeds]
deras = 1
bids = 2
tder = 3
profile = 4
"""


def emit(case, name, horizon, group_size):
    path = os.path.join(DATA, f"{name}.m")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_case(case))
    print(f"wrote {path} ({len(case.buses)} buses, {len(case.lines)} lines)")
    ini = os.path.join(DATA, f"{name}.ini")
    with open(ini, "w", encoding="utf-8") as fh:
        fh.write(SCENARIO_INI.format(horizon=horizon, group_size=group_size))
    print(f"wrote {ini}")


def main():
    os.makedirs(DATA, exist_ok=True)

    base = gridgen.synthetic_case(118, n_lines=186, n_gens=54, seed=2024,
                                  load_share=0.84, total_load=4000.0,
                                  name="sys118")
    with_deras = build_deras(base, fraction=0.5, group_size=10, seed=1)
    rated, vulnerable = gridgen.rate_for_contingencies(
        with_deras, n_vulnerable=5, headroom=1.4, floor=30.0,
        n_tight=3, tight_headroom=1.0)
    rated.deras = []  # DERAs rebuild at runtime from the scenario seeds
    rated.name = "sys118"
    emit(rated, "sys118", horizon=2304, group_size=10)
    print(f"  rated against outages of lines {vulnerable}")

    base = gridgen.synthetic_case(24, n_lines=35, n_gens=8, seed=7,
                                  load_share=0.8, total_load=700.0,
                                  name="sys24")
    with_deras = build_deras(base, fraction=0.5, group_size=7, seed=1)
    rated, vulnerable = gridgen.rate_for_contingencies(
        with_deras, n_vulnerable=5, headroom=1.35, floor=12.0,
        n_tight=3, tight_headroom=1.0)
    rated.deras = []
    rated.name = "sys24"
    emit(rated, "sys24", horizon=2304, group_size=7)
    print(f"  rated against outages of lines {vulnerable}")


if __name__ == "__main__":
    main()
