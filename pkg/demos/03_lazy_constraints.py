#!/usr/bin/env python3
"""Lazy security constraints on the 118-bus scenario.

Of the 1,111 candidate security constraints (186 line limits plus 185
post-contingency limits for each of 5 outages), only a handful ever bind.
The identification loop solves a relaxed clearing problem, scans all
candidates through the shift factors, and admits the worst violations
until the dispatch is clean, then matches the all-constraints solve.
"""

import os
import time

from derdispatch.caseio import build_deras, generate_bids, parse_case
from derdispatch.icci import ConstraintRef, enumerate_candidates, icci_loop
from derdispatch.rted import DfVector, relaxed_solver
from derdispatch.sensitivity import compute_isf, select_vulnerable

DATA = os.path.join(os.path.dirname(__file__), "..", "src", "derdispatch", "data")

with open(os.path.join(DATA, "sys118.m"), encoding="utf-8") as fh:
    case = parse_case(fh.read(), name="sys118")
case = build_deras(case, fraction=0.5, group_size=10, seed=1)
case = generate_bids(case, 30.0, seed=2)
vulnerable = select_vulnerable(case, 5)
sens = compute_isf(case, vulnerable_lines=vulnerable)

candidates = enumerate_candidates(case, sens)
print(f"candidate security constraints: {len(candidates)}")

loads = case.base_load_vector()
dfs = DfVector.uniform(case)
solver = relaxed_solver(case, sens, dfs, loads, None)

t0 = time.perf_counter()
result = icci_loop(solver, case, sens, k=5)
lazy_s = time.perf_counter() - t0
entries = result.crucial.entries()
print(f"identified crucial constraints: {len(entries)} "
      f"({100 * len(entries) / len(candidates):.2f} % of candidates)")
print(f"iterations: {result.iterations}, worst violation per round: "
      f"{['%.2f' % w for w in result.worst_history]} MW")

refs = frozenset(
    ConstraintRef("pre_contingency" if m is None else "post_contingency", l, m, b)
    for l, m in candidates for b in ("upper", "lower"))
t0 = time.perf_counter()
full, _ = solver(refs)
full_s = time.perf_counter() - t0
gap = abs(result.solution.cost_total - full.cost_total) / abs(full.cost_total)
print(f"\nlazy objective  {result.solution.cost_total:12.2f} $  ({lazy_s:.2f} s)")
print(f"full objective  {full.cost_total:12.2f} $  ({full_s:.2f} s)")
print(f"relative gap    {gap:.2e}   speedup x{full_s / lazy_s:.1f}")
