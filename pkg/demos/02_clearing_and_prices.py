#!/usr/bin/env python3
"""Aggregate-versus-member clearing and locational prices.

A three-bus system hosts one aggregator with members at two buses.  The
aggregate model spreads its dispatch with fixed distribution factors; the
full model clears each member separately.  With a congested line the two
disagree, and the nodal prices show where the congestion rent sits.
"""

import numpy as np

from derdispatch.caseio import BidCurve, Bus, Dera, Generator, Line, Load, \
    SystemCase, TDer
from derdispatch.icci import ConstraintRef
from derdispatch.rted import DfVector, build_full_model, build_rted, solve_dispatch
from derdispatch.sensitivity import compute_isf

buses = [Bus(1, is_reference=True), Bus(2), Bus(3)]
lines = [Line(0, 1, 2, 0.1, 0.0, 100.0),
         Line(1, 2, 3, 0.1, 0.0, 100.0),
         Line(2, 1, 3, 0.1, 0.0, 4.0)]    # the congested corridor
gens = [Generator(0, 1, 0.0, 40.0, 40.0, 40.0, BidCurve.single(10.0, 0.0, 40.0))]
tders = [TDer("D2", 2, 0.0, 6.0, cost_curve=BidCurve.single(18.0, 0.0, 6.0)),
         TDer("D3", 3, 0.0, 6.0, cost_curve=BidCurve.single(22.0, 0.0, 6.0))]
dera = Dera("A0", tders, bid_curve=BidCurve.from_slopes([18.0, 22.0], 0.0, 12.0))
case = SystemCase(buses, lines, gens, [Load(3, 12.0)], [dera])

sens = compute_isf(case)
monitored = [ConstraintRef("pre_contingency", l.id, None, b)
             for l in case.lines for b in ("upper", "lower")]
loads = case.base_load_vector()

for label, dfs in (("uniform factors", DfVector({"A0": np.array([0.5, 0.5])})),
                   ("all at bus 3", DfVector({"A0": np.array([0.0, 1.0])}))):
    model = build_rted(case, sens, dfs, loads, None, monitored)
    sol = solve_dispatch(model, case, sens, dfs, loads, monitored)
    print(f"aggregate model, {label}: cost {sol.cost_total:8.2f} $, "
          f"gen {sol.p_gen[0]:5.2f} MW, dera {sol.p_dera['A0']:5.2f} MW")

model = build_full_model(case, sens, loads, None, monitored)
sol = solve_dispatch(model, case, sens, None, loads, monitored, full=True)
print(f"full member model:          cost {sol.cost_total:8.2f} $, "
      f"members {sol.p_tder}")

print("\nnodal prices under the full model:")
for bus, lmp in zip(case.buses, sol.lmp):
    print(f"  bus {bus.id}: {lmp:7.2f} $/MWh")
print("congestion on the 4 MW line separates bus 3 from the cheap generator")
