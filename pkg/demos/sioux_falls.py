"""Sioux Falls from network file to rota: assignment, cycle lengths, greedy decay.

Takes about half a minute. Run: python3 demos/sioux_falls.py
"""
import numpy as np

from wardrop_cycles import cli, traffic_core as tc

net, trips = cli.city_files("SiouxFalls")
res = cli.run_assign(net, trips, "SiouxFalls", tc.SolverConfig(relative_gap_target=1e-4))
row = res.tables[0].rows[0]
print(f"selfish total {row['total_ue_minutes']:,.0f} min, optimal total {row['total_so_minutes']:,.0f} min, "
      f"price of anarchy {row['poa']}")
worse = np.mean([r["violated"] for r in res.tables[1].rows])
print(f"{worse:.1%} of OD pairs are slower on average under the optimum than at equilibrium")

# %% how long until every driver has averaged out?
ods = cli.select_ods(res.pathsets.values())
lengths, stats = cli.run_cycle(ods)
print(f"\n{len(ods)} OD pairs with a real choice of routes")
for r in stats.rows:
    print(f"  {r['method']:>9}: median {r['median']:.0f} days, 95th percentile {r['p95']:.0f}, max {r['max']:.0f}")

# %% the greedy rule, day by day
sim = cli.run_simulate(ods, 50, "SiouxFalls")
ratios = sim.tables[-1].rows[0]
print("\ntotal inequity relative to day 1:",
      {d: round(ratios[f"ratio_{d}"], 3) for d in (5, 10, 20, 50)})
