"""Same daily inequity, different discontent: why the order of a rotation matters.

Three drivers share routes of 6, 1 and 2 minutes (mean 3). Two rotations give
every driver the same multiset of cumulative deviations each day, yet one lets
a driver build up more accumulated discontent than the other.

Run: python3 demos/discontent.py
"""
import numpy as np

from wardrop_cycles import cycles as cy
from wardrop_cycles.metrics import DeviationLedger, deviations, discontent_measures
from wardrop_cycles.pathset import PathSet
from wardrop_cycles.schedule import CycleSchedule, DailyAssignment, Provenance

ps = PathSet.from_flows((1, 1, 1), (6.0, 1.0, 2.0))
rotations = {
    "A": [[0, 1, 2], [1, 2, 0], [2, 0, 1]],
    "B": [[0, 2, 1], [2, 1, 0], [1, 0, 2]],
}


def ledger(days):
    return DeviationLedger.from_daily([deviations(DailyAssignment(np.array(d)), ps) for d in days])


for name, days in rotations.items():
    led = ledger(days)
    print(f"rotation {name}: progression\n{led.history.astype(int)}")
    print("  max discontent per driver:", discontent_measures(led).max_cumulative_discontent.astype(int).tolist())

# %% second lap of rotation A: who should take which role?
base = CycleSchedule.from_days(rotations["A"], Provenance.FULL_SHIFT)
led = ledger(rotations["A"])
sigma = cy.intercycle_heuristic(base, led, ps)
print("\nnext lap roles (driver -> role):", sigma.tolist())
for s in (np.arange(3), sigma):
    print(f"  roles {s.tolist()}: objective {cy.intercycle_objective(base, led, s, ps):.0f}")
