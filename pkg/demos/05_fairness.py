"""
Does maximizing average improvement starve anyone?
===================================================

Jain's index over per-application improvements: 1 means everyone gained
equally, 1/n means one application got everything.
"""

import numpy as np

from ecoshift import CapGrid, CapPair, jain_index
from ecoshift.harness import materialize, mixed_scenario, run_policies

print(jain_index([0.1, 0.1, 0.1]), jain_index([0.3, 0.0, 0.0]), jain_index([0.1, 0.2]))

grid = CapGrid.regular((100, 500), (100, 500), 10)
scores = {}
for seed in range(30):
    sc = mixed_scenario(seed, grid, n_apps=8, budget_w=600, baseline=CapPair(200, 200), noise_sd=0.02)
    for run in run_policies(materialize(sc), sc.budget_w, sc.grid):
        # insensitive apps gain nothing under any policy, so leave them out
        sensitive = [v for v, r in zip(run.true_improvements, sc.receivers) if r.sensitivity_class != "insensitive"]
        if sensitive:
            scores.setdefault(run.policy, []).append((jain_index(sensitive), np.mean(sensitive)))

for policy, rows in scores.items():
    j, avg = np.mean(rows, axis=0)
    print(f"{policy:20s} Jain {j:.3f}   avg improvement {100 * avg:5.2f} %")
