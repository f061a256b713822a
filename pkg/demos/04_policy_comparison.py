"""
Policies on mixed workloads
===========================

Random mixes of CPU-bound, GPU-bound, dual-sensitive and insensitive
applications, several budgets, five noisy repeats each. Every reported
number is the true improvement at the assigned caps.
"""

from ecoshift import CapGrid, CapPair
from ecoshift.harness import POLICIES, mixed_scenario, run_comparison

grid = CapGrid.regular((100, 500), (100, 500), 10)

print(f"{'budget':>7s} " + " ".join(f"{p:>20s}" for p in POLICIES))
for budget in (200, 400, 800, 1600):
    sc = mixed_scenario(seed=11, grid=grid, n_apps=10, budget_w=budget, baseline=CapPair(200, 200),
                        noise_sd=0.02, repeats=5)
    report = run_comparison(sc)
    cells = []
    for p in POLICIES:
        s = report.summary(p)
        cells.append(f"{100 * s.avg_improvement:6.2f} [{100 * s.ci_low:5.2f},{100 * s.ci_high:5.2f}]")
    print(f"{budget:6d}W " + " ".join(f"{c:>20s}" for c in cells))

# Brackets are 98 % confidence intervals over repeats.
