"""
Two applications, 200 W to share
================================

cfd is CPU-hungry, raytracing wants GPU power. Both sit at a 300 W CPU /
200 W GPU cap and a donor has just freed 200 W. We compare how three
policies spend it.
"""

from ecoshift import (build_option_table, demand_proportional_allocate, dp_allocate,
                      fair_share_allocate, fixtures)

apps = fixtures.apps()
budget = fixtures.BUDGET_W

# Each app's option table: the best cap pair for every exact extra-power cost.
for app in apps:
    table = build_option_table(app, budget)
    print(app.id)
    for cost, gain, caps in zip(table.costs, table.improvements, table.caps):
        print(f"  +{cost:3d} W -> {caps}  {100 * gain:5.2f} %")

# Fair share splits the budget evenly; demand-proportional follows the
# uncapped power draw; the DP picks the best combination.
results = [
    fair_share_allocate(apps, budget),
    demand_proportional_allocate(apps, fixtures.demands(), budget),
    dp_allocate([build_option_table(a, budget) for a in apps], budget),
]

print()
for res in results:
    caps = ", ".join(f"{a.app_id} {a.caps}" for a in res.allocations)
    print(f"{res.policy:20s} {100 * res.avg_improvement:6.2f} %   {caps}")

# The DP sends all 100 W of CPU headroom to cfd and the GPU headroom to
# raytracing, which neither even split nor demand-following finds.
