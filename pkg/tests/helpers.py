"""Independent test oracles and random-instance builders.

Nothing here calls the solvers under test; the exhaustive search is plain
``itertools.product`` with left-to-right float sums.
"""

import itertools

import numpy as np

from ecoshift.options import OptionTable
from ecoshift.surface import Application, CapGrid, CapPair, PerformanceSurface


def exhaustive_best(tables, budget):
    """(total, used, choice) under the documented tie rule, by enumeration."""
    best = None
    for combo in itertools.product(*[range(len(t)) for t in tables]):
        used = sum(t.costs[k] for t, k in zip(tables, combo))
        if used > budget:
            continue
        total = 0.0
        for t, k in zip(tables, combo):
            total += t.improvements[k]
        key = (-total, used, tuple(t.costs[k] for t, k in zip(tables, combo)))
        if best is None or key < best[0]:
            best = (key, combo)
    (neg_total, used, _), combo = best
    return -neg_total, used, combo


def random_table(rng, app_id, max_options=8, max_cost=150, tie_prone=False):
    k = int(rng.integers(1, max_options + 1))
    costs = sorted(rng.choice(np.arange(1, max_cost + 1), size=k - 1, replace=False).tolist())
    if tie_prone:
        values = [float(v) for v in rng.integers(1, 5, size=k - 1) * 0.05]
    else:
        values = [float(v) for v in rng.uniform(0.001, 0.4, size=k - 1)]
    base = CapPair(100, 100)
    entries = {0: (0.0, base)}
    for e, v in zip(costs, values):
        entries[int(e)] = (v, CapPair(100 + int(e), 100))
    return OptionTable.from_entries(app_id, base, entries)


def random_instance(rng, min_apps=2, max_apps=6, max_options=8, max_budget=300, tie_prone=False):
    n = int(rng.integers(min_apps, max_apps + 1))
    tables = [random_table(rng, f"a{i}", max_options, tie_prone=tie_prone) for i in range(n)]
    return tables, int(rng.integers(0, max_budget + 1))


def random_app(rng, app_id="app", grid=None, missing=0.0):
    """Arbitrary (non-monotone) surface; the baseline entry is always known."""
    grid = grid or CapGrid((100, 150, 200, 250), (100, 140, 180))
    rt = rng.uniform(50, 150, size=grid.shape)
    if missing:
        rt[rng.random(grid.shape) < missing] = np.nan
    bi = int(rng.integers(0, grid.shape[0] - 1))
    bj = int(rng.integers(0, grid.shape[1] - 1))
    rt[bi, bj] = rng.uniform(80, 150)
    baseline = CapPair(grid.cpu_levels[bi], grid.gpu_levels[bj])
    return Application(app_id, baseline, PerformanceSurface(grid, rt))


def brute_force_curve(app, budget):
    """Best improvement with at most b extra watts, straight from the grid."""
    out = np.zeros(budget + 1)
    t0 = app.baseline_runtime
    for cap in app.grid.points():
        if not cap.dominates(app.baseline) or not app.surface.is_known(cap):
            continue
        e = cap.extra_over(app.baseline)
        if e > budget:
            continue
        v = (t0 - app.surface.runtime(cap)) / t0
        out[e:] = np.maximum(out[e:], v)
    return out
