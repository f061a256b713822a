"""Exhaustive Oracle over cross-application option combinations.

Enumerating option-table entries instead of raw grid points is equivalent:
a table keeps the best cap pair for every exact cost, so any combination of
grid points is matched or beaten by the combination of table entries with
the same costs.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .allocator import AllocationResult, AppAllocation, check_tables, make_result
from .errors import AppSetMismatchError, TooLargeError
from .options import OptionTable
from .surface import Application, relative_improvement

DEFAULT_LIMIT = 10**8
_CHUNK = 1 << 20


def brute_force_allocate(tables: Sequence[OptionTable], budget_B: int,
                         limit: int = DEFAULT_LIMIT) -> AllocationResult:
    """Best one-option-per-app selection with total cost <= ``budget_B``.

    Every combination is visited in lexicographic order of option indices.
    Partial combinations already over budget are dropped early since costs
    are non-negative; nothing is pruned on objective value.
    """
    check_tables(tables, budget_B)
    combos = math.prod(len(t) for t in tables)
    if combos > limit:
        raise TooLargeError(f"{combos} combinations exceed the limit of {limit}")

    costs = [t.cost_array() for t in tables]
    values = [t.improvement_array() for t in tables]
    sizes = [len(t) for t in tables]
    best = [(-math.inf, 0, 0)]  # (score, used, flat index); flat order == lexicographic order

    def consider(score, used, flat):
        top = score.max()
        cand = np.flatnonzero(score == top)
        low = used[cand].min()
        cand = cand[used[cand] == low]
        f = int(flat[cand].min())
        s0, u0, f0 = best[0]
        if top > s0 or (top == s0 and (low < u0 or (low == u0 and f < f0))):
            best[0] = (float(top), int(low), f)

    def search(score, used, flat, depth):
        if depth == len(tables):
            consider(score, used, flat)
            return
        k = sizes[depth]
        if score.size * k > _CHUNK and score.size > 1:
            step = max(1, _CHUNK // k)
            for lo in range(0, score.size, step):
                search(score[lo:lo + step], used[lo:lo + step], flat[lo:lo + step], depth)
            return
        s = (score[:, None] + values[depth][None, :]).ravel()
        u = (used[:, None] + costs[depth][None, :]).ravel()
        f = (flat[:, None] * k + np.arange(k)[None, :]).ravel()
        ok = u <= budget_B
        if ok.any():
            search(s[ok], u[ok], f[ok], depth + 1)

    search(np.zeros(1), np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64), 0)

    total, _, flat = best[0]
    choice = []
    for k in reversed(sizes):
        choice.append(flat % k)
        flat //= k
    choice.reverse()
    allocs = [
        AppAllocation(t.app_id, t.caps[i], t.costs[i], t.improvements[i])
        for t, i in zip(tables, choice)
    ]
    return make_result("oracle", budget_B, allocs, total=total if tables else 0.0)


def true_avg_improvement(result: AllocationResult, true_apps: Sequence[Application]) -> float:
    """Average improvement of ``result``'s caps evaluated on ``true_apps``."""
    by_id = {a.id: a for a in true_apps}
    if set(by_id) != set(result.app_ids) or len(by_id) != len(result.allocations):
        raise AppSetMismatchError("allocation and true surfaces cover different applications")
    if not result.allocations:
        return 0.0
    total = 0.0
    for alloc in result.allocations:
        total += relative_improvement(by_id[alloc.app_id], alloc.caps)
    return total / len(result.allocations)


def oracle_gap(dp_result: AllocationResult, oracle_result: AllocationResult,
               true_apps: Sequence[Application] | None = None) -> float:
    """Oracle minus DP average improvement, in percentage points.

    Both allocations are scored on ``true_apps`` when given; otherwise each
    result's own ``avg_improvement`` is used.
    """
    if sorted(dp_result.app_ids) != sorted(oracle_result.app_ids):
        raise AppSetMismatchError("DP and Oracle results cover different applications")
    if dp_result.budget_w != oracle_result.budget_w:
        raise AppSetMismatchError("DP and Oracle results were computed for different budgets")
    if true_apps is None:
        return 100.0 * (oracle_result.avg_improvement - dp_result.avg_improvement)
    return 100.0 * (true_avg_improvement(oracle_result, true_apps) - true_avg_improvement(dp_result, true_apps))
