"""Exact multiple-choice knapsack allocation of a reclaimed-power budget.

Each receiver contributes one option table; exactly one option is picked per
receiver so that the summed extra power stays within the budget and the
summed improvement is maximal.

Ties are broken deterministically, and ``brute_force_allocate`` applies the
same rule:

1. larger total improvement (floats summed left to right in input order);
2. smaller total power used;
3. lexicographically smaller vector of chosen costs, in input order.

Two solvers share that contract. ``dp_allocate`` is the sparse map-based DP
(only reachable used-power values are states) and retains every layer.
``dp_allocate_rolling`` runs a dense DP over 0..B keeping only two layers of
values, plus one small integer per (receiver, budget) for reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DuplicateAppError, InvalidParamsError, InvariantViolation
from .options import OptionTable
from .surface import CapPair


@dataclass(frozen=True)
class AppAllocation:
    app_id: str
    caps: CapPair
    extra_power_w: int
    predicted_improvement: float


@dataclass(frozen=True)
class DPStats:
    transitions: int = 0
    peak_value_entries: int = 0
    choice_records: int = 0


@dataclass(frozen=True)
class AllocationResult:
    policy: str
    budget_w: int
    allocations: tuple[AppAllocation, ...]
    total_power_used: int
    total_improvement: float
    avg_improvement: float
    stats: DPStats = field(default_factory=DPStats, compare=False)

    @property
    def app_ids(self) -> list[str]:
        return [a.app_id for a in self.allocations]

    def caps_by_app(self) -> dict[str, CapPair]:
        return {a.app_id: a.caps for a in self.allocations}

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "budget_w": self.budget_w,
            "total_power_used_w": self.total_power_used,
            "total_improvement": self.total_improvement,
            "avg_improvement": self.avg_improvement,
            "allocations": [
                {
                    "app_id": a.app_id,
                    "cpu_w": a.caps.cpu_w,
                    "gpu_w": a.caps.gpu_w,
                    "extra_power_w": a.extra_power_w,
                    "predicted_improvement": a.predicted_improvement,
                }
                for a in self.allocations
            ],
        }


def make_result(policy: str, budget_w: int, allocations: Sequence[AppAllocation],
                total: float | None = None, stats: DPStats | None = None) -> AllocationResult:
    allocations = tuple(allocations)
    if total is None:
        total = 0.0
        for a in allocations:
            total += a.predicted_improvement
    used = sum(a.extra_power_w for a in allocations)
    if used > budget_w:
        raise InvariantViolation(f"{policy}: {used} W allocated exceeds budget {budget_w} W")
    avg = total / len(allocations) if allocations else 0.0
    return AllocationResult(policy, budget_w, allocations, used, total, avg, stats or DPStats())


def check_tables(tables: Sequence[OptionTable], budget_B: int) -> None:
    if budget_B < 0:
        raise InvalidParamsError("budget must be non-negative")
    seen = set()
    for t in tables:
        if t.app_id in seen:
            raise DuplicateAppError(f"two option tables share id {t.app_id!r}")
        seen.add(t.app_id)


def _lex_ranks(parent_rank: np.ndarray, opt: np.ndarray) -> np.ndarray:
    """Rank of each state's choice prefix in lexicographic order."""
    order = np.lexsort((opt, parent_rank))
    rank = np.empty(order.size, dtype=np.int64)
    rank[order] = np.arange(order.size)
    return rank


def _picks(tables, choice_idx, policy, budget_B, total, stats) -> AllocationResult:
    allocs = [
        AppAllocation(t.app_id, t.caps[k], t.costs[k], t.improvements[k])
        for t, k in zip(tables, choice_idx)
    ]
    return make_result(policy, budget_B, allocs, total=total, stats=stats)


def dp_allocate(tables: Sequence[OptionTable], budget_B: int) -> AllocationResult:
    check_tables(tables, budget_B)
    used = np.zeros(1, dtype=np.int64)
    score = np.zeros(1)
    rank = np.zeros(1, dtype=np.int64)
    layers = []
    transitions = 0

    for t in tables:
        e = t.cost_array()
        v = t.improvement_array()
        cand_u = (used[:, None] + e[None, :]).ravel()
        cand_s = (score[:, None] + v[None, :]).ravel()
        parent = np.repeat(np.arange(used.size), e.size)
        opt = np.tile(np.arange(e.size), used.size)
        ok = cand_u <= budget_B
        cand_u, cand_s, parent, opt = cand_u[ok], cand_s[ok], parent[ok], opt[ok]
        transitions += int(ok.sum())

        order = np.lexsort((opt, rank[parent], -cand_s, cand_u))
        head = np.ones(order.size, dtype=bool)
        head[1:] = cand_u[order][1:] != cand_u[order][:-1]
        win = order[head]

        used, score = cand_u[win], cand_s[win]
        parent, opt = parent[win], opt[win]
        rank = _lex_ranks(rank[parent], opt)
        layers.append((used, score, rank, parent, opt))

    best = int(np.argmax(score))  # first maximum = least power used
    total = float(score[best])
    choice = []
    for _, _, _, parent, opt in reversed(layers):
        choice.append(int(opt[best]))
        best = int(parent[best])
    choice.reverse()

    stats = DPStats(
        transitions=transitions,
        peak_value_entries=1 + sum(layer[0].size for layer in layers),
        choice_records=sum(layer[0].size for layer in layers),
    )
    return _picks(tables, choice, "ecoshift", budget_B, total, stats)


def dp_allocate_rolling(tables: Sequence[OptionTable], budget_B: int) -> AllocationResult:
    check_tables(tables, budget_B)
    n = budget_B + 1
    reach = np.zeros(n, dtype=bool)
    reach[0] = True
    score = np.full(n, -np.inf)
    score[0] = 0.0
    rank = np.zeros(n, dtype=np.int64)
    big = np.iinfo(np.int64).max
    choices = []
    transitions = 0

    for t in tables:
        new_reach = np.zeros(n, dtype=bool)
        new_score = np.full(n, -np.inf)
        new_prank = np.full(n, big, dtype=np.int64)
        new_opt = np.full(n, -1, dtype=np.int32)
        for k, (e, v) in enumerate(zip(t.costs, t.improvements)):
            if e > budget_B:
                break
            m = n - e
            src_reach = reach[:m]
            cand_s = score[:m] + v
            cand_r = rank[:m]
            cur_reach = new_reach[e:]
            cur_s = new_score[e:]
            cur_r = new_prank[e:]
            better = src_reach & (~cur_reach | (cand_s > cur_s) | ((cand_s == cur_s) & (cand_r < cur_r)))
            cur_s[better] = cand_s[better]
            cur_r[better] = cand_r[better]
            cur_reach |= better
            new_opt[e:][better] = k
            transitions += m

        idx = np.flatnonzero(new_reach)
        rank = np.zeros(n, dtype=np.int64)
        rank[idx] = _lex_ranks(new_prank[idx], new_opt[idx])
        reach, score = new_reach, new_score
        choices.append(new_opt)

    best_u = int(np.argmax(np.where(reach, score, -np.inf)))
    total = float(score[best_u])
    choice = []
    u = best_u
    for t, opt in zip(reversed(tables), reversed(choices)):
        k = int(opt[u])
        choice.append(k)
        u -= t.costs[k]
    if u != 0:
        raise InvariantViolation("rolling DP backtrack did not return to zero used power")
    choice.reverse()

    stats = DPStats(transitions=transitions, peak_value_entries=2 * n, choice_records=len(tables) * n)
    return _picks(tables, choice, "ecoshift", budget_B, total, stats)
