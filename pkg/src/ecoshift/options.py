"""Per-application option tables and the prefix-max improvement curve.

An option table maps an exact extra-power cost ``e`` (watts above the
baseline, summed over CPU and GPU) to the best cap pair with that cost.
Costs whose best option does not beat the baseline are dropped: the free
``e = 0`` entry dominates them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import EmptyGridError, InvalidParamsError
from .surface import Application, CapGrid, CapPair


@dataclass(frozen=True)
class Option:
    improvement: float
    caps: CapPair


@dataclass(frozen=True, eq=False)
class OptionTable:
    """Options sorted by ascending cost; ``costs[0] == 0`` is the baseline."""

    app_id: str
    baseline: CapPair
    costs: tuple[int, ...]
    improvements: tuple[float, ...]
    caps: tuple[CapPair, ...]

    def __post_init__(self):
        if not (len(self.costs) == len(self.improvements) == len(self.caps)):
            raise InvalidParamsError("option table columns differ in length")
        if not self.costs or self.costs[0] != 0:
            raise InvalidParamsError(f"option table of {self.app_id!r} lacks its e=0 entry")
        if any(b <= a for a, b in zip(self.costs, self.costs[1:])):
            raise InvalidParamsError("option costs must be strictly increasing")

    @classmethod
    def from_entries(cls, app_id: str, baseline: CapPair, entries: Mapping[int, tuple[float, CapPair]]) -> "OptionTable":
        keys = sorted(entries)
        return cls(
            app_id,
            baseline,
            tuple(int(k) for k in keys),
            tuple(float(entries[k][0]) for k in keys),
            tuple(entries[k][1] for k in keys),
        )

    @property
    def entries(self) -> dict[int, Option]:
        return {e: Option(v, c) for e, v, c in zip(self.costs, self.improvements, self.caps)}

    def __len__(self):
        return len(self.costs)

    def cost_array(self) -> np.ndarray:
        return np.asarray(self.costs, dtype=np.int64)

    def improvement_array(self) -> np.ndarray:
        return np.asarray(self.improvements, dtype=float)

    def option_at(self, cost: int) -> Option:
        return self.entries[cost]


@dataclass(frozen=True, eq=False)
class ImprovementCurve:
    app_id: str
    values: np.ndarray

    def __call__(self, b: int) -> float:
        return float(self.values[b])

    @property
    def budget(self) -> int:
        return len(self.values) - 1


def _candidates(app: Application, grid: CapGrid):
    """Row-major (cpu, gpu, improvement) arrays over ``grid`` points dominating the baseline."""
    cpu = np.asarray(grid.cpu_levels, dtype=np.int64)
    gpu = np.asarray(grid.gpu_levels, dtype=np.int64)
    cpu = cpu[cpu >= app.baseline.cpu_w]
    gpu = gpu[gpu >= app.baseline.gpu_w]
    if cpu.size == 0 or gpu.size == 0:
        raise EmptyGridError(f"no grid point dominates baseline {app.baseline} of {app.id!r}")

    surf_cpu = {c: i for i, c in enumerate(app.grid.cpu_levels)}
    surf_gpu = {g: j for j, g in enumerate(app.grid.gpu_levels)}
    ci = np.array([surf_cpu.get(int(c), -1) for c in cpu])
    gj = np.array([surf_gpu.get(int(g), -1) for g in gpu])

    cc, gg = np.meshgrid(cpu, gpu, indexing="ij")
    ii, jj = np.meshgrid(ci, gj, indexing="ij")
    on_surface = (ii >= 0) & (jj >= 0)
    runtime = np.full(cc.shape, np.nan)
    runtime[on_surface] = app.surface.runtime_s[ii[on_surface], jj[on_surface]]

    t_base = app.baseline_runtime
    impr = (t_base - runtime) / t_base
    return cc.ravel(), gg.ravel(), impr.ravel()


def build_option_table(app: Application, budget_B: int, grid: CapGrid | None = None) -> OptionTable:
    """Best improvement per exact extra-power cost, for costs up to ``budget_B``.

    Grid points with unknown runtime are not candidates. Among equal
    improvements at one cost the lexicographically smallest cap pair wins.
    """
    if budget_B < 0:
        raise InvalidParamsError("budget must be non-negative")
    grid = app.grid if grid is None else grid
    cpu, gpu, impr = _candidates(app, grid)

    cost = (cpu - app.baseline.cpu_w) + (gpu - app.baseline.gpu_w)
    keep = (cost > 0) & (cost <= budget_B) & ~np.isnan(impr) & (impr > 0)
    order = np.arange(cpu.size)[keep]
    cost, impr, cpu, gpu = cost[keep], impr[keep], cpu[keep], gpu[keep]

    # group by cost: highest improvement first, then grid (lexicographic) order
    idx = np.lexsort((order, -impr, cost))
    first = np.ones(idx.size, dtype=bool)
    first[1:] = cost[idx][1:] != cost[idx][:-1]
    best = idx[first]

    entries = {0: (0.0, app.baseline)}
    for k in best:
        entries[int(cost[k])] = (float(impr[k]), CapPair(int(cpu[k]), int(gpu[k])))
    return OptionTable.from_entries(app.id, app.baseline, entries)


def improvement_curve(table: OptionTable, budget_B: int) -> ImprovementCurve:
    """``F(b)``: best improvement using at most ``b`` extra watts, for b = 0..budget_B."""
    if budget_B < 0:
        raise InvalidParamsError("budget must be non-negative")
    values = np.full(budget_B + 1, -np.inf)
    for e, v in zip(table.costs, table.improvements):
        if e <= budget_B:
            values[e] = max(values[e], v)
    return ImprovementCurve(table.app_id, np.maximum.accumulate(values))
