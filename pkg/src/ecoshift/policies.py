"""Reference distribution policies: none, fixed fair share, and demand-proportional.

``fair_share_allocate`` gives every receiver the same fixed share.
``demand_proportional_allocate`` grants power in proportion to the demand
inferred from each receiver's uncapped draw. Both are simple stand-ins for
existing managers, not ports of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .allocator import AllocationResult, AppAllocation, make_result
from .errors import InvalidParamsError
from .surface import Application, CapGrid, CapPair, relative_improvement


@dataclass(frozen=True)
class DemandSignal:
    app_id: str
    cpu_demand_w: float
    gpu_demand_w: float

    def __post_init__(self):
        if self.cpu_demand_w < 0 or self.gpu_demand_w < 0:
            raise InvalidParamsError(f"demand of {self.app_id!r} must be non-negative")


def demand_from_draw(app: Application, uncapped: CapPair | None = None) -> DemandSignal:
    """Demand = uncapped draw minus current cap, floored at zero, per component."""
    uncapped = app.uncapped_draw if uncapped is None else uncapped
    if uncapped is None:
        return DemandSignal(app.id, 0, 0)
    return DemandSignal(
        app.id,
        max(0, uncapped.cpu_w - app.baseline.cpu_w),
        max(0, uncapped.gpu_w - app.baseline.gpu_w),
    )


def _allocation(app: Application, caps: CapPair) -> AppAllocation:
    return AppAllocation(app.id, caps, caps.extra_over(app.baseline), relative_improvement(app, caps))


def _snap(app: Application, grid: CapGrid | None, cpu: int, gpu: int) -> CapPair:
    if grid is not None:
        cpu = grid.floor_level("cpu", cpu) or app.baseline.cpu_w
        gpu = grid.floor_level("gpu", gpu) or app.baseline.gpu_w
    return CapPair(max(cpu, app.baseline.cpu_w), max(gpu, app.baseline.gpu_w))


def no_distribution(apps: Sequence[Application], budget_B: int = 0) -> AllocationResult:
    return make_result("no-distribution", budget_B, [_allocation(a, a.baseline) for a in apps])


def fair_share_allocate(apps: Sequence[Application], budget_B: int,
                        grid: CapGrid | None = None) -> AllocationResult:
    """Every receiver gets ``B // N`` watts, half to CPU and half to GPU.

    Each component is rounded down to a grid level (``grid`` or the app's
    own grid), never below baseline. Rounding losses are left unassigned.
    """
    if budget_B < 0:
        raise InvalidParamsError("budget must be non-negative")
    if not apps:
        return make_result("fair-share", budget_B, [])
    half = (budget_B // len(apps)) // 2
    allocs = []
    for app in apps:
        caps = _snap(app, grid or app.grid, app.baseline.cpu_w + half, app.baseline.gpu_w + half)
        allocs.append(_allocation(app, caps))
    return make_result("fair-share", budget_B, allocs)


def demand_proportional_allocate(apps: Sequence[Application], demands: Sequence[DemandSignal],
                                 budget_B: int, grid: CapGrid | None = None) -> AllocationResult:
    """Grant each component ``floor(B * demand / total demand)``, capped at its demand.

    With ``grid=None`` caps move at 1 W resolution; otherwise each component
    is rounded down to a level of ``grid``.
    """
    if budget_B < 0:
        raise InvalidParamsError("budget must be non-negative")
    by_id = {d.app_id: d for d in demands}
    missing = [a.id for a in apps if a.id not in by_id]
    if missing:
        raise InvalidParamsError(f"no demand signal for {', '.join(missing)}")

    total = sum(Fraction(by_id[a.id].cpu_demand_w) + Fraction(by_id[a.id].gpu_demand_w) for a in apps)
    allocs = []
    for app in apps:
        d = by_id[app.id]
        if total == 0:
            grant_c = grant_g = 0
        else:
            grant_c = min(math.floor(budget_B * Fraction(d.cpu_demand_w) / total), math.floor(d.cpu_demand_w))
            grant_g = min(math.floor(budget_B * Fraction(d.gpu_demand_w) / total), math.floor(d.gpu_demand_w))
        caps = _snap(app, grid, app.baseline.cpu_w + grant_c, app.baseline.gpu_w + grant_g)
        allocs.append(_allocation(app, caps))
    return make_result("demand-proportional", budget_B, allocs)
