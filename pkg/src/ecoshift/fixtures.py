"""The two-application H100 case study (cfd and raytracing) as ready-made inputs.

Only the measured cap pairs are known on each surface; baseline runtime is
set to 100 s so that ``T(target) = 100 * (1 - gain)``.
"""

from __future__ import annotations

from .policies import DemandSignal, demand_from_draw
from .surface import Application, CapGrid, CapPair, PerformanceSurface

BASELINE = CapPair(300, 200)
BUDGET_W = 200
BASE_RUNTIME_S = 100.0

# runtime reduction (fraction) at each measured cap pair
GAINS = {
    "raytracing": {
        CapPair(300, 300): 0.1557,   # best DP choice
        CapPair(350, 250): 0.0961,   # fair share
        CapPair(329, 294): 0.1703,   # demand-proportional
    },
    "cfd": {
        CapPair(400, 200): 0.1835,
        CapPair(350, 250): 0.0881,
        CapPair(354, 221): 0.0929,
    },
}
CLASSES = {"raytracing": "gpu", "cfd": "cpu"}

# uncapped draws that make the proportional rule grant exactly the
# demand-proportional caps above: demands (29, 94) and (54, 21), 198 W in total
UNCAPPED = {"raytracing": CapPair(329, 294), "cfd": CapPair(354, 221)}

EXPECTED_AVG = {"ecoshift": 0.1696, "fair-share": 0.0921, "demand-proportional": 0.1316}


def grid() -> CapGrid:
    cpu = sorted({BASELINE.cpu_w} | {c.cpu_w for g in GAINS.values() for c in g})
    gpu = sorted({BASELINE.gpu_w} | {c.gpu_w for g in GAINS.values() for c in g})
    return CapGrid(tuple(cpu), tuple(gpu))


def apps() -> list[Application]:
    g = grid()
    out = []
    for name, gains in GAINS.items():
        points = {BASELINE: BASE_RUNTIME_S}
        points.update({cap: BASE_RUNTIME_S * (1.0 - gain) for cap, gain in gains.items()})
        out.append(Application(name, BASELINE, PerformanceSurface.from_points(g, points),
                               CLASSES[name], UNCAPPED[name]))
    return out


def demands() -> list[DemandSignal]:
    return [demand_from_draw(a) for a in apps()]


def scenario_dict(surface_file: str = "case_study_surfaces.json") -> dict:
    """Scenario document pointing at a surface file written by ``save_apps(apps(), ...)``."""
    return {
        "id": "case_study",
        "budget_w": BUDGET_W,
        "grid": grid().to_dict(),
        "repeats": 1,
        "seed": 0,
        "receivers": [
            {
                "id": a.id,
                "class": a.sensitivity_class,
                "baseline": [a.baseline.cpu_w, a.baseline.gpu_w],
                "uncapped_draw": [a.uncapped_draw.cpu_w, a.uncapped_draw.gpu_w],
                "surface": {"file": surface_file},
            }
            for a in apps()
        ],
    }
